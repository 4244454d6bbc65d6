use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn geoloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoloop")).args(args).output().unwrap()
}

fn scene(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenes")
        .join(name)
        .display()
        .to_string()
}

fn run(name: &str, out: &Path) -> Output {
    geoloop(&["run", &scene(name), "--out", out.to_str().unwrap()])
}

fn report(dir: &Path) -> String {
    dir.join("report.json").display().to_string()
}

#[test]
fn wiggle_run_verifies() {
    let d = tempfile::tempdir().unwrap();
    let o = run("sphere_wiggle.json", d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = geoloop(&["verify", &report(d.path())]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));
    let text = String::from_utf8_lossy(&v.stdout);
    for f in ["step_count", "L_plus_2a", "l_plus_a", "l_plus_3a_delta"] {
        assert!(text.contains(f), "{text}");
    }
    assert!(d.path().join("traces/frames.csv").exists());
}

#[test]
fn runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run("sphere_wiggle.json", a.path());
    run("sphere_wiggle.json", b.path());
    for f in ["report.json", "curves/final.json", "traces/frames.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn seed_override_changes_the_curve() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run("sphere_wiggle.json", a.path());
    let s = scene("sphere_wiggle.json");
    let o = geoloop(&["run", &s, "--out", b.path().to_str().unwrap(), "--seed", "99"]);
    assert_eq!(o.status.code(), Some(0));
    let x = std::fs::read(a.path().join("report.json")).unwrap();
    let y = std::fs::read(b.path().join("report.json")).unwrap();
    assert!(x != y);
}

#[test]
fn tampered_measurement_is_a_mismatch() {
    let d = tempfile::tempdir().unwrap();
    run("sphere_wiggle.json", d.path());
    let path = d.path().join("report.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let certs = v["certificates"].as_array_mut().unwrap();
    let c = certs.iter_mut().find(|c| c["formula"] == "l_plus_a").unwrap();
    let m = c["measured"].as_f64().unwrap();
    c["measured"] = serde_json::json!(m * 0.5);
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    let o = geoloop(&["verify", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("MISMATCH"));
}

#[test]
fn tampered_claim_is_a_mismatch() {
    let d = tempfile::tempdir().unwrap();
    run("sphere_wiggle.json", d.path());
    let path = d.path().join("report.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    v["certificates"][0]["claimed"] = serde_json::json!(1e6);
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    assert_eq!(geoloop(&["verify", path.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn missing_witness_curve_is_an_io_error() {
    let d = tempfile::tempdir().unwrap();
    run("sphere_wiggle.json", d.path());
    std::fs::remove_file(d.path().join("curves/witness_l_plus_a.json")).unwrap();
    let o = geoloop(&["verify", &report(d.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn explicit_curves_directory() {
    let d = tempfile::tempdir().unwrap();
    run("sphere_wiggle.json", d.path());
    let moved = d.path().join("elsewhere");
    std::fs::rename(d.path().join("curves"), &moved).unwrap();
    assert_eq!(geoloop(&["verify", &report(d.path())]).status.code(), Some(1));
    let o = geoloop(&["verify", &report(d.path()), moved.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn malformed_scene_is_an_io_error() {
    let d = tempfile::tempdir().unwrap();
    let bad = d.path().join("bad.json");
    std::fs::write(&bad, "{\"name\": \"x\", \"manifold\": ").unwrap();
    let o = geoloop(&["run", bad.to_str().unwrap(), "--out", d.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let o = geoloop(&["run", "/nonexistent/scene.json", "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn torus_violation_exits_2_and_verifies() {
    let d = tempfile::tempdir().unwrap();
    let o = run("torus_violation.json", d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(d.path().join("curves/refuting_loop.json").exists());
    let v = geoloop(&["verify", &report(d.path())]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));
}

#[test]
fn formula_table_lists_8_pi_m() {
    let o = geoloop(&["formula", "--k", "1.5", "--m", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("general_bound")).collect();
    assert_eq!(rows.len(), 3);
    for (i, r) in rows.iter().enumerate() {
        let over_pi: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(over_pi, 8.0 * (i + 1) as f64);
    }
    assert!(text.contains("loop_count,2,1,loops"));
}

#[test]
fn trace_writes_one_row_per_frame() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("t.csv");
    let o = geoloop(&["trace", &scene("sphere_wiggle.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,s,tau,span,kind,length,with_tail"));
    assert!(lines.count() > 10);
}
