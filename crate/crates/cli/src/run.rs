//! `geoloop run`: one scene in, report + curves + CSV traces out.

use anyhow::Context;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use geoloop_core::certificate::params;
use geoloop_core::sweepout::{minimax_geodesic_with, MinimaxConfig};
use geoloop_core::theorem_a::{shorten_curve_with, InvariantReport, Shortened, StepRecord};
use geoloop_core::theorem_b::{run_family, GapReport, NodeReport};
use geoloop_core::{
    BirkhoffConfig, BoundCertificate, FamilyConfig, FamilyResult, FormulaId, GeoError, LoopFamily,
    ManifoldSpec, MinimaxResult, PLCurve, Remeasurer, SlackPolicy,
};

use crate::canon::{to_canonical, to_canonical_exact};
use crate::scene::{Input, Scene, SceneParams};
use crate::{EXIT_CERT_FAILED, EXIT_OK, EXIT_VIOLATED};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub slack_c0: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    CertificateFailed,
    HypothesisViolated,
}

#[derive(Debug, Serialize)]
pub struct CurveSummary {
    pub initial_length: f64,
    pub final_length: f64,
    pub cuts: usize,
    pub frames: usize,
    pub invariants: InvariantReport,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Serialize)]
pub struct FamilySummary {
    pub input_nodes: usize,
    pub refined_nodes: usize,
    pub epsilon: f64,
    pub big_l: f64,
    pub lambda: Vec<f64>,
    pub disjoint_bound: f64,
    pub disjoint_ok: bool,
    pub g0_matches: bool,
    pub g1_matches: bool,
    pub based: bool,
    pub tilde_loops: usize,
    pub nodes: Vec<NodeReport>,
    pub gaps: Vec<GapReport>,
}

#[derive(Debug, Serialize)]
pub struct MinimaxSummary {
    pub minimax_length: f64,
    pub geodesic_residual: f64,
    pub stages: usize,
    pub sweeps: usize,
    pub degenerate: bool,
}

#[derive(Debug, Serialize)]
pub struct Violation {
    pub loop_length: f64,
    pub loop_curve: String,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub scene: String,
    pub mode: &'static str,
    pub status: Status,
    pub seed: u64,
    pub manifold: ManifoldSpec,
    pub params: SceneParams,
    pub slack_policy: SlackPolicy,
    pub certificates: Vec<BoundCertificate>,
    /// Curve file, relative to the report, whose length is each
    /// certificate's measured value.
    pub witnesses: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimax: Option<MinimaxSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<Violation>,
}

pub struct RunOutcome {
    pub code: i32,
    pub report_path: PathBuf,
    pub report: Report,
}

/// Output layout under `--out`.
struct Sink {
    root: PathBuf,
    curves: String,
    traces: String,
}

impl Sink {
    fn new(root: &Path, scene: &Scene) -> anyhow::Result<Sink> {
        let s = Sink {
            root: root.to_path_buf(),
            curves: scene.outputs.curves.clone(),
            traces: scene.outputs.traces.clone(),
        };
        for d in [&s.curves, &s.traces] {
            let p = root.join(d);
            std::fs::create_dir_all(&p).with_context(|| format!("creating {}", p.display()))?;
        }
        Ok(s)
    }

    /// Writes a curve and returns its path relative to the output root.
    fn curve(&self, name: &str, c: &PLCurve) -> anyhow::Result<String> {
        let rel = format!("{}/{name}.json", self.curves);
        write(&self.root.join(&rel), &to_canonical_exact(&c.to_json())?)?;
        Ok(rel)
    }

    fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
        let path = self.root.join(&self.traces).join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn num(x: f64) -> String {
    format!("{}", crate::canon::round_sig(x))
}

pub fn run_scene(scene_path: &Path, out: &Path, opts: &RunOptions) -> anyhow::Result<RunOutcome> {
    let mut scene = Scene::load(scene_path)?;
    if let Some(c0) = opts.slack_c0 {
        anyhow::ensure!(c0 >= 0.0, "--slack-c0 must be nonnegative");
        scene.slack.c0 = Some(c0);
    }
    if let Some(seed) = opts.seed {
        scene.seed = seed;
    }
    run(&scene, out)
}

pub fn run(scene: &Scene, out: &Path) -> anyhow::Result<RunOutcome> {
    let m = scene.model()?;
    let pr = scene.shortening_params()?;
    let input = scene.build_input(&m)?;
    let sink = Sink::new(out, scene)?;
    let birkhoff = BirkhoffConfig {
        seed: scene.seed,
        ..BirkhoffConfig::default()
    };
    let mut report = Report {
        scene: scene.name.clone(),
        mode: if scene.is_family() { "family" } else { "curve" },
        status: Status::Ok,
        seed: scene.seed,
        manifold: scene.manifold.clone(),
        params: scene.params.clone(),
        slack_policy: scene.slack,
        certificates: Vec::new(),
        witnesses: BTreeMap::new(),
        curve: None,
        family: None,
        minimax: None,
        violation: None,
    };
    let outcome = match input {
        Input::Curve(alpha) => {
            sink.curve("initial", &alpha)?;
            shorten_curve_with(&alpha, &pr, &birkhoff).map(|s| curve_outputs(&sink, &mut report, &alpha, &s))
        }
        Input::Family(fam) => {
            write_family(&sink, &fam)?;
            let big_l = scene.params.big_l.unwrap_or_else(|| fam.max_length());
            let cfg = FamilyConfig {
                birkhoff,
                ..FamilyConfig::default()
            };
            run_family(&fam, &pr, big_l, &cfg).map(|res| family_outputs(&sink, &mut report, scene, &fam, big_l, res))
        }
    };
    match outcome {
        Ok(r) => r?,
        Err(GeoError::HypothesisViolated { loop_length, loop_curve }) => {
            let rel = sink.curve("refuting_loop", &loop_curve)?;
            report.status = Status::HypothesisViolated;
            report.violation = Some(Violation {
                loop_length,
                loop_curve: rel,
                message: format!(
                    "an index-zero loop of length {loop_length:.9} exceeds l = {}",
                    scene.params.l
                ),
            });
        }
        Err(e) => return Err(e.into()),
    }
    if report.status == Status::Ok && !report.certificates.iter().all(|c| c.pass) {
        report.status = Status::CertificateFailed;
    }
    let report_path = out.join(&scene.outputs.report);
    write(&report_path, &to_canonical(&report)?)?;
    let code = match report.status {
        Status::Ok => EXIT_OK,
        Status::CertificateFailed => EXIT_CERT_FAILED,
        Status::HypothesisViolated => EXIT_VIOLATED,
    };
    Ok(RunOutcome {
        code,
        report_path,
        report,
    })
}

fn witness(sink: &Sink, report: &mut Report, cert: BoundCertificate, c: &PLCurve) -> anyhow::Result<()> {
    let rel = sink.curve(&format!("witness_{}", cert.formula.name()), c)?;
    report.witnesses.insert(cert.formula.name().to_string(), rel);
    report.certificates.push(cert);
    Ok(())
}

fn curve_outputs(sink: &Sink, report: &mut Report, alpha: &Arc<PLCurve>, s: &Shortened) -> anyhow::Result<()> {
    sink.curve("final", &s.final_curve)?;
    let mut r = Remeasurer::new();
    let lens: Vec<f64> = s.homotopy.frames.iter().map(|f| r.frame_len(f)).collect();
    let smp = s.family.sample();
    let fam_lens: Vec<f64> = smp.frames.iter().map(|f| r.frame_len(f)).collect();
    let argmax = |xs: &[f64]| {
        xs.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, &x)| if x > a.1 { (i, x) } else { a })
            .0
    };
    report.certificates.push(s.cert.clone());
    for b in &s.bounds {
        let c = match b.formula {
            FormulaId::LPlus2a => s.homotopy.frames[argmax(&lens)].materialize()?,
            FormulaId::LPlus3aDelta => smp.frames[argmax(&fam_lens)].materialize()?,
            _ => (*s.final_curve).clone(),
        };
        witness(sink, report, b.clone(), &c)?;
    }
    sink.csv(
        "frames.csv",
        &["index", "s", "tau", "length", "with_tail"],
        smp.s.iter().zip(&smp.tau).zip(fam_lens.iter().zip(&lens)).enumerate().map(
            |(i, ((s, t), (l, h)))| vec![i.to_string(), num(*s), num(*t), num(*l), num(*h)],
        ),
    )?;
    sink.csv(
        "steps.csv",
        &["step", "tau", "head_length", "e_length", "loop_length", "limit_length", "stages", "escapes", "terminal"],
        s.family.steps.iter().enumerate().map(|(i, st)| {
            vec![
                i.to_string(),
                num(st.tau),
                num(st.head_length),
                num(st.e_length),
                num(st.loop_length),
                num(st.limit_length),
                st.stages.to_string(),
                st.escapes.to_string(),
                st.terminal.to_string(),
            ]
        }),
    )?;
    report.curve = Some(CurveSummary {
        initial_length: alpha.length(),
        final_length: s.final_curve.length(),
        cuts: s.family.cut_count(),
        frames: lens.len(),
        invariants: s.family.check_invariants(),
        steps: s.family.steps.clone(),
    });
    Ok(())
}

fn write_family(sink: &Sink, fam: &LoopFamily) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct FamilyJson {
        manifold: ManifoldSpec,
        circle: bool,
        epsilon: f64,
        nodes: Vec<f64>,
        loops: Vec<Vec<Vec<f64>>>,
    }
    let fj = FamilyJson {
        manifold: fam.model().spec(),
        circle: fam.circle,
        epsilon: fam.epsilon,
        nodes: fam.nodes.clone(),
        loops: fam.loops.iter().map(|c| c.to_json().breakpoints).collect(),
    };
    write(&sink.root.join(&sink.curves).join("family.json"), &to_canonical_exact(&fj)?)
}

fn family_outputs(
    sink: &Sink,
    report: &mut Report,
    scene: &Scene,
    fam: &LoopFamily,
    big_l: f64,
    res: FamilyResult,
) -> anyhow::Result<()> {
    for (c, w) in res.certs.iter().zip(&res.witnesses) {
        witness(sink, report, c.clone(), w)?;
    }
    if !(res.disjoint_ok && res.g0_matches && res.g1_matches && res.based) {
        report.status = Status::CertificateFailed;
    }
    sink.csv(
        "nodes.csv",
        &["node", "t", "length", "beta_length", "cuts", "jitter", "homotopy_max"],
        res.nodes.iter().enumerate().map(|(i, n)| {
            vec![
                i.to_string(),
                num(n.t),
                num(n.length),
                num(n.beta_length),
                n.cuts.to_string(),
                n.jitter.to_string(),
                num(n.homotopy_max),
            ]
        }),
    )?;
    sink.csv(
        "gaps.csv",
        &["left", "right", "entries", "contraction_max", "tilde_max", "g_max", "disjoint_worst", "min_partition_gap"],
        res.gaps.iter().map(|g| {
            vec![
                g.left.to_string(),
                g.right.to_string(),
                g.entries.to_string(),
                num(g.contraction_max),
                num(g.tilde_max),
                num(g.g_max),
                num(g.disjoint_worst),
                num(g.min_partition_gap),
            ]
        }),
    )?;
    if scene.minimax {
        let p = &scene.params;
        let cfg = MinimaxConfig {
            m: p.m as f64,
            a: p.a,
            slack: scene.slack,
            ..MinimaxConfig::default()
        };
        let mm: MinimaxResult = minimax_geodesic_with(&res.tilde_f, &cfg)?;
        sink.curve("critical_loop", &mm.critical_loop)?;
        let general = BoundCertificate::new(
            FormulaId::GeneralBound,
            params(&[("k", p.k), ("m", p.m as f64), ("a", p.a)]),
            mm.minimax_length,
            mm.bound.slack,
        )?;
        witness(sink, report, mm.bound.clone(), &mm.critical_loop)?;
        witness(sink, report, general, &mm.critical_loop)?;
        sink.csv(
            "minimax.csv",
            &["stage", "max_length"],
            mm.stage_max.iter().enumerate().map(|(i, x)| vec![i.to_string(), num(*x)]),
        )?;
        report.minimax = Some(MinimaxSummary {
            minimax_length: mm.minimax_length,
            geodesic_residual: mm.geodesic_residual,
            stages: mm.stage_max.len(),
            sweeps: mm.sweeps,
            degenerate: mm.degenerate,
        });
    }
    report.family = Some(FamilySummary {
        input_nodes: fam.len(),
        refined_nodes: res.nodes.len(),
        epsilon: res.tilde_f.epsilon,
        big_l,
        lambda: res.lambda.clone(),
        disjoint_bound: res.disjoint_bound,
        disjoint_ok: res.disjoint_ok,
        g0_matches: res.g0_matches,
        g1_matches: res.g1_matches,
        based: res.based,
        tilde_loops: res.tilde_f.len(),
        nodes: res.nodes,
        gaps: res.gaps,
    });
    Ok(())
}
