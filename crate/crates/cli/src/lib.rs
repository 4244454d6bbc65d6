//! Driver behind the `geoloop` binary: scene runner, report verifier, bound
//! tables and family traces.

pub mod canon;
pub mod run;
pub mod scene;
pub mod verify;

use anyhow::Context;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use geoloop_core::theorem_a::{build_family, Span};
use geoloop_core::{bound_formula, loop_count_bound, BirkhoffConfig, CountKind, Remeasurer};

use crate::scene::{Input, Scene};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VIOLATED: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;
/// A run finished but some certificate failed.
pub const EXIT_CERT_FAILED: i32 = 4;

/// Caps the rayon pool at `GEOLOOP_THREADS` when set.
pub fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("GEOLOOP_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("GEOLOOP_THREADS={v:?}"))?;
        anyhow::ensure!(n >= 1, "GEOLOOP_THREADS must be at least 1");
        // a second initialisation (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// `bound_formula` for `m = 1..=m_max` and the loop-count bounds for small
/// `n, k`, as CSV.
pub fn formula_table(k: f64, m_max: u32, a: f64, w: &mut dyn Write) -> anyhow::Result<()> {
    anyhow::ensure!(k > 0.0 && a > 0.0 && m_max >= 1, "need k > 0, m >= 1, a > 0");
    writeln!(w, "table,k,m,a,value,value_over_pi")?;
    for m in 1..=m_max {
        let v = bound_formula(k, m, a);
        writeln!(w, "general_bound,{k},{m},{a},{v},{}", v / PI)?;
    }
    writeln!(w, "table,n,k,kind,value,value_over_pi")?;
    for n in 2..=4u32 {
        for kk in 1..=3u32 {
            for (kind, name) in [(CountKind::Loops, "loops"), (CountKind::Paths, "paths")] {
                let v = loop_count_bound(n, kk, kind);
                writeln!(w, "loop_count,{n},{kk},{name},{v},{}", v / PI)?;
            }
        }
    }
    Ok(())
}

/// Dumps the shortening family of a curve scene (or of node `node` of a
/// family scene) frame by frame.
pub fn trace(scene_path: &Path, node: usize, out: &Path) -> anyhow::Result<usize> {
    let scene = Scene::load(scene_path)?;
    let m = scene.model()?;
    let pr = scene.shortening_params()?;
    let cfg = BirkhoffConfig {
        seed: scene.seed,
        ..BirkhoffConfig::default()
    };
    let (alpha, closed) = match scene.build_input(&m)? {
        Input::Curve(c) => (c, false),
        Input::Family(f) => {
            let c = f.loops.get(node).with_context(|| format!("family has {} nodes", f.len()))?;
            (Arc::clone(c), true)
        }
    };
    let fam = build_family(&alpha, &pr, closed, &cfg)?;
    let smp = fam.sample();
    let mut span_of = vec![0usize; smp.frames.len()];
    for j in 0..fam.spans.len() {
        for x in span_of.iter_mut().take(smp.q_index[j + 1] + 1).skip(smp.q_index[j]) {
            *x = j;
        }
    }
    let mut r = Remeasurer::new();
    let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    w.write_record(["index", "s", "tau", "span", "kind", "length", "with_tail"])?;
    for (i, f) in smp.frames.iter().enumerate() {
        let kind = match fam.spans[span_of[i]] {
            Span::Moving { .. } => "moving",
            Span::Frozen { .. } => "frozen",
        };
        let len = r.frame_len(f);
        let full = r.frame_len(&fam.with_tail(f, smp.tau[i]));
        w.write_record([
            i.to_string(),
            canon::round_sig(smp.s[i]).to_string(),
            canon::round_sig(smp.tau[i]).to_string(),
            span_of[i].to_string(),
            kind.to_string(),
            canon::round_sig(len).to_string(),
            canon::round_sig(full).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(smp.frames.len())
}
