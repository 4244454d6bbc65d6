//! Minimax over a loop family, and the headline bound evaluators.
//!
//! All loops are shortened simultaneously by free (basepoint-released)
//! Birkhoff sweeps; the stage value is the longest loop of the family. A loop
//! is only advanced when it could be the longest: loops sit in a max-heap
//! keyed by the length they had when last advanced, which is an upper bound
//! for their current length since sweeps never lengthen a curve.

use serde::Serialize;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::birkhoff::{free_sweeps, geodesic_residual, ShorteningTrace};
use crate::certificate::{params, BoundCertificate, FormulaId, SlackPolicy};
use crate::curve::PLCurve;
use crate::error::{GeoError, Result};
use crate::theorem_b::LoopFamily;

#[derive(Clone, Debug, Serialize)]
pub struct MinimaxConfig {
    /// `q` in the bound `8πq`.
    pub m: f64,
    pub a: f64,
    pub slack: SlackPolicy,
    /// Stagnation: relative decrease below `rel_tol` over `window` stages.
    pub rel_tol: f64,
    pub window: usize,
    /// Early stop once the leading loop is this close to a geodesic and the
    /// max has stopped moving at the `1e-5` level over 10 stages.
    pub residual_target: f64,
    pub budget: usize,
}

impl Default for MinimaxConfig {
    fn default() -> Self {
        MinimaxConfig {
            m: 1.0,
            a: PI,
            slack: SlackPolicy::default(),
            rel_tol: 1e-6,
            window: 100,
            residual_target: 2.5e-4,
            budget: 100_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MinimaxResult {
    pub critical_loop: Arc<PLCurve>,
    pub minimax_length: f64,
    pub geodesic_residual: f64,
    pub bound: BoundCertificate,
    /// Longest loop after each stage; nonincreasing.
    pub stage_max: Vec<f64>,
    /// The family collapsed to constants.
    pub degenerate: bool,
    /// Total sweeps applied over all loops.
    pub sweeps: usize,
}

struct Entry {
    len: f64,
    stage: usize,
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        // longest first; ties go to the lower index
        self.len
            .total_cmp(&o.len)
            .then_with(|| o.idx.cmp(&self.idx))
    }
}

pub fn minimax_geodesic(family: &LoopFamily) -> Result<MinimaxResult> {
    minimax_geodesic_with(family, &MinimaxConfig::default())
}

pub fn minimax_geodesic_with(family: &LoopFamily, cfg: &MinimaxConfig) -> Result<MinimaxResult> {
    let mut loops: Vec<PLCurve> = family.loops.iter().map(|c| (**c).clone()).collect();
    let mut heap: BinaryHeap<Entry> = loops
        .iter()
        .enumerate()
        .map(|(idx, c)| Entry {
            len: c.length(),
            stage: 0,
            idx,
        })
        .collect();
    let mut stage_max = Vec::new();
    let mut sweeps = 0usize;
    let mut stage = 0usize;
    let top = loop {
        // exact max at this stage
        let top = loop {
            let e = heap.pop().unwrap();
            if e.stage == stage {
                break e;
            }
            let c = free_sweeps(&loops[e.idx], stage - e.stage);
            sweeps += stage - e.stage;
            let len = c.length();
            loops[e.idx] = c;
            heap.push(Entry { len, stage, idx: e.idx });
        };
        let mx = top.len;
        let idx = top.idx;
        heap.push(top);
        stage_max.push(mx);
        if mx == 0.0 {
            break idx;
        }
        let w = cfg.window;
        if stage >= w && (stage_max[stage - w] - mx) <= cfg.rel_tol * mx {
            break idx;
        }
        if stage >= 10
            && stage.is_multiple_of(10)
            && (stage_max[stage - 10] - mx) <= 1e-5 * mx
            && geodesic_residual(&loops[idx], true) <= cfg.residual_target
        {
            break idx;
        }
        if stage >= cfg.budget {
            let c = Arc::new(loops[idx].clone());
            return Err(GeoError::IterationBudgetExceeded {
                budget: cfg.budget,
                trace: Box::new(ShorteningTrace {
                    stages: vec![c],
                    sweep_lengths: stage_max,
                    converged: false,
                    iterations: sweeps,
                    escapes: 0,
                    residual: f64::NAN,
                    probe_min_delta: f64::NAN,
                }),
            });
        }
        stage += 1;
    };
    // the plateau loop is near a geodesic; a few more sweeps on it alone
    // tighten the residual without touching the stage values
    let mut c = loops[top].clone();
    let mut polish = 0;
    while polish < cfg.window * 10 && geodesic_residual(&c, true) > cfg.residual_target {
        c = free_sweeps(&c, 10);
        polish += 10;
    }
    sweeps += polish;
    let critical = Arc::new(c);
    let minimax_length = critical.remeasure();
    let residual = geodesic_residual(&critical, true);
    let slack = cfg.slack.slack(cfg.a, 0.0, 0.0);
    let bound = BoundCertificate::new(FormulaId::EightPiM, params(&[("m", cfg.m)]), minimax_length, slack)?;
    Ok(MinimaxResult {
        degenerate: minimax_length == 0.0,
        critical_loop: critical,
        minimax_length,
        geodesic_residual: residual,
        bound,
        stage_max,
        sweeps,
    })
}

/// `((4k+2)m + (2k-3))·a`.
pub fn bound_formula(k: f64, m: u32, a: f64) -> f64 {
    ((4.0 * k + 2.0) * m as f64 + (2.0 * k - 3.0)) * a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountKind {
    Loops,
    Paths,
}

/// `16π(n-1)k` for loops, `π(16k(n-1)+1)` for paths; the integer factor is
/// formed first so the result is one rounding away from exact.
pub fn loop_count_bound(n: u32, k: u32, kind: CountKind) -> f64 {
    let base = 16 * u64::from(n - 1) * u64::from(k);
    match kind {
        CountKind::Loops => base as f64 * PI,
        CountKind::Paths => (base + 1) as f64 * PI,
    }
}
