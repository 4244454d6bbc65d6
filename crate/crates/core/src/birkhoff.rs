//! Birkhoff curve shortening of based and free loops.
//!
//! Alternating odd/even sweeps replace a breakpoint by the geodesic midpoint
//! of its neighbours. A move is kept only if it strictly shortens the loop, so
//! every recorded length sequence is nonincreasing by construction. Breakpoints
//! are merged once their neighbours are close, which keeps the spacing
//! coarse enough for the process to converge in a reasonable number of
//! sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::curve::{LoopAt, PLCurve};
use crate::error::{GeoError, Result};
use crate::manifold::ManifoldModel;
use crate::point::{Coords, Point};

#[derive(Clone, Debug)]
pub struct BirkhoffConfig {
    /// Stop when a full (odd + even) sweep shortens by less than this.
    pub tol: f64,
    /// Maximal number of half sweeps.
    pub budget: usize,
    pub probes: usize,
    pub probe_size: f64,
    /// Record a stage once the accumulated displacement bound reaches this.
    pub stage_step: f64,
    /// Try smooth whole-loop perturbations to leave saddles (based loops).
    pub escape: bool,
    pub max_escapes: usize,
    pub escape_size: f64,
    pub seed: u64,
}

impl Default for BirkhoffConfig {
    fn default() -> Self {
        BirkhoffConfig {
            tol: 1e-6,
            budget: 100_000,
            probes: 50,
            probe_size: 1e-3,
            stage_step: 0.025,
            escape: true,
            max_escapes: 16,
            escape_size: 1e-2,
            seed: 0x5eed,
        }
    }
}

impl BirkhoffConfig {
    pub fn free() -> Self {
        BirkhoffConfig {
            escape: false,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct ShorteningTrace {
    /// Snapshots of the loop, first = input, last = limit.
    pub stages: Vec<Arc<PLCurve>>,
    /// Loop length after every half sweep (and every accepted escape).
    pub sweep_lengths: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub escapes: usize,
    /// Largest distance of a movable breakpoint from its neighbours' midpoint.
    pub residual: f64,
    /// Smallest change in length over the local-minimality probes.
    pub probe_min_delta: f64,
}

impl ShorteningTrace {
    pub fn limit(&self) -> &Arc<PLCurve> {
        self.stages.last().unwrap()
    }

    pub fn limit_loop(&self) -> LoopAt {
        LoopAt::new((**self.limit()).clone()).expect("limit is closed")
    }

    pub fn stage_lengths(&self) -> Vec<f64> {
        self.stages.iter().map(|c| c.length()).collect()
    }

    pub fn is_monotone(&self) -> bool {
        let ok = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        ok(&self.sweep_lengths) && ok(&self.stage_lengths())
    }
}

/// Working state: the loop as a closed breakpoint list plus segment lengths.
struct Work {
    m: Arc<ManifoldModel>,
    pts: Vec<Point>,
    seg: Vec<f64>,
    based: bool,
}

impl Work {
    fn new(c: &PLCurve, based: bool) -> Self {
        let m = c.model().clone();
        let pts = c.points().to_vec();
        let seg = pts.windows(2).map(|w| m.seg_len(&w[0], &w[1])).collect();
        Work { m, pts, seg, based }
    }

    fn length(&self) -> f64 {
        self.seg.iter().sum()
    }

    fn n(&self) -> usize {
        self.pts.len()
    }

    /// Movable indices with their cyclic neighbours. For free loops the
    /// closing breakpoint `n-1` duplicates `0` and is kept in sync.
    fn neighbours(&self, j: usize) -> (usize, usize) {
        let n = self.n();
        if self.based {
            (j - 1, j + 1)
        } else if j == 0 {
            (n - 2, 1)
        } else {
            (j - 1, j + 1)
        }
    }

    fn movable(&self) -> std::ops::Range<usize> {
        if self.based {
            1..self.n().saturating_sub(1)
        } else {
            0..self.n().saturating_sub(1)
        }
    }

    fn seg_before(&self, j: usize) -> usize {
        if j == 0 {
            self.n() - 2
        } else {
            j - 1
        }
    }

    fn set_point(&mut self, j: usize, p: Point) {
        let n = self.n();
        if !self.based && j == 0 {
            self.pts[n - 1] = p.clone();
        }
        self.pts[j] = p;
    }

    /// One half sweep over indices of the given parity. Returns the largest
    /// displacement of an accepted move.
    fn half_sweep(&mut self, parity: usize) -> f64 {
        let mut worst: f64 = 0.0;
        if self.n() < 3 {
            return 0.0;
        }
        for j in self.movable() {
            if j % 2 != parity {
                continue;
            }
            let (a, b) = self.neighbours(j);
            let (sa, sb) = (self.seg_before(j), j);
            let old = self.seg[sa] + self.seg[sb];
            if old <= 0.0 {
                continue;
            }
            let mid = self.m.midpoint(&self.pts[a], &self.pts[b]);
            let da = self.m.seg_len(&self.pts[a], &mid);
            let db = self.m.seg_len(&mid, &self.pts[b]);
            if da + db < old {
                worst = worst.max(self.m.seg_len(&self.pts[j], &mid));
                self.set_point(j, mid);
                self.seg[sa] = da;
                self.seg[sb] = db;
            }
        }
        worst
    }

    /// Removes breakpoints sitting between close neighbours. Cutting a corner
    /// inside a convex ball never lengthens the loop.
    fn coarsen(&mut self) -> f64 {
        let lim = 0.9 * self.m.margin;
        let half = 0.45 * self.m.margin;
        let mut moved: f64 = 0.0;
        let mut j = 1;
        while j + 1 < self.n() {
            let small = self.seg[j - 1] < half || self.seg[j] < half;
            if small && self.n() > 3 {
                let d = self.m.seg_len(&self.pts[j - 1], &self.pts[j + 1]);
                if d <= lim && d <= self.seg[j - 1] + self.seg[j] {
                    moved = moved.max(self.seg[j - 1].min(self.seg[j]));
                    self.pts.remove(j);
                    self.seg.remove(j);
                    self.seg[j - 1] = d;
                    j += 1;
                    continue;
                }
            }
            j += 1;
        }
        moved
    }

    fn collapse_if_tiny(&mut self) -> bool {
        let len = self.length();
        if self.n() > 1 && len < 1e-12 {
            let p = self.pts[0].clone();
            self.pts = vec![p];
            self.seg.clear();
            return true;
        }
        if self.based && self.n() == 3 && self.pts[1] == self.pts[0] {
            let p = self.pts[0].clone();
            self.pts = vec![p];
            self.seg.clear();
            return true;
        }
        false
    }

    fn snapshot(&self) -> Arc<PLCurve> {
        let mut cum = Vec::with_capacity(self.n());
        cum.push(0.0);
        for s in &self.seg {
            cum.push(cum.last().unwrap() + s);
        }
        Arc::new(PLCurve::from_parts(self.m.clone(), self.pts.clone(), cum))
    }

    fn residual(&self) -> f64 {
        if self.n() < 3 {
            return 0.0;
        }
        self.movable()
            .map(|j| {
                let (a, b) = self.neighbours(j);
                let mid = self.m.midpoint(&self.pts[a], &self.pts[b]);
                self.m.seg_len(&self.pts[j], &mid)
            })
            .fold(0.0, f64::max)
    }

    /// Single-breakpoint perturbation probe. Returns the smallest length
    /// change found and, if some perturbation shortens the loop by more than
    /// `1e-9`, applies the best one.
    fn probe(&mut self, cfg: &BirkhoffConfig, rng: &mut ChaCha8Rng) -> (f64, bool) {
        let movable: Vec<usize> = self.movable().collect();
        if movable.is_empty() {
            return (0.0, false);
        }
        let mut best = (f64::INFINITY, usize::MAX, None::<Point>);
        for _ in 0..cfg.probes {
            let j = movable[rng.gen_range(0..movable.len())];
            let v = self.m.random_unit_tangent(&self.pts[j], rng);
            let step: Coords = v.iter().map(|c| c * cfg.probe_size).collect();
            let x = self.m.perturb(&self.pts[j], &step);
            let (a, b) = self.neighbours(j);
            let delta = self.m.seg_len(&self.pts[a], &x) + self.m.seg_len(&x, &self.pts[b])
                - self.seg[self.seg_before(j)]
                - self.seg[j];
            if delta < best.0 {
                best = (delta, j, Some(x));
            }
        }
        let (delta, j, x) = best;
        if delta < -1e-9 {
            let x = x.unwrap();
            let (a, b) = self.neighbours(j);
            let (sa, sb) = (self.seg_before(j), j);
            self.seg[sa] = self.m.seg_len(&self.pts[a], &x);
            self.seg[sb] = self.m.seg_len(&x, &self.pts[b]);
            self.set_point(j, x);
            return (delta, true);
        }
        (delta, false)
    }

    /// Smooth whole-loop perturbations `ε sin(πks/L)·P_T(d)` for ambient
    /// axes `d` and `k = 1, 2`; these see index-one saddles (e.g. a great
    /// circle through the basepoint) that single-point probes cannot.
    fn escape(&mut self, cfg: &BirkhoffConfig) -> Option<f64> {
        if self.n() < 4 {
            return None;
        }
        let len = self.length();
        let dim = self.pts[0].dim();
        let mut cum = vec![0.0];
        for s in &self.seg {
            cum.push(cum.last().unwrap() + s);
        }
        let mut best: Option<(f64, Vec<Point>, Vec<f64>)> = None;
        for axis in 0..dim {
            for k in [1.0, 2.0] {
                for sign in [1.0, -1.0] {
                    let mut pts = self.pts.clone();
                    for j in self.movable() {
                        let mut d: Coords = smallvec::smallvec![0.0; dim];
                        d[axis] = sign * cfg.escape_size * (PI * k * cum[j] / len).sin();
                        let v = self.m.to_tangent(&self.pts[j], &d);
                        pts[j] = self.m.perturb(&self.pts[j], &v);
                    }
                    if !self.based {
                        let n = pts.len();
                        pts[n - 1] = pts[0].clone();
                    }
                    let seg: Vec<f64> = pts.windows(2).map(|w| self.m.seg_len(&w[0], &w[1])).collect();
                    if seg.iter().any(|s| *s > self.m.margin) {
                        continue;
                    }
                    let l: f64 = seg.iter().sum();
                    if l < len - 1e-9 && best.as_ref().is_none_or(|b| l < b.0) {
                        best = Some((l, pts, seg));
                    }
                }
            }
        }
        best.map(|(l, pts, seg)| {
            self.pts = pts;
            self.seg = seg;
            l
        })
    }
}

fn run(input: &PLCurve, based: bool, cfg: &BirkhoffConfig) -> Result<ShorteningTrace> {
    let mut w = Work::new(input, based);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stages = vec![Arc::new(input.clone())];
    let mut sweep_lengths = vec![input.length()];
    let mut iterations = 0;
    let mut escapes = 0;
    let mut since_stage = 0.0;
    let mut converged = false;
    let mut probe_min_delta = 0.0;
    if input.is_constant() {
        return Ok(ShorteningTrace {
            stages,
            sweep_lengths,
            converged: true,
            iterations: 0,
            escapes: 0,
            residual: 0.0,
            probe_min_delta: 0.0,
        });
    }
    let record = |w: &Work, since: &mut f64, stages: &mut Vec<Arc<PLCurve>>, force: bool| {
        if force || *since >= cfg.stage_step {
            stages.push(w.snapshot());
            *since = 0.0;
        }
    };
    'outer: loop {
        let before = w.length();
        for parity in [1usize, 0] {
            let mv = w.half_sweep(parity);
            iterations += 1;
            since_stage += mv;
            sweep_lengths.push(w.length());
            record(&w, &mut since_stage, &mut stages, false);
        }
        since_stage += w.coarsen();
        if w.collapse_if_tiny() {
            sweep_lengths.push(0.0);
            converged = true;
            break;
        }
        *sweep_lengths.last_mut().unwrap() = w.length();
        let after = w.length();
        if before - after < cfg.tol {
            // converged by the sweep criterion; now check local minimality
            let (d, moved) = w.probe(cfg, &mut rng);
            probe_min_delta = d;
            if moved {
                since_stage += cfg.probe_size;
                sweep_lengths.push(w.length());
                continue;
            }
            if cfg.escape && escapes < cfg.max_escapes {
                if let Some(l) = w.escape(cfg) {
                    escapes += 1;
                    since_stage += cfg.escape_size;
                    sweep_lengths.push(l);
                    record(&w, &mut since_stage, &mut stages, true);
                    continue 'outer;
                }
            }
            converged = true;
            break;
        }
        if iterations >= cfg.budget {
            break;
        }
    }
    if !Arc::ptr_eq(stages.last().unwrap(), &stages[0]) || stages.len() == 1 {
        let last = w.snapshot();
        if stages.len() == 1 || stages.last().unwrap().points() != last.points() {
            stages.push(last);
        }
    }
    let residual = w.residual();
    let trace = ShorteningTrace {
        stages,
        sweep_lengths,
        converged,
        iterations,
        escapes,
        residual,
        probe_min_delta,
    };
    if !converged {
        return Err(GeoError::IterationBudgetExceeded {
            budget: cfg.budget,
            trace: Box::new(trace),
        });
    }
    Ok(trace)
}

/// Shortens a loop with its basepoint held fixed.
pub fn shorten_based_loop(l: &LoopAt, cfg: &BirkhoffConfig) -> Result<ShorteningTrace> {
    run(&l.curve, true, cfg)
}

/// Shortens a closed curve with every breakpoint free to move.
pub fn shorten_free_loop(c: &PLCurve, cfg: &BirkhoffConfig) -> Result<ShorteningTrace> {
    if !c.is_closed() {
        return Err(GeoError::EndpointMismatch {
            gap: crate::point::dist_euclid(c.start(), c.end()),
        });
    }
    run(c, false, cfg)
}

/// Runs `sweeps` full free-loop sweeps (with coarsening) and returns the new
/// curve. Used by the minimax driver, which interleaves many loops.
pub fn free_sweeps(c: &PLCurve, sweeps: usize) -> PLCurve {
    if c.is_constant() || c.n_points() < 3 {
        return c.clone();
    }
    let mut w = Work::new(c, false);
    for _ in 0..sweeps {
        w.half_sweep(1);
        w.half_sweep(0);
        w.coarsen_free();
        if w.collapse_if_tiny() {
            break;
        }
    }
    (*w.snapshot()).clone()
}

/// Largest distance of a breakpoint from the geodesic midpoint of its
/// neighbours, cyclically for closed curves.
pub fn geodesic_residual(c: &PLCurve, closed: bool) -> f64 {
    if c.n_points() < 3 {
        return 0.0;
    }
    Work::new(c, !closed).residual()
}

/// Largest excess `d(a,x) + d(x,b) - d(a,b)` over breakpoints `x` with
/// neighbours `a, b`: zero exactly for discrete geodesics.
pub fn geodesic_excess(c: &PLCurve, closed: bool) -> f64 {
    if c.n_points() < 3 {
        return 0.0;
    }
    let w = Work::new(c, !closed);
    w.movable()
        .map(|j| {
            let (a, b) = w.neighbours(j);
            w.seg[w.seg_before(j)] + w.seg[j] - w.m.seg_len(&w.pts[a], &w.pts[b])
        })
        .fold(0.0, f64::max)
}

impl Work {
    /// Coarsening for free loops also handles the seam at index 0.
    fn coarsen_free(&mut self) {
        self.coarsen();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ManifoldModel;
    use approx::assert_abs_diff_eq;

    fn small_loop(m: &Arc<ManifoldModel>, radius: f64) -> PLCurve {
        // circle of geodesic radius `radius` through the north pole
        let n = 40;
        let c = [radius.sin(), 0.0, radius.cos()];
        let pts: Vec<Point> = (0..=n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64 + PI;
                let x = [
                    c[0] + radius.sin() * t.cos() * radius.cos(),
                    radius.sin() * t.sin(),
                    c[2] - radius.sin() * t.cos() * radius.sin(),
                ];
                m.project(&x)
            })
            .collect();
        let mut pts = pts;
        let n = pts.len();
        pts[n - 1] = pts[0].clone();
        PLCurve::new(m.clone(), pts).unwrap()
    }

    #[test]
    fn short_loop_contracts_to_basepoint() {
        let m = ManifoldModel::unit_sphere().shared();
        let c = small_loop(&m, 0.05);
        assert!(c.length() > 0.2 && c.length() < 0.4);
        let t = shorten_based_loop(&LoopAt::new(c.clone()).unwrap(), &BirkhoffConfig::default())
            .unwrap();
        assert!(t.limit().is_constant());
        assert_eq!(t.limit().start(), c.start());
        assert!(t.is_monotone());
    }

    #[test]
    fn constant_loop_is_fixed() {
        let m = ManifoldModel::unit_sphere().shared();
        let c = PLCurve::constant(m, Point::new(&[0., 0., 1.]));
        let t = shorten_based_loop(&LoopAt::new(c).unwrap(), &BirkhoffConfig::default()).unwrap();
        assert_eq!(t.iterations, 0);
        assert!(t.limit().is_constant());
    }

    #[test]
    fn great_circle_is_a_free_fixed_point() {
        let m = ManifoldModel::unit_sphere().shared();
        let pts: Vec<Point> = (0..=64)
            .map(|k| {
                let t = 2.0 * PI * (k % 64) as f64 / 64.0;
                Point::new(&[t.cos(), t.sin(), 0.0])
            })
            .collect();
        let c = PLCurve::new(m, pts).unwrap();
        let t = shorten_free_loop(&c, &BirkhoffConfig::free()).unwrap();
        assert_abs_diff_eq!(t.limit().length(), 2.0 * PI, epsilon = 1e-4);
    }

    #[test]
    fn based_great_circle_escapes_the_saddle() {
        let m = ManifoldModel::unit_sphere().shared();
        // great circle through the basepoint (0,0,1)
        let pts: Vec<Point> = (0..=64)
            .map(|k| {
                let t = 2.0 * PI * (k % 64) as f64 / 64.0;
                Point::new(&[t.sin(), 0.0, t.cos()])
            })
            .collect();
        let c = PLCurve::new(m, pts).unwrap();
        let t = shorten_based_loop(&LoopAt::new(c).unwrap(), &BirkhoffConfig::default()).unwrap();
        assert!(t.escapes >= 1);
        assert!(t.limit().length() < 1e-6);
        assert!(t.is_monotone());
    }

    #[test]
    fn torus_based_loop_reaches_systole() {
        let m = ManifoldModel::flat_torus(&[1.0, 1.0]).unwrap().shared();
        let cover: Vec<Vec<f64>> = (0..=10)
            .map(|k| {
                let x = 0.1 + k as f64 / 10.0;
                let y = 0.2 + if k % 2 == 1 { 0.11 } else { 0.0 };
                vec![x, y]
            })
            .collect();
        let c = PLCurve::from_cover_polyline(m, &cover).unwrap();
        assert!(c.is_closed());
        let t = shorten_based_loop(&LoopAt::new(c).unwrap(), &BirkhoffConfig::default()).unwrap();
        assert_abs_diff_eq!(t.limit().length(), 1.0, epsilon = 1e-4);
        assert!(t.probe_min_delta >= -1e-6);
    }
}
