//! Shortening a one-parameter family of based loops.
//!
//! Every node loop `α_i` is shortened to a loop `β_i` of length at most `l`
//! by the cut-and-close engine. Adjacent nodes are then synchronised on the
//! proportional position `u = τ / L_i`: both families move together, and
//! whenever one of them replaces its head (a frozen span) the other waits.
//! Because frozen spans of neighbours never coincide, at every moment one of
//! the two curves is a moving curve of length at most `l + a + δ`. Joining the
//! two synchronised curves by the vertical track between their end points
//! contracts `β_i * β̄_{i+1}`; the path lemma turns that contraction into a
//! path of short loops from `β_i` to `β_{i+1}`.
//!
//! The deformation `G` from the input family to the shortened one is built at
//! a grid of synchronised positions `λ`: for each, the gap family runs from
//! the partial shortening of `α_i` to that of `α_{i+1}`.

use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

use crate::birkhoff::BirkhoffConfig;
use crate::certificate::{params, BoundCertificate, FormulaId};
use crate::curve::PLCurve;
use crate::error::{GeoError, Result};
use crate::frame::{frame_gap, Frame, Remeasurer, Slice};
use crate::homotopy::{lemma_path_homotopy, LengthHomotopy};
use crate::manifold::ManifoldModel;
use crate::point::Point;
use crate::theorem_a::{build_family, ShorteningFamily, ShorteningParams, Span};

pub type LoopGenerator = Arc<dyn Fn(f64) -> Result<PLCurve> + Send + Sync>;

/// Node loops `f(t_i)` of a family `t -> f(t)` of loops based at one point.
/// Between nodes the family is the pointwise geodesic interpolation at equal
/// proportional arclength (the *transit*).
#[derive(Clone)]
pub struct LoopFamily {
    pub nodes: Vec<f64>,
    pub loops: Vec<Arc<PLCurve>>,
    /// The last node connects back to the first.
    pub circle: bool,
    /// Bound on vertical track lengths.
    pub epsilon: f64,
    pub generator: Option<LoopGenerator>,
}

impl fmt::Debug for LoopFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LoopFamily")
            .field("nodes", &self.nodes.len())
            .field("circle", &self.circle)
            .field("epsilon", &self.epsilon)
            .finish()
    }
}

impl LoopFamily {
    pub fn new(nodes: Vec<f64>, loops: Vec<Arc<PLCurve>>, circle: bool, epsilon: f64) -> Result<Self> {
        if loops.is_empty() || nodes.len() != loops.len() {
            return Err(GeoError::Config("one node parameter per loop".into()));
        }
        if !(epsilon > 0.0) {
            return Err(GeoError::Config("epsilon must be positive".into()));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(GeoError::Config("node parameters must increase".into()));
        }
        let p = loops[0].start().clone();
        for c in &loops {
            if !c.is_closed() || c.start() != &p {
                return Err(GeoError::Config("every node must be a loop at the common basepoint".into()));
            }
        }
        Ok(LoopFamily {
            nodes,
            loops,
            circle,
            epsilon,
            generator: None,
        })
    }

    pub fn with_generator(mut self, g: LoopGenerator) -> Self {
        self.generator = Some(g);
        self
    }

    pub fn model(&self) -> &Arc<ManifoldModel> {
        self.loops[0].model()
    }

    pub fn basepoint(&self) -> &Point {
        self.loops[0].start()
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    pub fn gap_count(&self) -> usize {
        if self.circle {
            self.len()
        } else {
            self.len() - 1
        }
    }

    pub fn gap(&self, i: usize) -> (usize, usize) {
        (i, (i + 1) % self.len())
    }

    pub fn max_length(&self) -> f64 {
        self.loops.iter().map(|c| c.length()).fold(0.0, f64::max)
    }

    /// Longest vertical track across gap `i`, sampled at proportional
    /// positions (every breakpoint of either loop plus a uniform grid).
    pub fn vertical_max(&self, i: usize) -> f64 {
        let (a, b) = self.gap(i);
        let (ca, cb) = (&self.loops[a], &self.loops[b]);
        let m = self.model();
        proportional_grid(ca, cb, m.margin / 8.0)
            .into_iter()
            .map(|u| m.seg_len(&ca.point_at(u * ca.length()), &cb.point_at(u * cb.length())))
            .fold(0.0, f64::max)
    }

    /// The transit loop at fraction `w` across gap `i`.
    pub fn transit(&self, i: usize, w: f64) -> Result<PLCurve> {
        let (a, b) = self.gap(i);
        transit_loop(&self.loops[a], &self.loops[b], w)
    }

    /// Inserts nodes until every vertical track is at most `epsilon`.
    pub fn refine_to_epsilon(&self, max_rounds: usize) -> Result<LoopFamily> {
        let mut fam = self.clone();
        for _ in 0..max_rounds {
            let tracks: Vec<f64> = (0..fam.gap_count()).map(|i| fam.vertical_max(i)).collect();
            if tracks.iter().all(|&v| v <= fam.epsilon) {
                return Ok(fam);
            }
            let mut nodes = Vec::new();
            let mut loops = Vec::new();
            for i in 0..fam.len() {
                nodes.push(fam.nodes[i]);
                loops.push(fam.loops[i].clone());
                if i >= fam.gap_count() {
                    continue;
                }
                let k = (tracks[i] / fam.epsilon).ceil() as usize;
                let t0 = fam.nodes[i];
                let t1 = if i + 1 < fam.len() { fam.nodes[i + 1] } else { fam.nodes[0] + 1.0 };
                for j in 1..k {
                    let w = j as f64 / k as f64;
                    let t = t0 + (t1 - t0) * w;
                    let c = match &fam.generator {
                        Some(g) => g(t)?,
                        None => fam.transit(i, w)?,
                    };
                    nodes.push(t);
                    loops.push(Arc::new(c));
                }
            }
            fam = LoopFamily {
                nodes,
                loops,
                circle: fam.circle,
                epsilon: fam.epsilon,
                generator: fam.generator.clone(),
            };
        }
        Err(GeoError::Config(format!(
            "vertical tracks still above epsilon after {max_rounds} refinement rounds"
        )))
    }
}

fn proportional_grid(a: &PLCurve, b: &PLCurve, step: f64) -> Vec<f64> {
    let big = a.length().max(b.length());
    let n = (big / step).ceil().max(1.0) as usize;
    let mut us: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    for c in [a, b] {
        let l = c.length();
        if l > 0.0 {
            us.extend(c.cum().iter().map(|s| s / l));
        }
    }
    us.sort_by(f64::total_cmp);
    us.dedup();
    us
}

/// Pointwise geodesic interpolation of two loops at equal proportional
/// arclength.
pub fn transit_loop(a: &PLCurve, b: &PLCurve, w: f64) -> Result<PLCurve> {
    let m = a.model().clone();
    let us = proportional_grid(a, b, m.margin / 4.0);
    let (la, lb) = (a.length(), b.length());
    let mut pts: Vec<Point> = us
        .iter()
        .map(|u| m.interpolate(&a.point_at(u * la), &b.point_at(u * lb), w))
        .collect();
    *pts.first_mut().unwrap() = a.start().clone();
    *pts.last_mut().unwrap() = a.end().clone();
    PLCurve::from_points_refined(m, pts)
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyConfig {
    /// Number of `λ` steps in the deformation grid.
    pub lambda_steps: usize,
    /// Stored loops of the shortened family per gap.
    pub tilde_samples: usize,
    /// Jitter unit as a fraction of `a`.
    pub jitter: f64,
    pub max_jitter: usize,
    #[serde(skip)]
    pub birkhoff: BirkhoffConfig,
    pub max_refine_rounds: usize,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            lambda_steps: 8,
            tilde_samples: 16,
            jitter: 1e-7,
            max_jitter: 16,
            birkhoff: BirkhoffConfig::default(),
            max_refine_rounds: 4,
        }
    }
}

#[derive(Clone, Debug)]
enum Item {
    Moving {
        prefix: Arc<PLCurve>,
        from: f64,
        lo: f64,
        hi: f64,
    },
    Frozen {
        tau: f64,
        frames: Vec<Frame>,
    },
}

/// A node family laid out on its own arclength axis, with interior frozen
/// spans delayed by the node's jitter.
#[derive(Clone, Debug)]
pub struct Timeline {
    alpha: Arc<PLCurve>,
    len: f64,
    items: Vec<Item>,
    beta: Arc<PLCurve>,
    pub jitter: usize,
}

impl Timeline {
    pub fn new(fam: &ShorteningFamily, eta: f64, c: usize) -> Result<Timeline> {
        if !fam.closed {
            return Err(GeoError::SyncFailed("node family was not run as a loop".into()));
        }
        let alpha = fam.alpha.clone();
        let len = alpha.length();
        let shift = eta * c as f64;
        let mut items: Vec<Item> = Vec::new();
        let mut lo_next = 0.0;
        for sp in &fam.spans {
            match sp {
                Span::Moving { prefix, from, to } => items.push(Item::Moving {
                    prefix: prefix.clone(),
                    from: *from,
                    lo: lo_next,
                    hi: *to,
                }),
                Span::Frozen { tau, frames } => {
                    let t2 = if *tau >= len { *tau } else { *tau + shift };
                    if let Some(Item::Moving { lo, hi, .. }) = items.last_mut() {
                        if t2 >= len && *tau < len || (*lo > t2) {
                            return Err(GeoError::SyncFailed("jitter overruns a moving span".into()));
                        }
                        *hi = t2;
                    }
                    let frames = frames
                        .iter()
                        .map(|f| f.clone().then(Slice::new(&alpha, *tau, t2)))
                        .collect();
                    items.push(Item::Frozen { tau: t2, frames });
                    lo_next = t2;
                }
            }
        }
        for it in &items {
            if let Item::Moving { lo, hi, .. } = it {
                if lo > hi {
                    return Err(GeoError::SyncFailed("jitter overruns a moving span".into()));
                }
            }
        }
        Ok(Timeline {
            alpha,
            len,
            items,
            beta: fam.final_curve.clone(),
            jitter: c,
        })
    }

    /// Proportional positions of the interior frozen spans.
    pub fn frozen_positions(&self) -> Vec<f64> {
        self.items
            .iter()
            .filter_map(|it| match it {
                Item::Frozen { tau, .. } if *tau < self.len => Some(tau / self.len),
                _ => None,
            })
            .collect()
    }

    fn moving_frame(&self, idx: usize, tau: f64) -> Frame {
        match &self.items[idx] {
            Item::Moving { prefix, from, .. } => Frame::of(prefix).then(Slice::new(&self.alpha, *from, tau)),
            Item::Frozen { .. } => unreachable!("moving frame of a frozen span"),
        }
    }

    pub fn beta(&self) -> &Arc<PLCurve> {
        &self.beta
    }

    pub fn alpha(&self) -> &Arc<PLCurve> {
        &self.alpha
    }
}

fn separated(a: &[f64], b: &[f64]) -> bool {
    a.iter().all(|x| b.iter().all(|y| (x - y).abs() > 1e-12))
}

/// Smallest jitter multiple that separates the node's interior frozen
/// positions from those of every neighbour.
pub fn choose_jitter(fam: &ShorteningFamily, neighbours: &[&Timeline], eta: f64, max: usize) -> Result<Timeline> {
    for c in 0..=max {
        let tl = match Timeline::new(fam, eta, c) {
            Ok(t) => t,
            Err(_) => continue,
        };
        let us = tl.frozen_positions();
        if neighbours.iter().all(|n| separated(&us, &n.frozen_positions())) {
            return Ok(tl);
        }
    }
    Err(GeoError::SyncFailed(format!(
        "no jitter up to {max} separates the partitions"
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StairKind {
    Moving,
    FrozenLeft,
    FrozenRight,
}

#[derive(Clone, Debug)]
pub struct StairEntry {
    pub kind: StairKind,
    pub u: f64,
    pub left: Frame,
    pub right: Frame,
    pub tau_left: f64,
    pub tau_right: f64,
    pub vertical: Arc<PLCurve>,
}

impl StairEntry {
    /// `left * vertical * right̄`, a loop at the basepoint.
    pub fn contraction_frame(&self) -> Frame {
        self.left
            .clone()
            .then(Slice::full(&self.vertical))
            .then_frame(&self.right.reversed())
    }
}

/// A common parametrisation of two adjacent node families.
#[derive(Clone, Debug)]
pub struct Staircase {
    pub entries: Vec<StairEntry>,
    /// `(λ, entry index)`; `λ < 1` sit on moving entries at `u = λ`, and
    /// `λ = 1` is the last entry.
    pub lambda: Vec<(f64, usize)>,
    pub left_len: f64,
    pub right_len: f64,
}

struct Side<'a> {
    tl: &'a Timeline,
    idx: usize,
    frame: Frame,
    tau: f64,
}

impl<'a> Side<'a> {
    fn new(tl: &'a Timeline) -> Self {
        let frame = tl.moving_frame(0, 0.0);
        Side {
            tl,
            idx: 0,
            frame,
            tau: 0.0,
        }
    }
    fn item(&self) -> Option<&'a Item> {
        self.tl.items.get(self.idx)
    }
}

/// Synchronises two node timelines. `step` is the moving-sample spacing in
/// arclength of the longer loop.
pub fn synchronize(left: &Timeline, right: &Timeline, lambda_steps: usize, step: f64) -> Result<Staircase> {
    let m = left.alpha.model().clone();
    let (la, lb) = (left.len, right.len);
    let big = la.max(lb);
    let mut a = Side::new(left);
    let mut b = Side::new(right);
    let mut entries: Vec<StairEntry> = Vec::new();
    let mut vcache: Option<(Point, Point, Arc<PLCurve>)> = None;
    let mut push = |kind, u, a: &Side, b: &Side, entries: &mut Vec<StairEntry>| -> Result<()> {
        let (pe, qe) = (a.frame.end(), b.frame.end());
        let v = match &vcache {
            Some((x, y, v)) if *x == pe && *y == qe => v.clone(),
            _ => {
                let v = Arc::new(m.minimal_geodesic(&pe, &qe)?);
                vcache = Some((pe, qe, v.clone()));
                v
            }
        };
        entries.push(StairEntry {
            kind,
            u,
            left: a.frame.clone(),
            right: b.frame.clone(),
            tau_left: a.tau,
            tau_right: b.tau,
            vertical: v,
        });
        Ok(())
    };
    push(StairKind::Moving, 0.0, &a, &b, &mut entries)?;
    let lams: Vec<f64> = (1..lambda_steps.max(1))
        .map(|j| j as f64 / lambda_steps as f64)
        .collect();
    let mut lambda = vec![(0.0, 0)];
    let mut u = 0.0;
    loop {
        match (a.item(), b.item()) {
            (None, None) => break,
            (Some(Item::Frozen { frames, tau }), _) => {
                for f in frames.iter().skip(1) {
                    a.frame = f.clone();
                    a.tau = *tau;
                    push(StairKind::FrozenLeft, u, &a, &b, &mut entries)?;
                }
                a.idx += 1;
            }
            (_, Some(Item::Frozen { frames, tau })) => {
                for f in frames.iter().skip(1) {
                    b.frame = f.clone();
                    b.tau = *tau;
                    push(StairKind::FrozenRight, u, &a, &b, &mut entries)?;
                }
                b.idx += 1;
            }
            (Some(Item::Moving { lo: alo, hi: ahi, .. }), Some(Item::Moving { lo: blo, hi: bhi, .. })) => {
                let (ea, eb) = (ahi / la, bhi / lb);
                let u2 = ea.min(eb);
                let n = ((u2 - u) * big / step).ceil().max(1.0) as usize;
                let mut grid: Vec<f64> = (1..=n)
                    .map(|k| if k == n { u2 } else { u + (u2 - u) * k as f64 / n as f64 })
                    .collect();
                grid.extend(lams.iter().copied().filter(|&x| x > u && x < u2));
                grid.sort_by(f64::total_cmp);
                grid.dedup();
                for uk in grid {
                    let ta = if uk == ea { *ahi } else { (uk * la).clamp(*alo, *ahi) };
                    let tb = if uk == eb { *bhi } else { (uk * lb).clamp(*blo, *bhi) };
                    a.frame = left.moving_frame(a.idx, ta);
                    a.tau = ta;
                    b.frame = right.moving_frame(b.idx, tb);
                    b.tau = tb;
                    push(StairKind::Moving, uk, &a, &b, &mut entries)?;
                    if lams.contains(&uk) {
                        lambda.push((uk, entries.len() - 1));
                    }
                }
                if ea == u2 {
                    a.idx += 1;
                }
                if eb == u2 {
                    b.idx += 1;
                }
                u = u2;
            }
            _ => {
                return Err(GeoError::SyncFailed(
                    "one node family ended while the other was still moving".into(),
                ))
            }
        }
    }
    lambda.push((1.0, entries.len() - 1));
    Ok(Staircase {
        entries,
        lambda,
        left_len: la,
        right_len: lb,
    })
}

/// Contracts `β_i * β̄_{i+1}` to the basepoint by running the staircase
/// backwards. Frames are bounded by `2l + 4a + δ + ε`.
pub fn contract_adjacent(st: &Staircase, pr: &ShorteningParams, epsilon: f64) -> LengthHomotopy {
    contract_upto(st, st.entries.len() - 1, pr, epsilon)
}

fn contract_upto(st: &Staircase, sigma: usize, pr: &ShorteningParams, epsilon: f64) -> LengthHomotopy {
    let frames = st.entries[..=sigma]
        .iter()
        .rev()
        .map(StairEntry::contraction_frame)
        .collect();
    LengthHomotopy::new(frames, two_l_4a(pr, epsilon))
}

fn two_l_4a(pr: &ShorteningParams, epsilon: f64) -> f64 {
    2.0 * pr.l + 4.0 * pr.a + pr.delta + epsilon
}

/// A path from `A * T_A` to `B * T_B` through loops at `p`, where the
/// staircase entry `sigma` supplies `A`, `B` and the vertical `g`, and the
/// tails are the unused parts of the node loops.
fn g_frames(
    st: &Staircase,
    sigma: usize,
    left: &Timeline,
    right: &Timeline,
    pr: &ShorteningParams,
    epsilon: f64,
    short: f64,
    r: &mut Remeasurer,
) -> Result<Vec<Frame>> {
    let e = &st.entries[sigma];
    let m = left.alpha.model().clone();
    let g = Frame::of(&e.vertical);
    let glen = e.vertical.length();
    let t_a = Frame::from_slice(Slice::new(&left.alpha, e.tau_left, left.len));
    let t_b = Frame::from_slice(Slice::new(&right.alpha, e.tau_right, right.len));
    let half = 0.5 * glen;
    let mid = {
        let ta = t_a.materialize()?;
        let tb = t_b.materialize()?;
        let mut c = transit_loop_open(&ta, &tb, 0.5)?;
        let start = e.vertical.point_at(half);
        if c.start() != &start {
            let mut pts = c.into_points();
            pts[0] = start;
            c = PLCurve::new(m.clone(), pts)?;
        }
        Frame::of(&Arc::new(c))
    };
    let mut out = vec![
        e.left.clone().then_frame(&t_a),
        e.left.clone().then_frame(&g.window(0.0, half)).then_frame(&mid),
        e.left.clone().then_frame(&g).then_frame(&t_b),
    ];
    let h = contract_upto(st, sigma, pr, epsilon);
    let ag = e.left.clone().then_frame(&g);
    let lem = if r.frame_len(&e.right) <= short {
        lemma_path_homotopy(&ag, &e.right, &h, f64::INFINITY)?.frames
    } else {
        let mut fr = lemma_path_homotopy(&e.right, &ag, &h.mirrored(), f64::INFINITY)?.frames;
        fr.reverse();
        fr
    };
    out.extend(lem.into_iter().map(|f| f.then_frame(&t_b)));
    Ok(out)
}

/// Transit between two open paths with the same end point.
fn transit_loop_open(a: &PLCurve, b: &PLCurve, w: f64) -> Result<PLCurve> {
    let m = a.model().clone();
    let us = proportional_grid(a, b, m.margin / 4.0);
    let (la, lb) = (a.length(), b.length());
    let mut pts: Vec<Point> = us
        .iter()
        .map(|u| m.interpolate(&a.point_at(u * la), &b.point_at(u * lb), w))
        .collect();
    *pts.last_mut().unwrap() = a.end().clone();
    PLCurve::from_points_refined(m, pts)
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeReport {
    pub t: f64,
    pub length: f64,
    pub beta_length: f64,
    pub cuts: usize,
    pub jitter: usize,
    /// Largest re-measured frame of the node's partial-shortening homotopy.
    pub homotopy_max: f64,
    #[serde(skip)]
    pub homotopy_witness: Arc<PLCurve>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub left: usize,
    pub right: usize,
    pub entries: usize,
    pub contraction_max: f64,
    pub tilde_max: f64,
    pub g_max: f64,
    /// Per `λ` grid value, the largest frame of the gap family.
    pub g_lambda_max: Vec<f64>,
    /// Largest `min(|γ^i_s|, |γ^{i+1}_s|)` over the staircase.
    pub disjoint_worst: f64,
    pub g0_matches: bool,
    pub g1_matches: bool,
    pub based: bool,
    pub min_partition_gap: f64,
    #[serde(skip)]
    pub tilde_loops: Vec<Arc<PLCurve>>,
    /// Longest frames behind `contraction_max`, `tilde_max` and `g_max`.
    #[serde(skip)]
    pub witnesses: [Arc<PLCurve>; 3],
}

#[derive(Clone, Debug)]
pub struct FamilyResult {
    /// Sampled loops of the shortened family, in order around the circle.
    pub tilde_f: LoopFamily,
    pub nodes: Vec<NodeReport>,
    pub gaps: Vec<GapReport>,
    pub lambda: Vec<f64>,
    pub certs: Vec<BoundCertificate>,
    pub disjoint_bound: f64,
    pub disjoint_ok: bool,
    pub g0_matches: bool,
    pub g1_matches: bool,
    pub based: bool,
    pub slack: f64,
    /// For each certificate, a curve whose length is its `measured` value.
    pub witnesses: Vec<Arc<PLCurve>>,
}

impl FamilyResult {
    pub fn all_pass(&self) -> bool {
        self.certs.iter().all(|c| c.pass) && self.disjoint_ok && self.g0_matches && self.g1_matches && self.based
    }

    pub fn cert(&self, id: FormulaId) -> Option<&BoundCertificate> {
        self.certs.iter().find(|c| c.formula == id)
    }

    pub fn max_over<F: Fn(&GapReport) -> f64>(&self, f: F) -> f64 {
        self.gaps.iter().map(f).fold(0.0, f64::max)
    }
}

/// Index and re-measured length of the longest frame.
fn longest(frames: &[Frame], r: &mut Remeasurer) -> (usize, f64) {
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| (i, r.frame_len(f)))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
}

fn stride_pick(n: usize, k: usize, extra: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..k.min(n)).map(|j| j * (n - 1) / (k.max(2) - 1).max(1)).collect();
    idx.push(extra);
    idx.sort_unstable();
    idx.dedup();
    idx
}

fn process_gap(
    li: usize,
    ri: usize,
    left: &Timeline,
    right: &Timeline,
    pr: &ShorteningParams,
    epsilon: f64,
    cfg: &FamilyConfig,
) -> Result<GapReport> {
    let m = left.alpha.model().clone();
    let p = left.alpha.start().clone();
    let st = synchronize(left, right, cfg.lambda_steps, m.margin / 8.0)?;
    let slack = pr.slack.slack(pr.a, pr.delta, epsilon);
    let short = pr.l + pr.a + pr.delta + slack;
    let mut r = Remeasurer::new();
    let mut based = true;

    let disjoint_worst = st
        .entries
        .iter()
        .map(|e| r.frame_len(&e.left).min(r.frame_len(&e.right)))
        .fold(0.0, f64::max);

    let h = contract_adjacent(&st, pr, epsilon);
    let (ci, contraction_max) = longest(&h.frames, &mut r);
    let contraction_witness = Arc::new(h.frames[ci].materialize()?);
    based &= h.frames.iter().all(|f| f.start() == p && f.end() == p);

    let bl = Frame::of(left.beta());
    let br = Frame::of(right.beta());
    let tf = lemma_path_homotopy(&bl, &br, &h, f64::INFINITY)?;
    drop(h);
    let tl: Vec<f64> = tf.frames.iter().map(|f| r.frame_len(f)).collect();
    based &= tf.frames.iter().all(|f| f.start() == p && f.end() == p);
    let (argmax, tilde_max) = tl
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
    let picks = stride_pick(tf.frames.len(), cfg.tilde_samples, argmax);
    let tilde_loops = picks
        .iter()
        .map(|&i| tf.frames[i].materialize().map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let tilde_witness = tilde_loops[picks.iter().position(|&i| i == argmax).unwrap()].clone();

    let mut g_lambda_max = Vec::with_capacity(st.lambda.len());
    let mut g0_matches = true;
    let mut g1_matches = true;
    let mut g_witness: Option<(f64, Arc<PLCurve>)> = None;
    for (j, &(_, sigma)) in st.lambda.iter().enumerate() {
        let frames = g_frames(&st, sigma, left, right, pr, epsilon, short, &mut r)?;
        based &= frames.iter().all(|f| f.start() == p && f.end() == p);
        let (gi, gm) = longest(&frames, &mut r);
        if g_witness.as_ref().is_none_or(|w| gm > w.0) {
            g_witness = Some((gm, Arc::new(frames[gi].materialize()?)));
        }
        g_lambda_max.push(gm);
        if j == 0 {
            let fl = Frame::of(&left.alpha);
            let fr = Frame::of(&right.alpha);
            let same = |x: &Frame, y: &Frame, r: &mut Remeasurer| {
                (r.frame_len(x) - r.frame_len(y)).abs() <= 1e-9 && frame_gap(x, y, 64) <= 1e-9
            };
            g0_matches = same(&frames[0], &fl, &mut r) && same(frames.last().unwrap(), &fr, &mut r);
        }
        if j + 1 == st.lambda.len() {
            let tail = &frames[3..];
            g1_matches = tail.len() == tf.frames.len()
                && tail
                    .iter()
                    .zip(&tl)
                    .all(|(f, &x)| (r.frame_len(f) - x).abs() <= 1e-9);
        }
    }
    let g_max = g_lambda_max.iter().copied().fold(0.0, f64::max);

    let (ul, ur) = (left.frozen_positions(), right.frozen_positions());
    let min_partition_gap = ul
        .iter()
        .flat_map(|x| ur.iter().map(move |y| (x - y).abs()))
        .fold(f64::INFINITY, f64::min);

    Ok(GapReport {
        left: li,
        right: ri,
        entries: st.entries.len(),
        contraction_max,
        tilde_max,
        g_max,
        g_lambda_max,
        disjoint_worst,
        g0_matches,
        g1_matches,
        based,
        min_partition_gap,
        tilde_loops,
        witnesses: [contraction_witness, tilde_witness, g_witness.unwrap().1],
    })
}

fn node_report(t: f64, fam: &ShorteningFamily, tl: &Timeline) -> Result<NodeReport> {
    let mut r = Remeasurer::new();
    let h = fam.homotopy();
    let (i, homotopy_max) = longest(&h.frames, &mut r);
    Ok(NodeReport {
        t,
        length: fam.alpha.length(),
        beta_length: fam.final_curve.length(),
        cuts: fam.cut_count(),
        jitter: tl.jitter,
        homotopy_max,
        homotopy_witness: Arc::new(h.frames[i].materialize()?),
    })
}

/// Shortens every loop of the family and assembles the shortened family,
/// the adjacent contractions and the deformation. Returns the result even
/// when a certificate fails; see [`shorten_family`] for the checked form.
pub fn run_family(family: &LoopFamily, pr: &ShorteningParams, big_l: f64, cfg: &FamilyConfig) -> Result<FamilyResult> {
    pr.validate()?;
    let fam = family.refine_to_epsilon(cfg.max_refine_rounds)?;
    if fam.max_length() > big_l * (1.0 + 1e-12) {
        return Err(GeoError::Config(format!(
            "node loop of length {} exceeds L = {big_l}",
            fam.max_length()
        )));
    }
    if !fam.circle {
        let ends = [fam.loops[0].length(), fam.loops[fam.len() - 1].length()];
        if ends.iter().any(|&x| x > pr.l + pr.a) {
            return Err(GeoError::Config("end loops of an arc family must be at most l + a".into()));
        }
    }
    let eps = fam.epsilon;
    let n = fam.len();
    let eta = cfg.jitter * pr.a;
    let batch = (2 * rayon::current_num_threads()).max(2);

    let mut nodes = Vec::with_capacity(n);
    let mut gaps: Vec<GapReport> = Vec::with_capacity(fam.gap_count());
    let mut first: Option<Arc<Timeline>> = None;
    let mut prev: Option<Arc<Timeline>> = None;
    let mut start = 0;
    while start < n {
        let end = (start + batch).min(n);
        let fams: Vec<ShorteningFamily> = (start..end)
            .into_par_iter()
            .map(|i| build_family(&fam.loops[i], pr, true, &cfg.birkhoff))
            .collect::<Result<Vec<_>>>()?;
        let mut tls: Vec<Arc<Timeline>> = Vec::with_capacity(fams.len());
        for (k, f) in fams.iter().enumerate() {
            let i = start + k;
            let mut neigh: Vec<&Timeline> = Vec::new();
            if let Some(t) = tls.last().or(prev.as_ref()) {
                neigh.push(t);
            }
            if fam.circle && i + 1 == n && n > 1 {
                if let Some(t) = first.as_ref() {
                    neigh.push(t);
                }
            }
            let tl = Arc::new(choose_jitter(f, &neigh, eta, cfg.max_jitter)?);
            tls.push(tl);
        }
        let reports: Vec<NodeReport> = fams
            .par_iter()
            .zip(&tls)
            .enumerate()
            .map(|(k, (f, tl))| node_report(fam.nodes[start + k], f, tl))
            .collect::<Result<Vec<_>>>()?;
        nodes.extend(reports);
        drop(fams);
        if first.is_none() {
            first = Some(tls[0].clone());
        }
        let mut pairs: Vec<(usize, Arc<Timeline>, Arc<Timeline>)> = Vec::new();
        let mut last = prev.take();
        for (k, tl) in tls.iter().enumerate() {
            if let Some(pv) = last {
                pairs.push((start + k - 1, pv, tl.clone()));
            }
            last = Some(tl.clone());
        }
        let reports: Vec<GapReport> = pairs
            .par_iter()
            .map(|(i, a, b)| process_gap(*i, i + 1, a, b, pr, eps, cfg))
            .collect::<Result<Vec<_>>>()?;
        gaps.extend(reports);
        prev = last;
        start = end;
    }
    if fam.circle && n > 1 {
        let (a, b) = (prev.unwrap(), first.unwrap());
        gaps.push(process_gap(n - 1, 0, &a, &b, pr, eps, cfg)?);
    }
    assemble(fam, nodes, gaps, pr, big_l, cfg)
}

fn assemble(
    fam: LoopFamily,
    nodes: Vec<NodeReport>,
    mut gaps: Vec<GapReport>,
    pr: &ShorteningParams,
    big_l: f64,
    cfg: &FamilyConfig,
) -> Result<FamilyResult> {
    let eps = fam.epsilon;
    let slack = pr.slack.slack(pr.a, pr.delta, eps);
    let pick = |f: &dyn Fn(&GapReport) -> f64, k: usize| {
        gaps.iter()
            .map(|g| (f(g), &g.witnesses[k]))
            .fold((0.0, None), |acc, x| if x.0 > acc.0 { (x.0, Some(x.1.clone())) } else { acc })
    };
    let (contraction, cw) = pick(&|g| g.contraction_max, 0);
    let (tilde, tw) = pick(&|g| g.tilde_max, 1);
    let (mut g, mut gw) = pick(&|g| g.g_max, 2);
    for x in &nodes {
        if x.homotopy_max > g {
            (g, gw) = (x.homotopy_max, Some(x.homotopy_witness.clone()));
        }
    }
    let disjoint_bound = pr.l + pr.a + pr.delta + slack;
    let disjoint_ok = gaps.iter().all(|g| g.disjoint_worst <= disjoint_bound && g.min_partition_gap > 0.0);
    let certs = vec![
        BoundCertificate::new(
            FormulaId::TwoL4a,
            params(&[("l", pr.l), ("a", pr.a), ("delta", pr.delta), ("epsilon", eps)]),
            contraction,
            slack,
        )?,
        BoundCertificate::new(FormulaId::ThreeL5a, params(&[("l", pr.l), ("a", pr.a)]), tilde, slack)?,
        BoundCertificate::new(
            FormulaId::L5a3l,
            params(&[("L", big_l), ("a", pr.a), ("l", pr.l)]),
            g,
            slack,
        )?,
    ];
    let witnesses = [cw, tw, gw]
        .into_iter()
        .map(|w| w.ok_or_else(|| GeoError::Config("a loop family needs at least two nodes".into())))
        .collect::<Result<Vec<_>>>()?;
    let mut loops = Vec::new();
    for gp in &mut gaps {
        loops.append(&mut gp.tilde_loops);
    }
    if loops.is_empty() {
        // a single node: the shortened family is its final loop
        return Err(GeoError::Config("a loop family needs at least two nodes".into()));
    }
    let k = loops.len();
    let tnodes = (0..k).map(|i| i as f64 / k as f64).collect();
    let tilde_f = LoopFamily {
        nodes: tnodes,
        loops,
        circle: fam.circle,
        epsilon: eps,
        generator: None,
    };
    let lambda = (0..cfg.lambda_steps)
        .map(|j| j as f64 / cfg.lambda_steps as f64)
        .chain(std::iter::once(1.0))
        .collect();
    Ok(FamilyResult {
        tilde_f,
        g0_matches: gaps.iter().all(|g| g.g0_matches),
        g1_matches: gaps.iter().all(|g| g.g1_matches),
        based: gaps.iter().all(|g| g.based),
        nodes,
        gaps,
        lambda,
        certs,
        disjoint_bound,
        disjoint_ok,
        slack,
        witnesses,
    })
}

/// [`run_family`] with every certificate enforced.
pub fn shorten_family(family: &LoopFamily, pr: &ShorteningParams, big_l: f64) -> Result<FamilyResult> {
    let res = run_family(family, pr, big_l, &FamilyConfig::default())?;
    for c in &res.certs {
        c.clone().into_result()?;
    }
    Ok(res)
}
