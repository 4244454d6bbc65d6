//! Homotopies as frame lists, and the two composition lemmas.
//!
//! Given paths `g1, g2` from `p` to `q` and a based-loop homotopy `H` from
//! `g1 * ḡ2` to a loop `α1`, [`lemma_path_homotopy`] builds a path homotopy
//! from `g1` to `α1 * g2`: first it grows a doubled tail `ḡ2|[0,x] * g2|[l2-x,l2]`
//! onto `g1`, then it runs `H` with `g2` appended. Every frame has length at
//! most `l3 + l2`, where `l3` bounds `H`.

use std::sync::Arc;

use crate::birkhoff::ShorteningTrace;
use crate::curve::PLCurve;
use crate::error::{GeoError, Result};
use crate::frame::{frame_gap, Frame, Remeasurer};
use crate::point::{dist_euclid, Point};

#[derive(Clone, Debug)]
pub struct LengthHomotopy {
    pub frames: Vec<Frame>,
    pub start_point: Point,
    /// Common end point, or `None` when the end moves (see `end_track`).
    pub end_point: Option<Point>,
    /// End point of every frame when the end moves; empty otherwise.
    pub end_track: Vec<Point>,
    /// Largest bookkeeping frame length.
    pub max_length: f64,
    pub certified_bound: f64,
}

impl LengthHomotopy {
    pub fn new(frames: Vec<Frame>, certified_bound: f64) -> Self {
        assert!(!frames.is_empty(), "a homotopy needs at least one frame");
        let start_point = frames[0].start();
        let ends: Vec<Point> = frames.iter().map(Frame::end).collect();
        let fixed = ends.iter().all(|e| e == &ends[0]);
        let max_length = frames.iter().map(Frame::length).fold(0.0, f64::max);
        LengthHomotopy {
            frames,
            start_point,
            end_point: if fixed { Some(ends[0].clone()) } else { None },
            end_track: if fixed { Vec::new() } else { ends },
            max_length,
            certified_bound,
        }
    }

    pub fn constant(c: &Arc<PLCurve>) -> Self {
        LengthHomotopy::new(vec![Frame::of(c)], c.length())
    }

    /// The stages of a monotone shortening trace; bounded by the first length.
    pub fn from_trace(t: &ShorteningTrace) -> Self {
        let frames = t.stages.iter().map(Frame::of).collect();
        LengthHomotopy::new(frames, t.stages[0].length())
    }

    /// Contracts a loop along geodesics towards `center`. On a round sphere
    /// this does not increase length while the loop stays in the open
    /// hemisphere around `center`.
    pub fn cone_contraction(c: &Arc<PLCurve>, center: &Point, steps: usize) -> Result<Self> {
        let m = c.model().clone();
        let mut frames = vec![Frame::of(c)];
        for k in 1..=steps {
            let t = 1.0 - k as f64 / steps as f64;
            let curve = if k == steps {
                PLCurve::constant(m.clone(), center.clone())
            } else {
                let pts = c.points().iter().map(|x| m.interpolate(center, x, t)).collect();
                PLCurve::new(m.clone(), pts)?
            };
            frames.push(Frame::of(&Arc::new(curve)));
        }
        let h = LengthHomotopy::new(frames, 0.0);
        let bound = h.max_length;
        Ok(LengthHomotopy {
            certified_bound: bound,
            ..h
        })
    }

    /// The same family run backwards in the homotopy parameter.
    pub fn reversed(&self) -> Self {
        let frames = self.frames.iter().rev().cloned().collect();
        LengthHomotopy::new(frames, self.certified_bound)
    }

    /// Every frame traversed backwards.
    pub fn mirrored(&self) -> Self {
        let frames = self.frames.iter().map(Frame::reversed).collect();
        LengthHomotopy::new(frames, self.certified_bound)
    }

    /// Chains homotopies whose last/first frames meet; the bound is the max.
    pub fn chain(parts: &[LengthHomotopy]) -> Self {
        let frames = parts.iter().flat_map(|h| h.frames.iter().cloned()).collect();
        let bound = parts.iter().map(|h| h.certified_bound).fold(0.0, f64::max);
        LengthHomotopy::new(frames, bound)
    }

    pub fn first(&self) -> &Frame {
        &self.frames[0]
    }

    pub fn last(&self) -> &Frame {
        self.frames.last().unwrap()
    }

    pub fn check(&self, slack: f64) -> Result<()> {
        if self.max_length > self.certified_bound + slack {
            return Err(GeoError::BoundViolation {
                formula: "homotopy".into(),
                claimed: self.certified_bound,
                measured: self.max_length,
                slack,
            });
        }
        Ok(())
    }

    /// Largest frame length under independent re-measurement.
    pub fn remeasure_max(&self, r: &mut Remeasurer) -> f64 {
        self.frames.iter().map(|f| r.frame_len(f)).fold(0.0, f64::max)
    }

    /// Every frame starts at `start_point`, and ends at `end_point` when the
    /// end is fixed. Equality is exact.
    pub fn endpoints_fixed(&self) -> bool {
        self.frames.iter().all(|f| {
            f.start() == self.start_point
                && self.end_point.as_ref().is_none_or(|e| &f.end() == e)
        })
    }

    /// Largest proportional-sample distance between consecutive frames.
    pub fn max_step_gap(&self, samples: usize) -> f64 {
        self.frames
            .windows(2)
            .map(|w| frame_gap(&w[0], &w[1], samples))
            .fold(0.0, f64::max)
    }
}

/// Step of the doubling phase, in metric units.
pub(crate) fn doubling_step(f: &Frame) -> f64 {
    f.slices[0].curve.model().margin / 8.0
}

/// Path homotopy from `g1` to `α1 * g2` given `h` from `g1 * ḡ2` to `α1`.
/// The bound is `h.certified_bound + length(g2)`; frames above it plus
/// `slack` raise `BoundViolation`.
pub fn lemma_path_homotopy(
    g1: &Frame,
    g2: &Frame,
    h: &LengthHomotopy,
    slack: f64,
) -> Result<LengthHomotopy> {
    let p = g1.start();
    if p != g2.start() || g1.end() != g2.end() {
        let gap = dist_euclid(&g1.end(), &g2.end()).max(dist_euclid(&p, &g2.start()));
        return Err(GeoError::EndpointMismatch { gap });
    }
    if h.start_point != p || h.end_point.as_ref() != Some(&p) {
        return Err(GeoError::EndpointMismatch {
            gap: dist_euclid(&h.start_point, &p),
        });
    }
    let l2 = g2.length();
    let l3 = h.certified_bound;
    let bound = l3 + l2;
    let step = doubling_step(g1);
    let nx = (l2 / step).ceil() as usize;
    let mut frames = Vec::with_capacity(nx + 1 + h.frames.len());
    frames.push(g1.clone());
    for k in 1..=nx {
        let x = if k == nx { l2 } else { l2 * k as f64 / nx as f64 };
        let tail = g2.window(l2 - x, l2);
        frames.push(g1.clone().then_frame(&tail.reversed()).then_frame(&tail));
    }
    for f in &h.frames {
        frames.push(f.clone().then_frame(g2));
    }
    let out = LengthHomotopy::new(frames, bound);
    out.check(slack)?;
    Ok(out)
}

/// The symmetric form: a path homotopy from `g2` to `ᾱ1 * g1`, using `h`
/// traversed backwards frame by frame. Bound `l1 + l3`.
pub fn lemma_path_homotopy_mirror(
    g1: &Frame,
    g2: &Frame,
    h: &LengthHomotopy,
    slack: f64,
) -> Result<LengthHomotopy> {
    lemma_path_homotopy(g2, g1, &h.mirrored(), slack)
}

/// Variant with a moving end: the end first slides along `track` (from the
/// end of `a` to the end of `b`), then the fixed-end lemma runs on
/// `(a * track, b)`. `h` contracts `a * track * b̄`.
pub fn lemma_moving_endpoint(
    a: &Frame,
    track: &Frame,
    b: &Frame,
    h: &LengthHomotopy,
    slack: f64,
) -> Result<LengthHomotopy> {
    let lt = track.length();
    let n = (lt / doubling_step(a)).ceil().max(1.0) as usize;
    let mut frames = Vec::with_capacity(n + 1);
    for k in 0..n {
        let r = lt * k as f64 / n as f64;
        frames.push(a.clone().then_frame(&track.window(0.0, r)));
    }
    let g1 = a.clone().then_frame(track);
    let rest = lemma_path_homotopy(&g1, b, h, slack)?;
    frames.extend(rest.frames);
    let bound = rest.certified_bound.max(a.length() + lt);
    let out = LengthHomotopy::new(frames, bound);
    out.check(slack)?;
    Ok(out)
}

/// The circle-indexed lemma: each path `f[x]` is deformed to `f[x0]` through
/// paths of length at most `L + 2l`, given contractions `fh[x]` of the loops
/// `f[x] * f̄[x0]` through loops of length at most `L + l`.
pub fn lemma_sphere_contraction(
    f: &[Frame],
    x0: usize,
    fh: &[LengthHomotopy],
    slack: f64,
) -> Result<Vec<LengthHomotopy>> {
    if f.len() != fh.len() || x0 >= f.len() {
        return Err(GeoError::Config("one contraction per node is required".into()));
    }
    let big_l = f.iter().map(Frame::length).fold(0.0, f64::max);
    let l = f[x0].length();
    let mut out = Vec::with_capacity(f.len());
    for (fx, hx) in f.iter().zip(fh) {
        if hx.max_length > big_l + l + slack {
            return Err(GeoError::BoundViolation {
                formula: "L+l".into(),
                claimed: big_l + l,
                measured: hx.max_length,
                slack,
            });
        }
        let h = LengthHomotopy {
            certified_bound: big_l + l,
            ..hx.clone()
        };
        let r = lemma_path_homotopy(fx, &f[x0], &h, slack)?;
        out.push(r);
    }
    Ok(out)
}
