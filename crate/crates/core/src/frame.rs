//! Lazy frames: curves assembled from arclength windows of shared curves.
//!
//! Homotopies in this crate have hundreds of thousands of frames that mostly
//! re-use the same few curves, so a frame stores `(curve, from, to)` windows
//! instead of breakpoints. A window with `from > to` runs backwards.

use smallvec::SmallVec;
use std::collections::HashMap;
use std::sync::Arc;

use crate::curve::PLCurve;
use crate::error::{GeoError, Result};
use crate::point::{dist_euclid, Point};

#[derive(Clone, Debug)]
pub struct Slice {
    pub curve: Arc<PLCurve>,
    pub from: f64,
    pub to: f64,
}

impl Slice {
    pub fn new(curve: &Arc<PLCurve>, from: f64, to: f64) -> Self {
        Slice {
            curve: curve.clone(),
            from,
            to,
        }
    }

    pub fn full(curve: &Arc<PLCurve>) -> Self {
        Slice::new(curve, 0.0, curve.length())
    }

    pub fn rev_full(curve: &Arc<PLCurve>) -> Self {
        Slice::new(curve, curve.length(), 0.0)
    }

    pub fn length(&self) -> f64 {
        (self.to - self.from).abs()
    }

    pub fn start(&self) -> Point {
        self.curve.point_at(self.from)
    }

    pub fn end(&self) -> Point {
        self.curve.point_at(self.to)
    }

    pub fn reversed(&self) -> Slice {
        Slice::new(&self.curve, self.to, self.from)
    }

    /// Point at arclength `s` measured from the slice start.
    pub fn point_at(&self, s: f64) -> Point {
        if self.to >= self.from {
            self.curve.point_at((self.from + s).min(self.to))
        } else {
            self.curve.point_at((self.from - s).max(self.to))
        }
    }

    /// Sub-window `[a, b]` in slice-local arclength.
    pub fn window(&self, a: f64, b: f64) -> Slice {
        if self.to >= self.from {
            Slice::new(&self.curve, self.from + a, (self.from + b).min(self.to))
        } else {
            Slice::new(&self.curve, self.from - a, (self.from - b).max(self.to))
        }
    }

    pub fn materialize(&self) -> PLCurve {
        let (a, b) = if self.from <= self.to {
            (self.from, self.to)
        } else {
            (self.to, self.from)
        };
        let c = self
            .curve
            .subcurve(a, b)
            .expect("slice window inside its curve");
        if self.from <= self.to {
            c
        } else {
            c.reverse()
        }
    }
}

/// A curve given as a concatenation of slices.
#[derive(Clone, Debug)]
pub struct Frame {
    pub slices: SmallVec<[Slice; 4]>,
}

impl Frame {
    pub fn of(curve: &Arc<PLCurve>) -> Self {
        Frame {
            slices: smallvec::smallvec![Slice::full(curve)],
        }
    }

    pub fn from_slice(s: Slice) -> Self {
        Frame {
            slices: smallvec::smallvec![s],
        }
    }

    /// Appends a slice; zero-length slices are dropped once the frame has a
    /// start point.
    pub fn then(mut self, s: Slice) -> Self {
        if s.length() > 0.0 || self.slices.is_empty() {
            self.slices.push(s);
        }
        self
    }

    pub fn then_frame(mut self, other: &Frame) -> Self {
        for s in &other.slices {
            self = self.then(s.clone());
        }
        self
    }

    pub fn reversed(&self) -> Frame {
        Frame {
            slices: self.slices.iter().rev().map(Slice::reversed).collect(),
        }
    }

    /// Bookkeeping length: the sum of window lengths.
    pub fn length(&self) -> f64 {
        self.slices.iter().map(Slice::length).sum()
    }

    pub fn start(&self) -> Point {
        self.slices[0].start()
    }

    pub fn end(&self) -> Point {
        self.slices.last().unwrap().end()
    }

    pub fn point_at(&self, mut s: f64) -> Point {
        for sl in &self.slices {
            let l = sl.length();
            if s <= l {
                return sl.point_at(s);
            }
            s -= l;
        }
        self.end()
    }

    /// Sub-frame between frame-local arclengths `a <= b`.
    pub fn window(&self, a: f64, b: f64) -> Frame {
        let mut out: SmallVec<[Slice; 4]> = SmallVec::new();
        let mut off = 0.0;
        for sl in &self.slices {
            let l = sl.length();
            let lo = (a - off).max(0.0);
            let hi = (b - off).min(l);
            if hi > lo {
                out.push(sl.window(lo, hi));
            }
            off += l;
        }
        if out.is_empty() {
            let p = self.point_at(a);
            let c = Arc::new(PLCurve::constant(self.slices[0].curve.model().clone(), p));
            out.push(Slice::full(&c));
        }
        Frame { slices: out }
    }

    /// Concatenates the slices into a standalone curve. Joins must match to
    /// round-off (1e-12); anything larger is a construction bug.
    pub fn materialize(&self) -> Result<PLCurve> {
        let mut out = self.slices[0].materialize();
        for sl in &self.slices[1..] {
            let next = sl.materialize();
            let gap = dist_euclid(out.end(), next.start());
            if gap > 1e-12 {
                return Err(GeoError::EndpointMismatch { gap });
            }
            if gap > 0.0 {
                let mut pts = next.into_points();
                pts[0] = out.end().clone();
                let c = PLCurve::new(out.model().clone(), pts)?;
                out = out.concat(&c)?;
            } else {
                out = out.concat(&next)?;
            }
        }
        Ok(out)
    }

    /// Points at `k + 1` proportional arclength positions.
    pub fn samples(&self, k: usize) -> Vec<Point> {
        let l = self.length();
        (0..=k)
            .map(|i| self.point_at(l * i as f64 / k as f64))
            .collect()
    }
}

/// Largest distance between proportionally matched points of two frames.
pub fn frame_gap(a: &Frame, b: &Frame, k: usize) -> f64 {
    let m = a.slices[0].curve.model().clone();
    a.samples(k)
        .iter()
        .zip(b.samples(k))
        .map(|(x, y)| m.seg_len(x, &y))
        .fold(0.0, f64::max)
}

/// Independent length measurement of frames.
///
/// For every curve it meets, the remeasurer re-sums breakpoint distances from
/// scratch (ignoring the curve's cached arclengths); a window is then measured
/// as two fresh end segments plus a difference of those sums.
#[derive(Default)]
pub struct Remeasurer {
    sums: HashMap<usize, (Arc<PLCurve>, Vec<f64>)>,
}

impl Remeasurer {
    pub fn new() -> Self {
        Self::default()
    }

    fn prefix(&mut self, c: &Arc<PLCurve>) -> &Vec<f64> {
        let key = Arc::as_ptr(c) as usize;
        &self
            .sums
            .entry(key)
            .or_insert_with(|| {
                let m = c.model();
                let mut acc = Vec::with_capacity(c.n_points());
                acc.push(0.0);
                for w in c.points().windows(2) {
                    acc.push(acc.last().unwrap() + m.seg_len(&w[0], &w[1]));
                }
                (c.clone(), acc)
            })
            .1
    }

    pub fn slice_len(&mut self, s: &Slice) -> f64 {
        let (a, b) = if s.from <= s.to {
            (s.from, s.to)
        } else {
            (s.to, s.from)
        };
        if b <= a {
            return 0.0;
        }
        let c = &s.curve;
        let cum = c.cum();
        let i = cum.partition_point(|x| *x <= a);
        let j = cum.partition_point(|x| *x < b);
        let m = c.model().clone();
        let pa = c.point_at(a);
        let pb = c.point_at(b);
        if i >= j {
            return m.seg_len(&pa, &pb);
        }
        let pre = self.prefix(c);
        let inner = pre[j - 1] - pre[i];
        let pts = c.points();
        m.seg_len(&pa, &pts[i]) + inner + m.seg_len(&pts[j - 1], &pb)
    }

    pub fn frame_len(&mut self, f: &Frame) -> f64 {
        f.slices.iter().map(|s| self.slice_len(s)).sum()
    }

    pub fn clear(&mut self) {
        self.sums.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ManifoldModel;
    use approx::assert_abs_diff_eq;

    fn arc() -> Arc<PLCurve> {
        let m = ManifoldModel::unit_sphere().shared();
        Arc::new(
            m.minimal_geodesic(&Point::new(&[1., 0., 0.]), &Point::new(&[0., 0., 1.]))
                .unwrap(),
        )
    }

    #[test]
    fn window_and_reverse_lengths() {
        let c = arc();
        let f = Frame::of(&c)
            .then(Slice::new(&c, c.length(), 0.3))
            .then(Slice::new(&c, 0.3, c.length()));
        assert_abs_diff_eq!(f.length(), c.length() + 2.0 * (c.length() - 0.3), epsilon = 1e-12);
        let m = f.materialize().unwrap();
        assert_abs_diff_eq!(m.length(), f.length(), epsilon = 1e-9);
        let mut r = Remeasurer::new();
        assert_abs_diff_eq!(r.frame_len(&f), f.length(), epsilon = 1e-9);
        let rev = f.reversed();
        assert_eq!(rev.start(), f.end());
        assert_abs_diff_eq!(rev.length(), f.length(), epsilon = 1e-15);
    }

    #[test]
    fn frame_window_matches_point_at() {
        let c = arc();
        let f = Frame::of(&c).then(Slice::rev_full(&c));
        let w = f.window(1.0, 2.0);
        assert_abs_diff_eq!(w.length(), 1.0, epsilon = 1e-12);
        assert!(dist_euclid(&w.start(), &f.point_at(1.0)) < 1e-12);
        assert!(dist_euclid(&w.end(), &f.point_at(2.0)) < 1e-12);
    }

    #[test]
    fn gap_of_identical_frames_is_zero() {
        let c = arc();
        let f = Frame::of(&c);
        assert_eq!(frame_gap(&f, &f, 16), 0.0);
    }
}
