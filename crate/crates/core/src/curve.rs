//! Piecewise-geodesic curves queried by arclength.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{GeoError, Result};
use crate::manifold::{ManifoldModel, ManifoldSpec};
use crate::point::Point;

/// Ordered breakpoints joined by minimal geodesics shorter than the model's
/// injectivity margin. `cum[i]` is the arclength at breakpoint `i`.
#[derive(Clone, Debug)]
pub struct PLCurve {
    model: Arc<ManifoldModel>,
    pts: Vec<Point>,
    cum: Vec<f64>,
}

impl PartialEq for PLCurve {
    fn eq(&self, other: &Self) -> bool {
        self.pts == other.pts
    }
}

impl PLCurve {
    /// Builds a curve, measuring every segment. Fails if a gap exceeds the
    /// injectivity margin (use [`PLCurve::from_points_refined`] to subdivide).
    pub fn new(model: Arc<ManifoldModel>, pts: Vec<Point>) -> Result<Self> {
        if pts.is_empty() {
            return Err(GeoError::Config("a curve needs at least one point".into()));
        }
        let mut cum = Vec::with_capacity(pts.len());
        cum.push(0.0);
        for w in pts.windows(2) {
            let d = model.seg_len(&w[0], &w[1]);
            if d > model.margin * (1.0 + 1e-9) {
                return Err(GeoError::Config(format!(
                    "breakpoint gap {d} exceeds injectivity margin {}",
                    model.margin
                )));
            }
            cum.push(cum.last().unwrap() + d);
        }
        Ok(PLCurve { model, pts, cum })
    }

    /// Joins consecutive waypoints by minimal geodesics, subdivided to half the
    /// margin. Waypoints may be arbitrarily far apart.
    pub fn from_waypoints(model: Arc<ManifoldModel>, way: &[Point]) -> Result<Self> {
        let mut out = PLCurve::constant(model.clone(), way[0].clone());
        for w in way.windows(2) {
            let g = model.minimal_geodesic(&w[0], &w[1])?;
            out = out.concat(&g)?;
        }
        Ok(out)
    }

    /// Subdivides every gap longer than half the margin. Only meaningful when
    /// each given gap is already below the injectivity radius (always true on
    /// the sphere except for antipodes, and on the torus below half a period).
    pub fn from_points_refined(model: Arc<ManifoldModel>, pts: Vec<Point>) -> Result<Self> {
        let target = 0.5 * model.margin;
        let mut out = Vec::with_capacity(pts.len());
        out.push(pts[0].clone());
        for w in pts.windows(2) {
            let d = model.seg_len(&w[0], &w[1]);
            let k = (d / target).ceil().max(1.0) as usize;
            for i in 1..k {
                out.push(model.interpolate(&w[0], &w[1], i as f64 / k as f64));
            }
            out.push(w[1].clone());
        }
        PLCurve::new(model, out)
    }

    /// Builds a torus curve from a polyline in the universal cover, wrapping
    /// each vertex into the fundamental domain.
    pub fn from_cover_polyline(model: Arc<ManifoldModel>, cover: &[Vec<f64>]) -> Result<Self> {
        let target = 0.5 * model.margin;
        let mut pts = vec![model.project(&cover[0])];
        for w in cover.windows(2) {
            let d = crate::point::dist_euclid(&w[0], &w[1]);
            let k = (d / target).ceil().max(1.0) as usize;
            for i in 1..=k {
                let t = i as f64 / k as f64;
                let x: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| a + t * (b - a)).collect();
                pts.push(model.project(&x));
            }
        }
        // a closed cover path must close exactly despite the wrap round-off
        let n = pts.len();
        if n > 2 && model.seg_len(&pts[0], &pts[n - 1]) < 1e-9 {
            pts[n - 1] = pts[0].clone();
        }
        PLCurve::new(model, pts)
    }

    pub fn constant(model: Arc<ManifoldModel>, p: Point) -> Self {
        PLCurve {
            model,
            pts: vec![p],
            cum: vec![0.0],
        }
    }

    pub(crate) fn from_parts(model: Arc<ManifoldModel>, pts: Vec<Point>, cum: Vec<f64>) -> Self {
        debug_assert_eq!(pts.len(), cum.len());
        PLCurve { model, pts, cum }
    }

    pub fn model(&self) -> &Arc<ManifoldModel> {
        &self.model
    }

    pub fn points(&self) -> &[Point] {
        &self.pts
    }

    pub fn cum(&self) -> &[f64] {
        &self.cum
    }

    pub fn into_points(self) -> Vec<Point> {
        self.pts
    }

    pub fn start(&self) -> &Point {
        &self.pts[0]
    }

    pub fn end(&self) -> &Point {
        self.pts.last().unwrap()
    }

    pub fn n_points(&self) -> usize {
        self.pts.len()
    }

    pub fn is_constant(&self) -> bool {
        self.pts.len() == 1
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn is_closed(&self) -> bool {
        self.start() == self.end()
    }

    /// Independent re-summation of breakpoint distances.
    pub fn remeasure(&self) -> f64 {
        self.pts
            .windows(2)
            .map(|w| self.model.seg_len(&w[0], &w[1]))
            .sum()
    }

    /// Index `i` of the segment `[cum[i], cum[i+1]]` containing `s`.
    fn segment_of(&self, s: f64) -> usize {
        let n = self.cum.len();
        match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// The point at arclength `s` (clamped to the curve). Breakpoint
    /// arclengths return the stored breakpoint exactly.
    pub fn point_at(&self, s: f64) -> Point {
        if self.pts.len() == 1 || s <= 0.0 {
            return self.pts[0].clone();
        }
        if s >= self.length() {
            return self.end().clone();
        }
        let i = self.segment_of(s);
        if s == self.cum[i] {
            return self.pts[i].clone();
        }
        if s == self.cum[i + 1] {
            return self.pts[i + 1].clone();
        }
        let seg = self.cum[i + 1] - self.cum[i];
        if seg <= 0.0 {
            return self.pts[i].clone();
        }
        self.model
            .interpolate(&self.pts[i], &self.pts[i + 1], (s - self.cum[i]) / seg)
    }

    pub fn reverse(&self) -> PLCurve {
        let total = self.length();
        let pts: Vec<Point> = self.pts.iter().rev().cloned().collect();
        let cum: Vec<f64> = self.cum.iter().rev().map(|c| total - c).collect();
        PLCurve::from_parts(self.model.clone(), pts, cum)
    }

    pub fn concat(&self, other: &PLCurve) -> Result<PLCurve> {
        if self.end() != other.start() {
            let gap = crate::point::dist_euclid(self.end(), other.start());
            return Err(GeoError::EndpointMismatch { gap });
        }
        if other.is_constant() {
            return Ok(self.clone());
        }
        if self.is_constant() {
            return Ok(other.clone());
        }
        let total = self.length();
        let mut pts = Vec::with_capacity(self.pts.len() + other.pts.len() - 1);
        pts.extend_from_slice(&self.pts);
        pts.extend_from_slice(&other.pts[1..]);
        let mut cum = Vec::with_capacity(pts.len());
        cum.extend_from_slice(&self.cum);
        cum.extend(other.cum[1..].iter().map(|c| total + c));
        Ok(PLCurve::from_parts(self.model.clone(), pts, cum))
    }

    /// Restriction to the arclength window `[s0, s1]`.
    pub fn subcurve(&self, s0: f64, s1: f64) -> Result<PLCurve> {
        let len = self.length();
        let tol = 1e-12 * (1.0 + len);
        if !(s0 >= -tol && s0 <= s1 + tol && s1 <= len + tol) {
            return Err(GeoError::RangeError { s0, s1, len });
        }
        let s0 = s0.clamp(0.0, len);
        let s1 = s1.clamp(s0, len);
        let a = self.point_at(s0);
        if s1 <= s0 {
            return Ok(PLCurve::constant(self.model.clone(), a));
        }
        let b = self.point_at(s1);
        let mut pts = vec![a];
        let mut cum = vec![0.0];
        // breakpoints strictly inside (s0, s1)
        let lo = self.cum.partition_point(|c| *c <= s0);
        let hi = self.cum.partition_point(|c| *c < s1);
        for i in lo..hi {
            let d = if cum.len() == 1 {
                self.model.seg_len(&pts[0], &self.pts[i])
            } else {
                self.cum[i] - self.cum[i - 1]
            };
            cum.push(cum.last().unwrap() + d);
            pts.push(self.pts[i].clone());
        }
        let d = self.model.seg_len(pts.last().unwrap(), &b);
        cum.push(cum.last().unwrap() + d);
        pts.push(b);
        Ok(PLCurve::from_parts(self.model.clone(), pts, cum))
    }

    /// Subdivides segments so that every gap is at most `max_gap`.
    pub fn refine(&self, max_gap: f64) -> PLCurve {
        assert!(max_gap > 0.0);
        let mut pts = Vec::with_capacity(self.pts.len());
        let mut cum = Vec::with_capacity(self.pts.len());
        pts.push(self.pts[0].clone());
        cum.push(0.0);
        for i in 0..self.pts.len().saturating_sub(1) {
            let seg = self.cum[i + 1] - self.cum[i];
            let k = (seg / max_gap).ceil().max(1.0) as usize;
            if k == 1 {
                pts.push(self.pts[i + 1].clone());
                cum.push(self.cum[i + 1]);
                continue;
            }
            let mut prev = self.pts[i].clone();
            for j in 1..=k {
                let q = if j == k {
                    self.pts[i + 1].clone()
                } else {
                    self.model
                        .interpolate(&self.pts[i], &self.pts[i + 1], j as f64 / k as f64)
                };
                let d = self.model.seg_len(&prev, &q);
                cum.push(cum.last().unwrap() + d);
                pts.push(q.clone());
                prev = q;
            }
        }
        PLCurve::from_parts(self.model.clone(), pts, cum)
    }

    pub fn to_json(&self) -> CurveJson {
        CurveJson {
            manifold: self.model.spec(),
            breakpoints: self.pts.iter().map(|p| p.to_vec()).collect(),
        }
    }

    /// `(arclength, coords...)` rows for CSV export.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.pts
            .iter()
            .zip(&self.cum)
            .map(|(p, s)| std::iter::once(*s).chain(p.iter().copied()).collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveJson {
    pub manifold: ManifoldSpec,
    pub breakpoints: Vec<Vec<f64>>,
}

impl CurveJson {
    pub fn build(&self) -> Result<PLCurve> {
        let m = Arc::new(self.manifold.build()?);
        self.build_on(m)
    }

    pub fn build_on(&self, model: Arc<ManifoldModel>) -> Result<PLCurve> {
        let pts: Vec<Point> = self.breakpoints.iter().map(|b| Point::new(b)).collect();
        for p in &pts {
            model.validate_point(p)?;
        }
        PLCurve::new(model, pts)
    }
}

/// A loop based at `basepoint`: first and last breakpoints equal it exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopAt {
    pub curve: PLCurve,
    pub basepoint: Point,
}

impl LoopAt {
    pub fn new(curve: PLCurve) -> Result<Self> {
        if !curve.is_closed() {
            let gap = crate::point::dist_euclid(curve.start(), curve.end());
            return Err(GeoError::EndpointMismatch { gap });
        }
        let basepoint = curve.start().clone();
        Ok(LoopAt { curve, basepoint })
    }

    pub fn length(&self) -> f64 {
        self.curve.length()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ManifoldModel;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sphere() -> Arc<ManifoldModel> {
        ManifoldModel::unit_sphere().shared()
    }

    fn quarter(m: &Arc<ManifoldModel>) -> PLCurve {
        m.minimal_geodesic(&Point::new(&[1., 0., 0.]), &Point::new(&[0., 1., 0.]))
            .unwrap()
    }

    #[test]
    fn constant_curve_has_zero_length() {
        let c = PLCurve::constant(sphere(), Point::new(&[0., 0., 1.]));
        assert_eq!(c.length(), 0.0);
        assert_eq!(c.reverse(), c);
    }

    #[test]
    fn quarter_circle_length() {
        let m = sphere();
        assert_abs_diff_eq!(quarter(&m).length(), PI / 2.0, epsilon = 1e-6);
    }

    #[test]
    fn concat_two_quarters_is_half_circle() {
        let m = sphere();
        let a = quarter(&m);
        let b = m
            .minimal_geodesic(&Point::new(&[0., 1., 0.]), &Point::new(&[-1., 0., 0.]))
            .unwrap();
        let c = a.concat(&b).unwrap();
        assert_abs_diff_eq!(c.length(), PI, epsilon = 1e-9);
        assert!(matches!(
            b.concat(&a),
            Err(GeoError::EndpointMismatch { .. })
        ));
    }

    #[test]
    fn concat_with_constant_keeps_length() {
        let m = sphere();
        let a = quarter(&m);
        let k = PLCurve::constant(m.clone(), a.end().clone());
        assert_eq!(a.concat(&k).unwrap().length(), a.length());
    }

    #[test]
    fn torus_additivity() {
        let m = ManifoldModel::flat_torus(&[10.0, 10.0]).unwrap().shared();
        let a = PLCurve::from_cover_polyline(m.clone(), &[vec![0.0, 0.0], vec![1.3, 0.0]]).unwrap();
        let b = PLCurve::from_cover_polyline(m.clone(), &[vec![1.3, 0.0], vec![1.3, 0.7]]).unwrap();
        assert_abs_diff_eq!(a.concat(&b).unwrap().length(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn subcurve_extremes() {
        let m = sphere();
        let c = quarter(&m);
        assert_eq!(c.subcurve(0.0, c.length()).unwrap(), c);
        assert!(c.subcurve(0.3, 0.3).unwrap().is_constant());
        assert!(c.subcurve(0.5, 0.2).is_err());
        assert!(c.subcurve(0.0, 5.0).is_err());
    }

    #[test]
    fn refine_halves_segments() {
        let m = sphere();
        let c = quarter(&m);
        let gap = c.cum()[1];
        let r = c.refine(gap / 2.0 * (1.0 + 1e-9));
        assert_eq!(r.n_points(), 2 * c.n_points() - 1);
        assert_abs_diff_eq!(r.length(), c.length(), epsilon = 1e-8);
        assert_eq!(c.refine(1.0), c);
    }

    #[test]
    fn point_at_breakpoints_is_exact() {
        let m = sphere();
        let c = quarter(&m);
        for (p, s) in c.points().iter().zip(c.cum()) {
            assert_eq!(&c.point_at(*s), p);
        }
    }

    #[test]
    fn margin_is_enforced() {
        let m = sphere();
        let r = PLCurve::new(m, vec![Point::new(&[1., 0., 0.]), Point::new(&[0., 1., 0.])]);
        assert!(r.is_err());
    }

    #[test]
    fn json_roundtrip() {
        let m = sphere();
        let c = quarter(&m);
        let js = serde_json::to_string(&c.to_json()).unwrap();
        let back: CurveJson = serde_json::from_str(&js).unwrap();
        assert_eq!(back.build().unwrap(), c);
    }
}
