//! Metric backends: model manifolds with distance, minimal geodesics and
//! geodesic tracing.
//!
//! Sphere and flat torus use closed forms. The ellipsoid and chart surfaces
//! integrate the geodesic ODE and solve two-point problems by Gauss–Newton
//! shooting; far-apart pairs start from 32 deterministic directions.

mod ode;
pub mod surface;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::curve::PLCurve;
use crate::error::{GeoError, Result};
use crate::point::{dist_euclid, dot, norm, Coords, Point, Tangent};
pub use surface::ParamSurface;

pub const DEFAULT_MARGIN: f64 = 0.1;
pub const DEFAULT_STEP: f64 = 1e-3;
/// Number of deterministic initial directions of the global shooting solver.
pub const SHOOTING_DIRECTIONS: usize = 32;

const SHOOT_H: f64 = 1e-2;
const GN_TOL: f64 = 1e-11;

#[derive(Clone, Debug)]
pub enum ModelKind {
    RoundSphere { dim: usize, radius: f64 },
    Ellipsoid { semi_axes: Vec<f64> },
    FlatTorus { periods: Vec<f64> },
    ParamSurface(ParamSurface),
}

#[derive(Clone, Debug)]
pub struct ManifoldModel {
    pub kind: ModelKind,
    pub dim: usize,
    /// The diameter bound `a` of the gap hypothesis.
    pub diameter_bound: f64,
    /// Declared lower Ricci bound; informational only.
    pub ricci_floor: f64,
    /// Injectivity margin: maximal breakpoint gap of a curve.
    pub margin: f64,
    /// RK4 step of `trace_geodesic`.
    pub step: f64,
}

/// Serialisable description of a model, as it appears in scene and curve files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldSpec {
    RoundSphere {
        dim: usize,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diameter_bound: Option<f64>,
    },
    Ellipsoid {
        semi_axes: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diameter_bound: Option<f64>,
    },
    FlatTorus {
        periods: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diameter_bound: Option<f64>,
    },
    ParamSurface {
        preset: String,
        params: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diameter_bound: Option<f64>,
    },
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<ManifoldModel> {
        let (mut m, db) = match self {
            ManifoldSpec::RoundSphere {
                dim,
                radius,
                diameter_bound,
            } => (ManifoldModel::round_sphere(*dim, *radius)?, diameter_bound),
            ManifoldSpec::Ellipsoid {
                semi_axes,
                diameter_bound,
            } => (ManifoldModel::ellipsoid(semi_axes)?, diameter_bound),
            ManifoldSpec::FlatTorus {
                periods,
                diameter_bound,
            } => (ManifoldModel::flat_torus(periods)?, diameter_bound),
            ManifoldSpec::ParamSurface {
                preset,
                params,
                diameter_bound,
            } => {
                let s = ParamSurface::from_preset(preset, params).ok_or_else(|| {
                    GeoError::Config(format!("unknown surface preset {preset} {params:?}"))
                })?;
                (ManifoldModel::param_surface(s), diameter_bound)
            }
        };
        if let Some(a) = db {
            if !(*a > 0.0) {
                return Err(GeoError::Config("diameter_bound must be positive".into()));
            }
            m.diameter_bound = *a;
        }
        Ok(m)
    }
}

impl ManifoldModel {
    pub fn round_sphere(dim: usize, radius: f64) -> Result<Self> {
        if dim < 2 || !(radius > 0.0) || dim + 1 > 4 {
            return Err(GeoError::Config(format!(
                "round sphere needs 2 <= dim <= 3 and radius > 0, got dim={dim} r={radius}"
            )));
        }
        Ok(ManifoldModel {
            kind: ModelKind::RoundSphere { dim, radius },
            dim,
            diameter_bound: PI * radius,
            ricci_floor: (dim as f64 - 1.0) / (radius * radius),
            margin: DEFAULT_MARGIN,
            step: DEFAULT_STEP,
        })
    }

    pub fn unit_sphere() -> Self {
        Self::round_sphere(2, 1.0).expect("unit sphere")
    }

    pub fn ellipsoid(semi_axes: &[f64]) -> Result<Self> {
        if semi_axes.len() < 3 || semi_axes.len() > 4 || semi_axes.iter().any(|a| !(*a > 0.0)) {
            return Err(GeoError::Config(format!("bad ellipsoid axes {semi_axes:?}")));
        }
        let amax = semi_axes.iter().cloned().fold(0.0, f64::max);
        let prod: f64 = semi_axes.iter().map(|a| a * a).product();
        let ricci_floor = if semi_axes.len() == 3 {
            semi_axes
                .iter()
                .map(|a| a.powi(4) / prod)
                .fold(f64::INFINITY, f64::min)
        } else {
            0.0
        };
        Ok(ManifoldModel {
            kind: ModelKind::Ellipsoid {
                semi_axes: semi_axes.to_vec(),
            },
            dim: semi_axes.len() - 1,
            diameter_bound: PI * amax,
            ricci_floor,
            margin: DEFAULT_MARGIN,
            step: DEFAULT_STEP,
        })
    }

    pub fn flat_torus(periods: &[f64]) -> Result<Self> {
        if periods.len() < 2 || periods.len() > 4 || periods.iter().any(|p| !(*p > 0.0)) {
            return Err(GeoError::Config(format!("bad torus periods {periods:?}")));
        }
        Ok(ManifoldModel {
            kind: ModelKind::FlatTorus {
                periods: periods.to_vec(),
            },
            dim: periods.len(),
            diameter_bound: 0.5 * norm(periods),
            ricci_floor: 0.0,
            margin: DEFAULT_MARGIN,
            step: DEFAULT_STEP,
        })
    }

    pub fn param_surface(s: ParamSurface) -> Self {
        let (a, ricci) = match (s.name.as_str(), s.params.as_slice()) {
            ("torus_of_revolution", [big_r, r]) => {
                (PI * (big_r + r) + PI * r, -1.0 / (r * (big_r - r)))
            }
            _ => (0.5 * norm(&s.periods), 0.0),
        };
        ManifoldModel {
            kind: ModelKind::ParamSurface(s),
            dim: 2,
            diameter_bound: a,
            ricci_floor: ricci,
            margin: DEFAULT_MARGIN,
            step: DEFAULT_STEP,
        }
    }

    pub fn with_diameter_bound(mut self, a: f64) -> Self {
        self.diameter_bound = a;
        self
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.step = h;
        self
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    pub fn spec(&self) -> ManifoldSpec {
        let db = Some(self.diameter_bound);
        match &self.kind {
            ModelKind::RoundSphere { dim, radius } => ManifoldSpec::RoundSphere {
                dim: *dim,
                radius: *radius,
                diameter_bound: db,
            },
            ModelKind::Ellipsoid { semi_axes } => ManifoldSpec::Ellipsoid {
                semi_axes: semi_axes.clone(),
                diameter_bound: db,
            },
            ModelKind::FlatTorus { periods } => ManifoldSpec::FlatTorus {
                periods: periods.clone(),
                diameter_bound: db,
            },
            ModelKind::ParamSurface(s) => ManifoldSpec::ParamSurface {
                preset: s.name.clone(),
                params: s.params.clone(),
                diameter_bound: db,
            },
        }
    }

    /// Number of stored coordinates per point.
    pub fn coord_dim(&self) -> usize {
        match &self.kind {
            ModelKind::RoundSphere { dim, .. } => dim + 1,
            ModelKind::Ellipsoid { semi_axes } => semi_axes.len(),
            ModelKind::FlatTorus { periods } => periods.len(),
            ModelKind::ParamSurface(_) => 2,
        }
    }

    pub fn is_embedded(&self) -> bool {
        matches!(
            self.kind,
            ModelKind::RoundSphere { .. } | ModelKind::Ellipsoid { .. }
        )
    }

    fn periods(&self) -> Option<&[f64]> {
        match &self.kind {
            ModelKind::FlatTorus { periods } => Some(periods),
            ModelKind::ParamSurface(s) => Some(&s.periods),
            _ => None,
        }
    }

    // ---- points -----------------------------------------------------------

    /// Maps ambient/chart coordinates to a point of the model: radial
    /// projection for embedded models, reduction modulo periods for charts.
    pub fn project(&self, x: &[f64]) -> Point {
        match &self.kind {
            ModelKind::RoundSphere { radius, .. } => {
                let n = norm(x);
                Point(x.iter().map(|c| c * radius / n).collect())
            }
            ModelKind::Ellipsoid { semi_axes } => {
                let s: f64 = x
                    .iter()
                    .zip(semi_axes)
                    .map(|(c, a)| c * c / (a * a))
                    .sum::<f64>()
                    .sqrt();
                Point(x.iter().map(|c| c / s).collect())
            }
            ModelKind::FlatTorus { .. } | ModelKind::ParamSurface(_) => {
                let p = self.periods().unwrap();
                Point(x.iter().zip(p).map(|(c, per)| wrap(*c, *per)).collect())
            }
        }
    }

    /// Unit outward normal for embedded models.
    pub(crate) fn normal(&self, x: &[f64]) -> Coords {
        let g: Coords = match &self.kind {
            ModelKind::Ellipsoid { semi_axes } => {
                x.iter().zip(semi_axes).map(|(c, a)| c / (a * a)).collect()
            }
            _ => x.iter().copied().collect(),
        };
        let n = norm(&g);
        g.iter().map(|c| c / n).collect()
    }

    pub fn validate_point(&self, p: &Point) -> Result<()> {
        if p.dim() != self.coord_dim() || !p.is_finite() {
            return Err(GeoError::InvalidPoint(format!(
                "{:?} has wrong dimension or non-finite coordinates",
                p.coords()
            )));
        }
        let bad = match &self.kind {
            ModelKind::RoundSphere { radius, .. } => (norm(p) - radius).abs() > 1e-9,
            ModelKind::Ellipsoid { semi_axes } => {
                let s: f64 = p.iter().zip(semi_axes).map(|(c, a)| c * c / (a * a)).sum();
                (s - 1.0).abs() > 1e-9
            }
            _ => {
                let per = self.periods().unwrap();
                p.iter()
                    .zip(per)
                    .any(|(c, q)| *q > 0.0 && (*c < 0.0 || *c >= *q))
            }
        };
        if bad {
            return Err(GeoError::InvalidPoint(format!(
                "{:?} is not on the model",
                p.coords()
            )));
        }
        Ok(())
    }

    /// Chart difference `q - p` reduced to the shortest deck translate.
    pub fn chart_delta(&self, p: &[f64], q: &[f64]) -> Coords {
        let per = self.periods().unwrap();
        p.iter()
            .zip(q)
            .zip(per)
            .map(|((a, b), t)| {
                let d = b - a;
                if *t > 0.0 {
                    d - t * (d / t).round()
                } else {
                    d
                }
            })
            .collect()
    }

    /// Orthonormal basis of the tangent space (metric-orthonormal on charts).
    pub fn tangent_basis(&self, p: &Point) -> Vec<Coords> {
        match &self.kind {
            ModelKind::RoundSphere { .. } | ModelKind::Ellipsoid { .. } => {
                let n = self.normal(p);
                let mut out: Vec<Coords> = Vec::new();
                let mut axes: Vec<usize> = (0..n.len()).collect();
                // start from the axes least aligned with the normal
                axes.sort_by(|&i, &j| n[i].abs().partial_cmp(&n[j].abs()).unwrap());
                for &k in &axes {
                    let mut e: Coords = smallvec::smallvec![0.0; n.len()];
                    e[k] = 1.0;
                    let c = dot(&e, &n);
                    for i in 0..n.len() {
                        e[i] -= c * n[i];
                    }
                    for b in &out {
                        let c = dot(&e, b);
                        for i in 0..n.len() {
                            e[i] -= c * b[i];
                        }
                    }
                    let en = norm(&e);
                    if en > 1e-6 {
                        out.push(e.iter().map(|c| c / en).collect());
                    }
                    if out.len() == self.dim {
                        break;
                    }
                }
                out
            }
            ModelKind::FlatTorus { periods } => (0..periods.len())
                .map(|k| {
                    let mut e: Coords = smallvec::smallvec![0.0; periods.len()];
                    e[k] = 1.0;
                    e
                })
                .collect(),
            ModelKind::ParamSurface(s) => {
                let [e, f, g] = s.metric(p[0], p[1]);
                let e1 = smallvec::smallvec![1.0 / e.sqrt(), 0.0];
                // Gram-Schmidt of ∂v against e1 in the metric
                let c = f / e.sqrt();
                let w = [-c / e.sqrt(), 1.0];
                let wn = (e * w[0] * w[0] + 2.0 * f * w[0] * w[1] + g * w[1] * w[1]).sqrt();
                vec![e1, smallvec::smallvec![w[0] / wn, w[1] / wn]]
            }
        }
    }

    /// Projects an ambient vector onto the tangent space at `p`.
    pub fn to_tangent(&self, p: &Point, v: &[f64]) -> Coords {
        if self.is_embedded() {
            let n = self.normal(p);
            let c = dot(v, &n);
            v.iter().zip(&n).map(|(a, b)| a - c * b).collect()
        } else {
            v.iter().copied().collect()
        }
    }

    /// Retraction: moves `p` by the tangent vector `v` and returns to the model.
    pub fn perturb(&self, p: &Point, v: &[f64]) -> Point {
        let x: Coords = p.iter().zip(v).map(|(a, b)| a + b).collect();
        self.project(&x)
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match &self.kind {
            ModelKind::RoundSphere { .. } | ModelKind::Ellipsoid { .. } => {
                let n = self.coord_dim();
                loop {
                    let x: Coords = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let r = norm(&x);
                    if r > 1e-3 && r <= 1.0 {
                        let x: Coords = match &self.kind {
                            ModelKind::Ellipsoid { semi_axes } => {
                                x.iter().zip(semi_axes).map(|(c, a)| c * a).collect()
                            }
                            _ => x,
                        };
                        return self.project(&x);
                    }
                }
            }
            _ => {
                let per = self.periods().unwrap().to_vec();
                let x: Coords = per
                    .iter()
                    .map(|t| if *t > 0.0 { rng.gen_range(0.0..*t) } else { 0.0 })
                    .collect();
                self.project(&x)
            }
        }
    }

    pub fn random_unit_tangent<R: Rng + ?Sized>(&self, p: &Point, rng: &mut R) -> Coords {
        let basis = self.tangent_basis(p);
        loop {
            let c: Vec<f64> = basis.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = norm(&c);
            if r > 1e-3 && r <= 1.0 {
                let mut v: Coords = smallvec::smallvec![0.0; p.dim()];
                for (ck, b) in c.iter().zip(&basis) {
                    for i in 0..v.len() {
                        v[i] += ck / r * b[i];
                    }
                }
                return v;
            }
        }
    }

    // ---- distance ---------------------------------------------------------

    /// Length of the minimal geodesic between neighbouring breakpoints.
    ///
    /// Exact on sphere and torus. On shooting models this is the local
    /// two-point solve; should that fail, the returned value is the length of
    /// the projected chord path, which is still the length of a real curve.
    pub fn seg_len(&self, p: &Point, q: &Point) -> f64 {
        match &self.kind {
            ModelKind::RoundSphere { radius, .. } => sphere_dist(p, q, *radius),
            ModelKind::FlatTorus { .. } => norm(&self.chart_delta(p, q)),
            _ => match self.local_solve(p, q) {
                Ok((_, d)) => d,
                Err(_) => self.chord_path_len(p, q, 64),
            },
        }
    }

    /// Riemannian distance.
    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        match &self.kind {
            ModelKind::RoundSphere { .. } | ModelKind::FlatTorus { .. } => Ok(self.seg_len(p, q)),
            _ => {
                if p == q {
                    return Ok(0.0);
                }
                Ok(self.solve_two_point(p, q)?.1)
            }
        }
    }

    /// Point at fraction `t` of the minimal geodesic from `p` to `q`, which are
    /// assumed to lie within the injectivity margin of each other (any pair on
    /// sphere and torus). `t = 0` and `t = 1` return the endpoints exactly.
    pub fn interpolate(&self, p: &Point, q: &Point, t: f64) -> Point {
        if t <= 0.0 {
            return p.clone();
        }
        if t >= 1.0 {
            return q.clone();
        }
        match &self.kind {
            ModelKind::RoundSphere { radius, .. } => sphere_interp(p, q, *radius, t),
            ModelKind::FlatTorus { .. } => {
                let d = self.chart_delta(p, q);
                let x: Coords = p.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                self.project(&x)
            }
            _ => match self.local_solve(p, q) {
                Ok((v, d)) => {
                    let steps = ((d * t / SHOOT_H).ceil() as usize).max(8);
                    let vt: Coords = v.iter().map(|c| c * t).collect();
                    match ode::shoot(self, p, &vt, steps) {
                        Ok(x) => self.project(&x[..p.dim()]),
                        Err(_) => self.chord_point(p, q, t),
                    }
                }
                Err(_) => self.chord_point(p, q, t),
            },
        }
    }

    pub fn midpoint(&self, p: &Point, q: &Point) -> Point {
        self.interpolate(p, q, 0.5)
    }

    fn chord_point(&self, p: &Point, q: &Point, t: f64) -> Point {
        if self.is_embedded() {
            let x: Coords = p.iter().zip(q.iter()).map(|(a, b)| a + t * (b - a)).collect();
            self.project(&x)
        } else {
            let d = self.chart_delta(p, q);
            let x: Coords = p.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            self.project(&x)
        }
    }

    fn chord_path_len(&self, p: &Point, q: &Point, n: usize) -> f64 {
        let mut prev = p.clone();
        let mut total = 0.0;
        for k in 1..=n {
            let x = self.chord_point(p, q, k as f64 / n as f64);
            total += self.approx_len(&prev, &x);
            prev = x;
        }
        total
    }

    /// First-order length of a short step (chord or midpoint-metric length).
    fn approx_len(&self, p: &Point, q: &Point) -> f64 {
        match &self.kind {
            ModelKind::ParamSurface(s) => {
                let d = self.chart_delta(p, q);
                let [e, f, g] = s.metric(p[0] + 0.5 * d[0], p[1] + 0.5 * d[1]);
                (e * d[0] * d[0] + 2.0 * f * d[0] * d[1] + g * d[1] * d[1]).sqrt()
            }
            ModelKind::FlatTorus { .. } => norm(&self.chart_delta(p, q)),
            _ => dist_euclid(p, q),
        }
    }

    // ---- geodesics --------------------------------------------------------

    /// Traces the unit-speed geodesic from `t.base` along `t.dir` for length
    /// `arc` with fixed-step RK4. Breakpoints are spaced evenly, at most half
    /// the margin apart.
    pub fn trace_geodesic(self: &Arc<Self>, t: &Tangent, arc: f64) -> Result<PLCurve> {
        let base = t.base.clone();
        if !(arc > 0.0) {
            return Ok(PLCurve::constant(self.clone(), base));
        }
        let dir = self.to_tangent(&base, &t.dir);
        let s = ode::speed2(self, &base, &dir).sqrt();
        if !(s > 0.0) || !s.is_finite() {
            return Err(GeoError::InvalidPoint("zero or non-finite direction".into()));
        }
        let v0: Coords = dir.iter().map(|c| c / s).collect();
        let segs = (arc / (0.5 * self.margin)).ceil().max(1.0) as usize;
        let per_seg = ((arc / self.step).ceil() as usize).div_ceil(segs).max(1);
        let steps = segs * per_seg;
        let h = arc / steps as f64;
        let mut pts = Vec::with_capacity(segs + 1);
        pts.push(base.clone());
        ode::integrate(self, &base, &v0, steps, h, |k, x| {
            if k % per_seg == 0 {
                pts.push(self.project(x));
            }
        })?;
        PLCurve::new(self.clone(), pts)
    }

    /// A minimal geodesic from `p` to `q` as a curve with breakpoints at most
    /// half the margin apart.
    pub fn minimal_geodesic(self: &Arc<Self>, p: &Point, q: &Point) -> Result<PLCurve> {
        if p == q {
            return Ok(PLCurve::constant(self.clone(), p.clone()));
        }
        match &self.kind {
            ModelKind::RoundSphere { .. } | ModelKind::FlatTorus { .. } => {
                let d = self.seg_len(p, q);
                let k = (d / (0.5 * self.margin)).ceil().max(1.0) as usize;
                let mut pts = Vec::with_capacity(k + 1);
                pts.push(p.clone());
                for i in 1..k {
                    pts.push(self.interpolate(p, q, i as f64 / k as f64));
                }
                pts.push(q.clone());
                PLCurve::new(self.clone(), pts)
            }
            _ => {
                let (v, d) = self.solve_two_point(p, q)?;
                let s = ode::speed2(self, p, &v).sqrt();
                let dir: Coords = v.iter().map(|c| c / s).collect();
                let traced = self.trace_geodesic(&Tangent { base: p.clone(), dir }, d)?;
                let mut pts = traced.points().to_vec();
                *pts.last_mut().unwrap() = q.clone();
                PLCurve::new(self.clone(), pts)
            }
        }
    }

    /// Residual of shooting with velocity `v` (time 1) from `p` towards `q`.
    fn shoot_residual(&self, p: &Point, v: &[f64], q: &Point) -> Result<Coords> {
        let len = ode::speed2(self, p, v).sqrt();
        let steps = ((len / SHOOT_H).ceil() as usize).max(8);
        let x = ode::shoot(self, p, v, steps)?;
        let x = &x[..p.dim()];
        Ok(if self.is_embedded() {
            x.iter().zip(q.iter()).map(|(a, b)| a - b).collect()
        } else {
            // wrapped difference from target
            self.chart_delta(q, x)
        })
    }

    /// Gauss–Newton on the tangent coordinates of the initial velocity.
    fn gauss_newton(&self, p: &Point, q: &Point, v0: &[f64]) -> Result<(Coords, f64)> {
        let basis = self.tangent_basis(p);
        let k = basis.len();
        let to_v = |c: &[f64]| -> Coords {
            let mut v: Coords = smallvec::smallvec![0.0; p.dim()];
            for (ci, b) in c.iter().zip(&basis) {
                for i in 0..v.len() {
                    v[i] += ci * b[i];
                }
            }
            v
        };
        // coordinates of v0 in the basis (basis is orthonormal in the metric)
        let mut c: Vec<f64> = match &self.kind {
            ModelKind::ParamSurface(_) => {
                // solve [b1 b2] c = v0
                let (a, b, cc, d) = (basis[0][0], basis[1][0], basis[0][1], basis[1][1]);
                let det = a * d - b * cc;
                vec![(d * v0[0] - b * v0[1]) / det, (-cc * v0[0] + a * v0[1]) / det]
            }
            _ => basis.iter().map(|b| dot(b, v0)).collect(),
        };
        let mut r = self.shoot_residual(p, &to_v(&c), q)?;
        let mut rn = norm(&r);
        for _ in 0..40 {
            if rn < GN_TOL {
                break;
            }
            let cn = norm(&c).max(1.0);
            let fd = 1e-7 * cn;
            let mut jac = DMatrix::<f64>::zeros(r.len(), k);
            for j in 0..k {
                let mut cj = c.clone();
                cj[j] += fd;
                let rj = self.shoot_residual(p, &to_v(&cj), q)?;
                for i in 0..r.len() {
                    jac[(i, j)] = (rj[i] - r[i]) / fd;
                }
            }
            let rhs = DVector::from_iterator(r.len(), r.iter().map(|x| -x));
            let svd = jac.svd(true, true);
            let step = svd
                .solve(&rhs, 1e-14)
                .map_err(|_| GeoError::ShootingFailed { residual: rn })?;
            let mut lam = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let ct: Vec<f64> = c.iter().zip(step.iter()).map(|(a, b)| a + lam * b).collect();
                if let Ok(rt) = self.shoot_residual(p, &to_v(&ct), q) {
                    let rtn = norm(&rt);
                    if rtn < rn {
                        c = ct;
                        r = rt;
                        rn = rtn;
                        improved = true;
                        break;
                    }
                }
                lam *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if rn > 1e-8 {
            return Err(GeoError::ShootingFailed { residual: rn });
        }
        let v = to_v(&c);
        let len = ode::speed2(self, p, &v).sqrt();
        Ok((v, len))
    }

    /// Two-point solve for nearby points, started from the chord direction.
    fn local_solve(&self, p: &Point, q: &Point) -> Result<(Coords, f64)> {
        if p == q {
            return Ok((smallvec::smallvec![0.0; p.dim()], 0.0));
        }
        let guess: Coords = if self.is_embedded() {
            let d: Coords = q.iter().zip(p.iter()).map(|(a, b)| a - b).collect();
            let t = self.to_tangent(p, &d);
            let tn = norm(&t);
            t.iter().map(|c| c * norm(&d) / tn).collect()
        } else {
            self.chart_delta(p, q)
        };
        self.gauss_newton(p, q, &guess)
    }

    /// Global two-point solve: returns the initial velocity (time-1
    /// parametrisation) and the length of the chosen minimal geodesic.
    fn solve_two_point(&self, p: &Point, q: &Point) -> Result<(Coords, f64)> {
        let near = self.approx_len(p, q) < self.margin;
        let mut best: Option<(Coords, f64)> = None;
        let mut worst_res = f64::INFINITY;
        if near {
            if let Ok(sol) = self.local_solve(p, q) {
                return Ok(sol);
            }
        }
        let basis = self.tangent_basis(p);
        let reach = 1.25 * self.diameter_bound + self.margin;
        let steps = (reach / SHOOT_H).ceil() as usize;
        let h = reach / steps as f64;
        for idx in 0..SHOOTING_DIRECTIONS {
            let dir = shooting_direction(&basis, idx, p.dim());
            // closest approaches along the ray
            let mut track: Vec<f64> = Vec::with_capacity(steps + 1);
            track.push(self.approx_len(p, q));
            let res = ode::integrate(self, p, &dir, steps, h, |_, x| {
                let xp = Point(x.iter().copied().collect());
                let xp = self.project(&xp);
                track.push(if self.is_embedded() {
                    dist_euclid(&xp, q)
                } else {
                    norm(&self.chart_delta(&xp, q))
                });
            });
            if res.is_err() {
                continue;
            }
            let mut cands = Vec::new();
            for i in 1..track.len().saturating_sub(1) {
                if track[i] <= track[i - 1] && track[i] < track[i + 1] && track[i] < 0.5 {
                    cands.push(i as f64 * h);
                    if cands.len() == 3 {
                        break;
                    }
                }
            }
            for s in cands {
                if let Some((_, bl)) = &best {
                    if s > bl + 0.25 {
                        continue;
                    }
                }
                let v0: Coords = dir.iter().map(|c| c * s).collect();
                match self.gauss_newton(p, q, &v0) {
                    Ok((v, len)) => {
                        let better = match &best {
                            None => true,
                            Some((_, bl)) => len < bl - 1e-9 * (1.0 + bl),
                        };
                        if better {
                            best = Some((v, len));
                        }
                    }
                    Err(GeoError::ShootingFailed { residual }) => {
                        worst_res = worst_res.min(residual)
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        best.ok_or(GeoError::ShootingFailed {
            residual: worst_res,
        })
    }

    /// Largest sampled distance; errors when it exceeds the diameter bound.
    pub fn validate_diameter<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let p = self.random_point(rng);
            let q = self.random_point(rng);
            worst = worst.max(self.distance(&p, &q)?);
        }
        if worst > self.diameter_bound + 1e-6 {
            return Err(GeoError::Config(format!(
                "sampled distance {worst} exceeds diameter bound {}",
                self.diameter_bound
            )));
        }
        Ok(worst)
    }
}

fn shooting_direction(basis: &[Coords], idx: usize, n: usize) -> Coords {
    let mut v: Coords = smallvec::smallvec![0.0; n];
    if basis.len() == 2 {
        let th = 2.0 * PI * idx as f64 / SHOOTING_DIRECTIONS as f64;
        for i in 0..n {
            v[i] = th.cos() * basis[0][i] + th.sin() * basis[1][i];
        }
    } else {
        // golden-angle spiral on the unit sphere of a 3-D tangent space
        let k = basis.len();
        let z = 1.0 - 2.0 * (idx as f64 + 0.5) / SHOOTING_DIRECTIONS as f64;
        let r = (1.0 - z * z).sqrt();
        let th = idx as f64 * PI * (3.0 - 5f64.sqrt());
        let c = [r * th.cos(), r * th.sin(), z];
        for (j, b) in basis.iter().enumerate().take(k.min(3)) {
            for i in 0..n {
                v[i] += c[j] * b[i];
            }
        }
    }
    v
}

#[inline]
fn wrap(c: f64, per: f64) -> f64 {
    if per <= 0.0 {
        return c;
    }
    let w = c - per * (c / per).floor();
    if w >= per || w < 0.0 {
        0.0
    } else {
        w
    }
}

#[inline]
pub(crate) fn sphere_dist(p: &[f64], q: &[f64], r: f64) -> f64 {
    let mut pq = 0.0;
    let mut dm = 0.0;
    let mut dp = 0.0;
    for (a, b) in p.iter().zip(q) {
        pq += a * b;
        dm += (a - b) * (a - b);
        dp += (a + b) * (a + b);
    }
    if pq >= 0.0 {
        2.0 * r * (dm.sqrt() / (2.0 * r)).min(1.0).asin()
    } else {
        r * (PI - 2.0 * (dp.sqrt() / (2.0 * r)).min(1.0).asin())
    }
}

fn sphere_interp(p: &Point, q: &Point, r: f64, t: f64) -> Point {
    let theta = sphere_dist(p, q, r) / r;
    let r2 = r * r;
    let c = dot(p, q) / r2;
    let mut u: Coords = q.iter().zip(p.iter()).map(|(b, a)| b - c * a).collect();
    let mut un = norm(&u);
    if un < 1e-12 * r {
        if theta < 0.5 * PI {
            return p.clone();
        }
        // antipodal: a deterministic direction orthogonal to p
        let k = (0..p.dim())
            .min_by(|&i, &j| p[i].abs().partial_cmp(&p[j].abs()).unwrap())
            .unwrap();
        u = smallvec::smallvec![0.0; p.dim()];
        u[k] = 1.0;
        let c = p[k] / r2;
        for i in 0..p.dim() {
            u[i] -= c * p[i];
        }
        un = norm(&u);
    }
    let (s, co) = (t * theta).sin_cos();
    let x: Coords = p
        .iter()
        .zip(&u)
        .map(|(a, b)| co * a + s * r * b / un)
        .collect();
    // renormalise to kill round-off drift
    let n = norm(&x);
    Point(x.iter().map(|c| c * r / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(c: &[f64]) -> Point {
        Point::new(c)
    }

    #[test]
    fn sphere_trace_reaches_antipode() {
        let m = ManifoldModel::unit_sphere().shared();
        let c = m
            .trace_geodesic(&Tangent::new(p(&[0., 0., 1.]), &[1., 0., 0.]), PI)
            .unwrap();
        let end = c.end();
        assert!(dist_euclid(end, &[0., 0., -1.]) < 1e-6);
    }

    #[test]
    fn zero_arc_is_constant() {
        let m = ManifoldModel::unit_sphere().shared();
        let c = m
            .trace_geodesic(&Tangent::new(p(&[0., 0., 1.]), &[1., 0., 0.]), 0.0)
            .unwrap();
        assert!(c.is_constant());
    }

    #[test]
    fn torus_trace_is_straight() {
        let m = ManifoldModel::flat_torus(&[1., 1.]).unwrap().shared();
        let c = m
            .trace_geodesic(&Tangent::new(p(&[0.2, 0.2]), &[1., 0.]), 0.5)
            .unwrap();
        assert!(dist_euclid(c.end(), &[0.7, 0.2]) < 1e-9);
    }

    #[test]
    fn trace_speed_is_constant() {
        let m = ManifoldModel::ellipsoid(&[1.0, 1.0, 1.2]).unwrap().shared();
        let base = m.project(&[0.3, 0.4, 0.8]);
        let c = m
            .trace_geodesic(&Tangent::new(base.clone(), &[1.0, -0.5, 0.1]), 2.0)
            .unwrap();
        let gaps: Vec<f64> = c.points().windows(2).map(|w| m.seg_len(&w[0], &w[1])).collect();
        let g0 = gaps[0];
        for g in gaps {
            assert!((g - g0).abs() / g0 < 1e-6, "{g} vs {g0}");
        }
        assert_abs_diff_eq!(c.length(), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn minimal_geodesic_examples() {
        let s = ManifoldModel::unit_sphere().shared();
        let g = s.minimal_geodesic(&p(&[0., 0., 1.]), &p(&[0., 0., -1.])).unwrap();
        assert_abs_diff_eq!(g.length(), PI, epsilon = 1e-4);
        let g = s.minimal_geodesic(&p(&[1., 0., 0.]), &p(&[0., 1., 0.])).unwrap();
        assert_abs_diff_eq!(g.length(), PI / 2.0, epsilon = 1e-6);
        let t = ManifoldModel::flat_torus(&[1., 1.]).unwrap().shared();
        let g = t.minimal_geodesic(&p(&[0.1, 0.]), &p(&[0.9, 0.])).unwrap();
        assert_abs_diff_eq!(g.length(), 0.2, epsilon = 1e-6);
    }

    #[test]
    fn sphere_distance_trivia() {
        let s = ManifoldModel::unit_sphere();
        let a = p(&[0.6, 0.0, 0.8]);
        assert_eq!(s.distance(&a, &a).unwrap(), 0.0);
        let b = p(&[-0.6, 0.0, -0.8]);
        assert_abs_diff_eq!(s.distance(&a, &b).unwrap(), PI, epsilon = 1e-12);
    }

    #[test]
    fn interpolate_endpoints_exact() {
        let s = ManifoldModel::unit_sphere();
        let a = s.project(&[0.3, 0.1, 0.9]);
        let b = s.project(&[0.2, 0.5, 0.7]);
        assert_eq!(s.interpolate(&a, &b, 0.0), a);
        assert_eq!(s.interpolate(&a, &b, 1.0), b);
        let m = s.midpoint(&a, &b);
        assert_abs_diff_eq!(s.seg_len(&a, &m), s.seg_len(&m, &b), epsilon = 1e-12);
    }

    #[test]
    fn antipodal_interpolation_is_deterministic_and_on_sphere() {
        let s = ManifoldModel::unit_sphere();
        let a = p(&[0., 0., 1.]);
        let b = p(&[0., 0., -1.]);
        let m1 = s.midpoint(&a, &b);
        let m2 = s.midpoint(&a, &b);
        assert_eq!(m1, m2);
        assert_abs_diff_eq!(norm(&m1), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.seg_len(&a, &m1), PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ellipsoid_local_distance_agrees_with_refined_chord_path() {
        let m = ManifoldModel::ellipsoid(&[1.0, 1.0, 1.2]).unwrap();
        let a = m.project(&[0.5, 0.2, 0.7]);
        let b = m.project(&[0.53, 0.25, 0.68]);
        let d = m.seg_len(&a, &b);
        let upper = m.chord_path_len(&a, &b, 200);
        assert!(d <= upper + 1e-9);
        assert!((upper - d) / d < 1e-4);
    }

    #[test]
    fn ellipsoid_global_distance_between_poles() {
        let m = ManifoldModel::ellipsoid(&[1.0, 1.0, 1.2]).unwrap().shared();
        let n = p(&[0., 0., 1.2]);
        let s = p(&[0., 0., -1.2]);
        let g = m.minimal_geodesic(&n, &s).unwrap();
        // half a meridian ellipse with semi-axes 1 and 1.2
        let d = m.distance(&n, &s).unwrap();
        assert_abs_diff_eq!(g.length(), d, epsilon = 1e-4 * d);
        assert!(d > PI && d < 1.2 * PI);
    }

    #[test]
    fn validate_diameter_on_sphere() {
        let m = ManifoldModel::unit_sphere();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = m.validate_diameter(200, &mut rng).unwrap();
        assert!(w <= PI);
    }

    #[test]
    fn unit_sphere_ricci_floor() {
        assert_eq!(ManifoldModel::round_sphere(3, 1.0).unwrap().ricci_floor, 2.0);
        assert_eq!(ManifoldModel::unit_sphere().ricci_floor, 1.0);
    }

    #[test]
    fn spec_roundtrip() {
        let m = ManifoldModel::flat_torus(&[1.0, 2.0]).unwrap();
        let js = serde_json::to_string(&m.spec()).unwrap();
        let back: ManifoldSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(back, m.spec());
        let m2 = back.build().unwrap();
        assert_eq!(m2.diameter_bound, m.diameter_bound);
    }
}
