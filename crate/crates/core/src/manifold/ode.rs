//! Fixed-step RK4 for the geodesic equation of every model.
//!
//! State is (x, v) with x in embedding or chart coordinates. After each step the
//! state is pulled back onto the model (projection for embedded models, speed
//! renormalisation for all) so long traces keep constant speed to round-off.

use super::{ManifoldModel, ModelKind};
use crate::error::{GeoError, Result};
use crate::point::{dot, Point};

const MAXD: usize = 4;

type Vec4 = [f64; MAXD];

fn accel(m: &ManifoldModel, x: &Vec4, v: &Vec4, n: usize, out: &mut Vec4) {
    match &m.kind {
        ModelKind::RoundSphere { radius, .. } => {
            let vv: f64 = (0..n).map(|i| v[i] * v[i]).sum();
            let k = vv / (radius * radius);
            for i in 0..n {
                out[i] = -k * x[i];
            }
        }
        ModelKind::Ellipsoid { semi_axes } => {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n {
                let a2 = semi_axes[i] * semi_axes[i];
                num += v[i] * v[i] / a2;
                den += x[i] * x[i] / (a2 * a2);
            }
            let mu = num / den;
            for i in 0..n {
                out[i] = -mu * x[i] / (semi_axes[i] * semi_axes[i]);
            }
        }
        ModelKind::FlatTorus { .. } => {
            for o in out.iter_mut().take(n) {
                *o = 0.0;
            }
        }
        ModelKind::ParamSurface(s) => {
            let g = s.christoffel(x[0], x[1]);
            // g[k][i][j] = Γ^k_ij
            for k in 0..2 {
                out[k] = -(g[k][0][0] * v[0] * v[0]
                    + 2.0 * g[k][0][1] * v[0] * v[1]
                    + g[k][1][1] * v[1] * v[1]);
            }
        }
    }
}

/// Squared speed of `v` at `x` in the model metric.
pub(crate) fn speed2(m: &ManifoldModel, x: &[f64], v: &[f64]) -> f64 {
    match &m.kind {
        ModelKind::ParamSurface(s) => {
            let [e, f, g] = s.metric(x[0], x[1]);
            e * v[0] * v[0] + 2.0 * f * v[0] * v[1] + g * v[1] * v[1]
        }
        _ => dot(v, v),
    }
}

fn stabilise(m: &ManifoldModel, x: &mut Vec4, v: &mut Vec4, n: usize, s2: f64) {
    match &m.kind {
        ModelKind::RoundSphere { .. } | ModelKind::Ellipsoid { .. } => {
            let p = m.project(&x[..n]);
            x[..n].copy_from_slice(&p);
            let nrm = m.normal(&x[..n]);
            let c = dot(&v[..n], &nrm);
            for i in 0..n {
                v[i] -= c * nrm[i];
            }
        }
        _ => {}
    }
    let cur = speed2(m, &x[..n], &v[..n]);
    if cur > 0.0 && s2 > 0.0 {
        let k = (s2 / cur).sqrt();
        for vi in v.iter_mut().take(n) {
            *vi *= k;
        }
    }
}

/// Integrates `steps` RK4 steps of size `h` from `(x0, v0)`, calling `record`
/// after every step with the step index (1-based) and position. Returns the
/// final position and velocity. Chart coordinates are *not* wrapped here; the
/// caller canonicalises.
pub(crate) fn integrate(
    m: &ManifoldModel,
    x0: &[f64],
    v0: &[f64],
    steps: usize,
    h: f64,
    mut record: impl FnMut(usize, &[f64]),
) -> Result<(Vec4, Vec4)> {
    let n = x0.len();
    debug_assert!(n <= MAXD);
    let mut x = [0.0; MAXD];
    let mut v = [0.0; MAXD];
    x[..n].copy_from_slice(x0);
    v[..n].copy_from_slice(v0);
    let s2 = speed2(m, x0, v0);
    let (mut k1x, mut k1v) = ([0.0; MAXD], [0.0; MAXD]);
    let (mut k2v, mut k3v, mut k4v) = ([0.0; MAXD], [0.0; MAXD], [0.0; MAXD]);
    let mut xt = [0.0; MAXD];
    let mut vt = [0.0; MAXD];
    for step in 1..=steps {
        k1x[..n].copy_from_slice(&v[..n]);
        accel(m, &x, &v, n, &mut k1v);
        for i in 0..n {
            xt[i] = x[i] + 0.5 * h * k1x[i];
            vt[i] = v[i] + 0.5 * h * k1v[i];
        }
        let k2x = vt;
        accel(m, &xt, &vt, n, &mut k2v);
        for i in 0..n {
            xt[i] = x[i] + 0.5 * h * k2x[i];
            vt[i] = v[i] + 0.5 * h * k2v[i];
        }
        let k3x = vt;
        accel(m, &xt, &vt, n, &mut k3v);
        for i in 0..n {
            xt[i] = x[i] + h * k3x[i];
            vt[i] = v[i] + h * k3v[i];
        }
        let k4x = vt;
        accel(m, &xt, &vt, n, &mut k4v);
        for i in 0..n {
            x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        if !x[..n].iter().chain(&v[..n]).all(|c| c.is_finite()) {
            return Err(GeoError::NonFiniteState { steps: step });
        }
        stabilise(m, &mut x, &mut v, n, s2);
        record(step, &x[..n]);
    }
    Ok((x, v))
}

/// Endpoint of the geodesic with initial velocity `v0` at time 1, using `steps`
/// uniform steps. Used by the shooting solvers.
pub(crate) fn shoot(m: &ManifoldModel, x0: &Point, v0: &[f64], steps: usize) -> Result<Vec4> {
    let (x, _) = integrate(m, x0, v0, steps, 1.0 / steps as f64, |_, _| {})?;
    Ok(x)
}
