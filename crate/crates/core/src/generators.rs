//! Named curve and family generators used by scenes and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::curve::PLCurve;
use crate::error::{GeoError, Result};
use crate::manifold::{ManifoldModel, ModelKind};
use crate::point::{dot, Point, Tangent};
use crate::theorem_b::{LoopFamily, LoopGenerator};

fn polar(m: &ManifoldModel, theta: f64, phi: f64) -> Point {
    if theta >= PI {
        let mut x = vec![0.0; m.coord_dim()];
        x[2] = -1.0;
        return m.project(&x);
    }
    let mut x = vec![0.0; m.coord_dim()];
    x[0] = theta.sin() * phi.cos();
    x[1] = theta.sin() * phi.sin();
    x[2] = theta.cos();
    m.project(&x)
}

fn embedded_scale(m: &ManifoldModel) -> Result<f64> {
    match &m.kind {
        ModelKind::RoundSphere { radius, .. } => Ok(*radius),
        ModelKind::Ellipsoid { semi_axes } => Ok(semi_axes.iter().copied().fold(0.0, f64::max)),
        _ => Err(GeoError::Config("meridian loops need a sphere or an ellipsoid".into())),
    }
}

/// The loop at the north pole that runs down the meridian at longitude 0 to
/// the south pole and back up the meridian at longitude `2πt`. At `t = 0, 1`
/// it retraces one meridian; as `t` runs once around, the loops sweep the
/// surface once.
pub fn meridian_loop(m: &Arc<ManifoldModel>, t: f64) -> Result<PLCurve> {
    let scale = embedded_scale(m)?;
    let k = (PI * scale / (0.4 * m.margin)).ceil() as usize;
    let phi = 2.0 * PI * t.rem_euclid(1.0);
    let mut pts = Vec::with_capacity(2 * k + 1);
    for i in 0..=k {
        pts.push(polar(m, PI * i as f64 / k as f64, 0.0));
    }
    for i in (0..k).rev() {
        pts.push(polar(m, PI * i as f64 / k as f64, phi));
    }
    PLCurve::new(m.clone(), pts)
}

/// The meridian sweep-out with `nodes` equally spaced loops.
pub fn meridian_sweep(m: &Arc<ManifoldModel>, nodes: usize, epsilon: f64) -> Result<LoopFamily> {
    if nodes < 2 {
        return Err(GeoError::Config("a sweep needs at least two nodes".into()));
    }
    let ts: Vec<f64> = (0..nodes).map(|i| i as f64 / nodes as f64).collect();
    let loops = ts
        .iter()
        .map(|&t| meridian_loop(m, t).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let mm = m.clone();
    let gen: LoopGenerator = Arc::new(move |t| meridian_loop(&mm, t));
    Ok(LoopFamily::new(ts, loops, true, epsilon)?.with_generator(gen))
}

/// A seeded random curve from `p` of exactly `target_length`: geodesic
/// pieces of random length joined at random turning angles.
pub fn random_wiggle(m: &Arc<ManifoldModel>, p: &Point, target_length: f64, seed: u64) -> Result<PLCurve> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut curve = PLCurve::constant(m.clone(), p.clone());
    let mut dir = m.random_unit_tangent(p, &mut rng);
    while curve.length() < target_length {
        let arc = rng.gen_range(0.4..0.9);
        let piece = m.trace_geodesic(&Tangent::new(curve.end().clone(), &dir), arc)?;
        let n = piece.n_points();
        let (a, b) = (&piece.points()[n - 2], &piece.points()[n - 1]);
        let d: Vec<f64> = if m.is_embedded() {
            b.iter().zip(a.iter()).map(|(x, y)| x - y).collect()
        } else {
            m.chart_delta(a, b).to_vec()
        };
        let d = m.to_tangent(b, &d);
        let mut w = m.random_unit_tangent(b, &mut rng);
        let c = dot(&w, &d) / dot(&d, &d);
        for (wi, di) in w.iter_mut().zip(d.iter()) {
            *wi -= c * di;
        }
        let (dn, wn) = (dot(&d, &d).sqrt(), dot(&w, &w).sqrt());
        let th: f64 = rng.gen_range(0.6..1.6) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        dir = d
            .iter()
            .zip(w.iter())
            .map(|(x, y)| th.cos() * x / dn + th.sin() * y / wn.max(1e-300))
            .collect();
        curve = curve.concat(&piece)?;
    }
    curve.subcurve(0.0, target_length)
}

/// A curve through explicit breakpoints, joined by minimal geodesics.
pub fn explicit(m: &Arc<ManifoldModel>, breakpoints: &[Vec<f64>]) -> Result<PLCurve> {
    if breakpoints.is_empty() {
        return Err(GeoError::Config("no breakpoints".into()));
    }
    if m.is_embedded() {
        let pts: Vec<Point> = breakpoints.iter().map(|x| m.project(x)).collect();
        PLCurve::from_waypoints(m.clone(), &pts)
    } else {
        PLCurve::from_cover_polyline(m.clone(), breakpoints)
    }
}
