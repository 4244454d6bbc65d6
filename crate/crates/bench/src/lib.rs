//! Fixed inputs shared by the benches.

use std::sync::Arc;

use geoloop_core::{generators, LoopAt, ManifoldModel, PLCurve};

pub fn sphere() -> Arc<ManifoldModel> {
    ManifoldModel::unit_sphere().shared()
}

/// The seeded length-7 curve of the desk-scale sphere run.
pub fn wiggle(len: f64) -> Arc<PLCurve> {
    let m = sphere();
    let p = m.project(&[0.6, 0.0, 0.8]);
    Arc::new(generators::random_wiggle(&m, &p, len, 7).unwrap())
}

/// A based loop at the north pole through `k` points on a ring.
pub fn ring_loop(k: usize) -> LoopAt {
    let m = sphere();
    let p = m.project(&[0.0, 0.0, 1.0]);
    let mut way = vec![p.clone()];
    for i in 0..k {
        let t = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
        let r = 0.5 + 0.2 * (i % 2) as f64;
        way.push(m.project(&[r * t.cos(), r * t.sin(), 0.8]));
    }
    way.push(p);
    LoopAt::new(PLCurve::from_waypoints(m, &way).unwrap()).unwrap()
}
