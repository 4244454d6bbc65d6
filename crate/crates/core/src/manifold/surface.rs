//! Surfaces given by metric coefficients (E, F, G) on a 2-D chart.

use std::fmt;
use std::sync::Arc;

pub type MetricFn = Arc<dyn Fn(f64, f64) -> [f64; 3] + Send + Sync>;

/// A chart `(u, v)` with metric `E du² + 2F du dv + G dv²`. A period of zero
/// means the coordinate does not wrap.
#[derive(Clone)]
pub struct ParamSurface {
    pub name: String,
    pub params: Vec<f64>,
    pub periods: [f64; 2],
    metric: MetricFn,
}

impl fmt::Debug for ParamSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParamSurface")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("periods", &self.periods)
            .finish()
    }
}

const FD_H: f64 = 1e-5;

impl ParamSurface {
    pub fn new(name: &str, params: Vec<f64>, periods: [f64; 2], metric: MetricFn) -> Self {
        ParamSurface {
            name: name.to_string(),
            params,
            periods,
            metric,
        }
    }

    /// Torus of revolution with tube centre radius `big_r` and tube radius `r`;
    /// `u` runs along the tube, `v` around it.
    pub fn torus_of_revolution(big_r: f64, r: f64) -> Self {
        let tau = std::f64::consts::TAU;
        ParamSurface::new(
            "torus_of_revolution",
            vec![big_r, r],
            [tau, tau],
            Arc::new(move |_u, v| {
                let w = big_r + r * v.cos();
                [w * w, 0.0, r * r]
            }),
        )
    }

    /// The flat metric on a rectangle chart; a chart-side twin of the flat torus.
    pub fn flat(periods: [f64; 2]) -> Self {
        ParamSurface::new(
            "flat",
            vec![periods[0], periods[1]],
            periods,
            Arc::new(|_, _| [1.0, 0.0, 1.0]),
        )
    }

    pub fn from_preset(name: &str, params: &[f64]) -> Option<Self> {
        match (name, params) {
            ("torus_of_revolution", [big_r, r]) if *big_r > *r && *r > 0.0 => {
                Some(Self::torus_of_revolution(*big_r, *r))
            }
            ("flat", [a, b]) if *a > 0.0 && *b > 0.0 => Some(Self::flat([*a, *b])),
            _ => None,
        }
    }

    #[inline]
    pub fn metric(&self, u: f64, v: f64) -> [f64; 3] {
        (self.metric)(u, v)
    }

    /// Christoffel symbols `Γ^k_ij` from central differences of the metric.
    pub fn christoffel(&self, u: f64, v: f64) -> [[[f64; 2]; 2]; 2] {
        let [e, f, g] = self.metric(u, v);
        let mu = self.metric(u + FD_H, v);
        let md = self.metric(u - FD_H, v);
        let nu = self.metric(u, v + FD_H);
        let nd = self.metric(u, v - FD_H);
        // dg[l][i][j] = ∂_l g_ij
        let mut dg = [[[0.0; 2]; 2]; 2];
        for (l, (a, b)) in [(mu, md), (nu, nd)].into_iter().enumerate() {
            let d = [
                (a[0] - b[0]) / (2.0 * FD_H),
                (a[1] - b[1]) / (2.0 * FD_H),
                (a[2] - b[2]) / (2.0 * FD_H),
            ];
            dg[l] = [[d[0], d[1]], [d[1], d[2]]];
        }
        let det = e * g - f * f;
        let inv = [[g / det, -f / det], [-f / det, e / det]];
        let mut out = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut s = 0.0;
                    for l in 0..2 {
                        s += inv[k][l] * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]);
                    }
                    out[k][i][j] = 0.5 * s;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_metric_has_no_christoffels() {
        let s = ParamSurface::flat([1.0, 1.0]);
        let c = s.christoffel(0.3, 0.4);
        assert!(c.iter().flatten().flatten().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn torus_christoffels_match_closed_form() {
        let (big_r, r) = (2.0, 0.5);
        let s = ParamSurface::torus_of_revolution(big_r, r);
        let v = 0.7_f64;
        let c = s.christoffel(0.1, v);
        let w = big_r + r * v.cos();
        // Γ^u_uv = -r sin v / w, Γ^v_uu = w sin v / r
        assert!((c[0][0][1] + r * v.sin() / w).abs() < 1e-6);
        assert!((c[1][0][0] - w * v.sin() / r).abs() < 1e-6);
        assert!(c[1][1][1].abs() < 1e-9);
    }
}
