//! Scene files: which manifold, which initial curve or family, and the
//! shortening parameters.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

use geoloop_core::generators::{explicit, meridian_sweep, random_wiggle};
use geoloop_core::{LoopFamily, ManifoldModel, ManifoldSpec, PLCurve, Point, ShorteningParams, SlackPolicy};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Loops at the north pole down one meridian and up another.
    MeridianSweep { nodes: usize },
    /// Seeded random geodesic zigzag from `p`.
    RandomWiggle {
        target_length: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Breakpoints joined by minimal geodesics (cover coordinates on a torus).
    Explicit { breakpoints: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneParams {
    pub l: f64,
    pub a: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "default_m")]
    pub m: u32,
    /// Length bound of the input family; defaults to its longest loop.
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub big_l: Option<f64>,
}

fn default_k() -> f64 {
    1.5
}

fn default_m() -> u32 {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default = "default_curves")]
    pub curves: String,
    #[serde(default = "default_traces")]
    pub traces: String,
}

fn default_report() -> String {
    "report.json".into()
}
fn default_curves() -> String {
    "curves".into()
}
fn default_traces() -> String {
    "traces".into()
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            report: default_report(),
            curves: default_curves(),
            traces: default_traces(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub name: String,
    pub manifold: ManifoldSpec,
    /// Start point; required by `random_wiggle`, checked against the curve
    /// otherwise.
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    /// End point of a path scene, checked against the curve.
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    pub generator: GeneratorSpec,
    pub params: SceneParams,
    #[serde(default)]
    pub slack: SlackPolicy,
    #[serde(default)]
    pub seed: u64,
    /// Run the sweep-out minimax after a family run.
    #[serde(default = "default_true")]
    pub minimax: bool,
    #[serde(default)]
    pub outputs: Outputs,
}

/// What a scene asks to shorten.
pub enum Input {
    Curve(Arc<PLCurve>),
    Family(LoopFamily),
}

impl Scene {
    pub fn load(path: &Path) -> anyhow::Result<Scene> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let scene: Scene = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(scene)
    }

    pub fn model(&self) -> anyhow::Result<Arc<ManifoldModel>> {
        Ok(self.manifold.build()?.shared())
    }

    pub fn shortening_params(&self) -> anyhow::Result<ShorteningParams> {
        let p = &self.params;
        Ok(ShorteningParams::new(p.l, p.a, p.delta)?.with_slack(self.slack))
    }

    pub fn is_family(&self) -> bool {
        matches!(self.generator, GeneratorSpec::MeridianSweep { .. })
    }

    fn point(m: &ManifoldModel, x: &[f64]) -> anyhow::Result<Point> {
        if x.len() != m.coord_dim() {
            bail!("point {x:?} needs {} coordinates", m.coord_dim());
        }
        let p = Point::new(x);
        m.validate_point(&p)?;
        Ok(p)
    }

    pub fn build_input(&self, m: &Arc<ManifoldModel>) -> anyhow::Result<Input> {
        let input = match &self.generator {
            GeneratorSpec::MeridianSweep { nodes } => {
                let eps = self
                    .params
                    .epsilon
                    .context("a family scene needs params.epsilon")?;
                Input::Family(meridian_sweep(m, *nodes, eps)?)
            }
            GeneratorSpec::RandomWiggle { target_length, seed } => {
                let p = self.p.as_ref().context("random_wiggle needs a start point p")?;
                let p = Self::point(m, p)?;
                let seed = seed.unwrap_or(self.seed);
                Input::Curve(Arc::new(random_wiggle(m, &p, *target_length, seed)?))
            }
            GeneratorSpec::Explicit { breakpoints } => Input::Curve(Arc::new(explicit(m, breakpoints)?)),
        };
        let (start, end) = match &input {
            Input::Curve(c) => (c.start().clone(), Some(c.end().clone())),
            Input::Family(f) => (f.basepoint().clone(), None),
        };
        if let Some(p) = &self.p {
            if dist(&start, &Self::point(m, p)?) > 1e-9 {
                bail!("curve starts at {:?}, not at p = {p:?}", start.coords());
            }
        }
        if let (Some(q), Some(end)) = (&self.q, end) {
            if dist(&end, &Self::point(m, q)?) > 1e-9 {
                bail!("curve ends at {:?}, not at q = {q:?}", end.coords());
            }
        }
        Ok(input)
    }
}

fn dist(a: &Point, b: &Point) -> f64 {
    geoloop_core::point::dist_euclid(a, b)
}
