//! Constructive curve shortening on model Riemannian manifolds, with length
//! certificates for every homotopy it builds.

pub mod birkhoff;
pub mod certificate;
pub mod curve;
pub mod error;
pub mod frame;
pub mod generators;
pub mod homotopy;
pub mod manifold;
pub mod point;
pub mod sweepout;
pub mod theorem_a;
pub mod theorem_b;

pub use birkhoff::{shorten_based_loop, shorten_free_loop, BirkhoffConfig, ShorteningTrace};
pub use certificate::{BoundCertificate, FormulaId, SlackPolicy};
pub use curve::{CurveJson, LoopAt, PLCurve};
pub use error::{GeoError, Result};
pub use frame::{Frame, Remeasurer, Slice};
pub use homotopy::LengthHomotopy;
pub use manifold::{ManifoldModel, ManifoldSpec, ModelKind, ParamSurface};
pub use sweepout::{bound_formula, loop_count_bound, minimax_geodesic, CountKind, MinimaxResult};
pub use theorem_a::{shorten_curve, ShorteningFamily, ShorteningParams};
pub use theorem_b::{shorten_family, FamilyConfig, FamilyResult, LoopFamily};
pub use point::{Point, Tangent};
