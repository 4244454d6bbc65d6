use thiserror::Error;

use crate::curve::PLCurve;
use crate::birkhoff::ShorteningTrace;

pub type Result<T> = std::result::Result<T, GeoError>;

/// Every failure the geometry layer can report.
///
/// `HypothesisViolated` is not a crash: it is the run's empirical refutation of
/// the gap hypothesis and carries the offending loop.
#[derive(Debug, Error)]
pub enum GeoError {
    #[error("integrator produced a non-finite state after {steps} steps")]
    NonFiniteState { steps: usize },

    #[error("no connecting geodesic found (best residual {residual:.3e})")]
    ShootingFailed { residual: f64 },

    #[error("endpoint mismatch: curves do not meet exactly (gap {gap:.3e})")]
    EndpointMismatch { gap: f64 },

    #[error("arclength range [{s0}, {s1}] outside [0, {len}]")]
    RangeError { s0: f64, s1: f64, len: f64 },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("iteration budget of {budget} sweeps exhausted")]
    IterationBudgetExceeded {
        budget: usize,
        trace: Box<ShorteningTrace>,
    },

    #[error("index-zero loop of length {loop_length:.9} refutes the gap hypothesis")]
    HypothesisViolated {
        loop_length: f64,
        #[doc = "The refuting loop, based at the curve's start point."]
        loop_curve: Box<PLCurve>,
    },

    #[error("bound {formula} violated: measured {measured:.9} > claimed {claimed:.9} + slack {slack:.3e}")]
    BoundViolation {
        formula: String,
        claimed: f64,
        measured: f64,
        slack: f64,
    },

    #[error("could not make partitions pairwise disjoint: {0}")]
    SyncFailed(String),

    #[error("formula {formula} needs symbol `{symbol}`")]
    MissingSymbol { formula: String, symbol: String },

    #[error("configuration error: {0}")]
    Config(String),
}
