//! Length certificates: a bound formula, the parameters it was evaluated on,
//! the measured maximum and the slack allowed for `o(1)` terms.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use crate::error::{GeoError, Result};
use crate::frame::{Frame, Remeasurer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FormulaId {
    /// L + 2a: frames of the shortening homotopy of one curve.
    #[serde(rename = "L_plus_2a")]
    LPlus2a,
    /// l + a: the shortened curve.
    #[serde(rename = "l_plus_a")]
    LPlusA,
    /// l + 3a + δ: curves of the shortening family.
    #[serde(rename = "l_plus_3a_delta")]
    LPlus3aDelta,
    /// 2l + 4a + δ + ε: contraction of adjacent shortened loops.
    #[serde(rename = "two_l_4a")]
    TwoL4a,
    /// 3l + 5a: the shortened loop family.
    #[serde(rename = "three_l_5a")]
    ThreeL5a,
    /// L + 5a + 3l: the deformation between the families.
    #[serde(rename = "L_5a_3l")]
    L5a3l,
    /// 8πm: periodic geodesic length bound.
    #[serde(rename = "eight_pi_m")]
    EightPiM,
    /// ⌊(L − l − a)/δ⌋ + 1: predicted number of cut steps.
    #[serde(rename = "step_count")]
    StepCount,
    /// ((4k+2)m + (2k−3))a.
    #[serde(rename = "general_bound")]
    GeneralBound,
}

impl FormulaId {
    pub const ALL: [FormulaId; 9] = [
        FormulaId::LPlus2a,
        FormulaId::LPlusA,
        FormulaId::LPlus3aDelta,
        FormulaId::TwoL4a,
        FormulaId::ThreeL5a,
        FormulaId::L5a3l,
        FormulaId::EightPiM,
        FormulaId::StepCount,
        FormulaId::GeneralBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormulaId::LPlus2a => "L_plus_2a",
            FormulaId::LPlusA => "l_plus_a",
            FormulaId::LPlus3aDelta => "l_plus_3a_delta",
            FormulaId::TwoL4a => "two_l_4a",
            FormulaId::ThreeL5a => "three_l_5a",
            FormulaId::L5a3l => "L_5a_3l",
            FormulaId::EightPiM => "eight_pi_m",
            FormulaId::StepCount => "step_count",
            FormulaId::GeneralBound => "general_bound",
        }
    }

    pub fn symbols(self) -> &'static [&'static str] {
        match self {
            FormulaId::LPlus2a => &["L", "a"],
            FormulaId::LPlusA => &["l", "a"],
            FormulaId::LPlus3aDelta => &["l", "a", "delta"],
            FormulaId::TwoL4a => &["l", "a", "delta", "epsilon"],
            FormulaId::ThreeL5a => &["l", "a"],
            FormulaId::L5a3l => &["L", "a", "l"],
            FormulaId::EightPiM => &["m"],
            FormulaId::StepCount => &["L", "l", "a", "delta"],
            FormulaId::GeneralBound => &["k", "m", "a"],
        }
    }
}

impl fmt::Display for FormulaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub type Params = BTreeMap<String, f64>;

pub fn params(pairs: &[(&str, f64)]) -> Params {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Evaluates a formula on its parameters.
pub fn evaluate(id: FormulaId, p: &Params) -> Result<f64> {
    let get = |s: &str| -> Result<f64> {
        p.get(s).copied().ok_or_else(|| GeoError::MissingSymbol {
            formula: id.name().into(),
            symbol: s.into(),
        })
    };
    Ok(match id {
        FormulaId::LPlus2a => get("L")? + 2.0 * get("a")?,
        FormulaId::LPlusA => get("l")? + get("a")?,
        FormulaId::LPlus3aDelta => get("l")? + 3.0 * get("a")? + get("delta")?,
        FormulaId::TwoL4a => {
            2.0 * get("l")? + 4.0 * get("a")? + get("delta")? + get("epsilon")?
        }
        FormulaId::ThreeL5a => 3.0 * get("l")? + 5.0 * get("a")?,
        FormulaId::L5a3l => get("L")? + 5.0 * get("a")? + 3.0 * get("l")?,
        FormulaId::EightPiM => (8.0 * get("m")?) * PI,
        FormulaId::StepCount => {
            // no cut is ever made once the curve is already short
            (((get("L")? - get("l")? - get("a")?) / get("delta")?).floor() + 1.0).max(0.0)
        }
        FormulaId::GeneralBound => {
            let (k, m, a) = (get("k")?, get("m")?, get("a")?);
            ((4.0 * k + 2.0) * m + (2.0 * k - 3.0)) * a
        }
    })
}

/// Slack policy `c0 + c1·δ + c2·ε`, absorbing every `o(1)` term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlackPolicy {
    /// Absolute part; `None` means `1e-3·a`.
    pub c0: Option<f64>,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SlackPolicy {
    fn default() -> Self {
        SlackPolicy {
            c0: None,
            c1: 3.0,
            c2: 3.0,
        }
    }
}

impl SlackPolicy {
    pub fn slack(&self, a: f64, delta: f64, epsilon: f64) -> f64 {
        self.c0.unwrap_or(1e-3 * a) + self.c1 * delta + self.c2 * epsilon
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub formula: FormulaId,
    pub params: Params,
    pub claimed: f64,
    pub measured: f64,
    pub slack: f64,
    pub pass: bool,
}

impl BoundCertificate {
    pub fn new(formula: FormulaId, params: Params, measured: f64, slack: f64) -> Result<Self> {
        let claimed = evaluate(formula, &params)?;
        Ok(BoundCertificate {
            formula,
            params,
            claimed,
            measured,
            slack,
            pass: measured <= claimed + slack,
        })
    }

    /// Re-evaluates the claim and the pass flag from the stored numbers.
    pub fn recheck(&self) -> Result<BoundCertificate> {
        BoundCertificate::new(self.formula, self.params.clone(), self.measured, self.slack)
    }

    /// True when stored `claimed` and `pass` agree with a fresh evaluation.
    pub fn is_consistent(&self) -> bool {
        match self.recheck() {
            Ok(c) => c.claimed == self.claimed && c.pass == self.pass,
            Err(_) => false,
        }
    }

    pub fn into_result(self) -> Result<Self> {
        if self.pass {
            Ok(self)
        } else {
            Err(GeoError::BoundViolation {
                formula: self.formula.name().into(),
                claimed: self.claimed,
                measured: self.measured,
                slack: self.slack,
            })
        }
    }
}

/// Recomputes `measured` as the largest independently re-measured frame
/// length and resets `pass`.
pub fn verify(cert: &BoundCertificate, frames: &[Frame]) -> BoundCertificate {
    let mut r = Remeasurer::new();
    let measured = frames.iter().map(|f| r.frame_len(f)).fold(0.0, f64::max);
    verify_measured(cert, measured)
}

pub fn verify_measured(cert: &BoundCertificate, measured: f64) -> BoundCertificate {
    let claimed = evaluate(cert.formula, &cert.params).unwrap_or(f64::NAN);
    BoundCertificate {
        formula: cert.formula,
        params: cert.params.clone(),
        claimed,
        measured,
        slack: cert.slack,
        pass: measured <= claimed + cert.slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::PLCurve;
    use crate::manifold::ManifoldModel;
    use crate::point::Point;
    use std::sync::Arc;

    #[test]
    fn examples() {
        assert_eq!(evaluate(FormulaId::EightPiM, &params(&[("m", 1.0)])).unwrap(), 8.0 * PI);
        assert_eq!(
            evaluate(FormulaId::LPlusA, &params(&[("l", 0.0), ("a", PI)])).unwrap(),
            PI
        );
        let p = params(&[("L", 7.0), ("l", 0.1), ("a", PI), ("delta", 0.05)]);
        assert_eq!(evaluate(FormulaId::StepCount, &p).unwrap(), 76.0);
    }

    #[test]
    fn missing_symbol() {
        let e = evaluate(FormulaId::ThreeL5a, &params(&[("l", 1.0)])).unwrap_err();
        assert!(matches!(e, GeoError::MissingSymbol { ref symbol, .. } if symbol == "a"));
    }

    #[test]
    fn constant_family_passes_and_tampering_fails() {
        let m = ManifoldModel::unit_sphere().shared();
        let c = Arc::new(PLCurve::constant(m, Point::new(&[0., 0., 1.])));
        let frames = vec![Frame::of(&c)];
        let cert = BoundCertificate::new(
            FormulaId::LPlusA,
            params(&[("l", 0.0), ("a", PI)]),
            0.0,
            0.0,
        )
        .unwrap();
        let v = verify(&cert, &frames);
        assert!(v.pass);
        assert_eq!(verify(&v, &frames), v);
        let mut bad = v.clone();
        bad.claimed = -1.0;
        assert!(!bad.is_consistent());
        let mut bad = v;
        bad.measured = 10.0;
        assert!(!bad.is_consistent());
    }

    #[test]
    fn json_shape() {
        let cert = BoundCertificate::new(
            FormulaId::ThreeL5a,
            params(&[("l", 0.05), ("a", PI)]),
            1.0,
            0.1,
        )
        .unwrap();
        let v = serde_json::to_value(&cert).unwrap();
        assert_eq!(v["formula"], "three_l_5a");
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        for k in ["formula", "params", "claimed", "measured", "slack", "pass"] {
            assert!(keys.contains(&k.to_string()));
        }
    }

    #[test]
    fn slack_policy_default() {
        let s = SlackPolicy::default().slack(PI, 0.01, 0.02);
        assert!((s - (1e-3 * PI + 0.03 + 0.06)).abs() < 1e-15);
    }
}
