//! `geoloop verify`: re-derives every certificate of a report from its
//! parameters and witness curves.

use anyhow::{bail, Context};
use serde_json::Value;
use std::path::{Path, PathBuf};

use geoloop_core::certificate::evaluate;
use geoloop_core::{BoundCertificate, CurveJson, FormulaId};

use crate::{EXIT_MISMATCH, EXIT_OK};

/// Recomputations must agree with the report to this tolerance (scaled for
/// values above one).
pub const TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * a.abs().max(b.abs()).max(1.0)
}

#[derive(Clone, Debug)]
pub struct CertCheck {
    pub formula: String,
    pub claimed: f64,
    pub measured: f64,
    pub slack: f64,
    pub pass: bool,
    pub recomputed_claimed: f64,
    pub recomputed_measured: f64,
    pub problems: Vec<String>,
}

impl CertCheck {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }

    pub fn line(&self) -> String {
        format!(
            "{:<16} claimed {:.12} measured {:.12} (re-measured {:.12}) slack {:.3e} pass {} {}",
            self.formula,
            self.claimed,
            self.measured,
            self.recomputed_measured,
            self.slack,
            self.pass,
            if self.ok() {
                "OK".to_string()
            } else {
                format!("MISMATCH: {}", self.problems.join("; "))
            }
        )
    }
}

#[derive(Debug)]
pub struct VerifyOutcome {
    pub code: i32,
    pub checks: Vec<CertCheck>,
    /// Problems not tied to one certificate.
    pub problems: Vec<String>,
    pub notes: Vec<String>,
}

impl VerifyOutcome {
    pub fn lines(&self) -> Vec<String> {
        let mut v: Vec<String> = self.checks.iter().map(CertCheck::line).collect();
        v.extend(self.notes.iter().cloned());
        v.extend(self.problems.iter().map(|p| format!("MISMATCH: {p}")));
        v
    }
}

struct Curves {
    root: PathBuf,
    flat: bool,
}

impl Curves {
    /// Witness paths are relative to the report; an explicit curves
    /// directory overrides the directory part.
    fn resolve(&self, rel: &str) -> PathBuf {
        if self.flat {
            let name = Path::new(rel).file_name().map(PathBuf::from).unwrap_or_else(|| rel.into());
            self.root.join(name)
        } else {
            self.root.join(rel)
        }
    }

    fn length(&self, rel: &str) -> anyhow::Result<f64> {
        let path = self.resolve(rel);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let cj: CurveJson = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(cj.build().with_context(|| format!("rebuilding {}", path.display()))?.remeasure())
    }
}

fn cut_count(report: &Value) -> Option<f64> {
    let steps = report.get("curve")?.get("steps")?.as_array()?;
    Some(
        steps
            .iter()
            .filter(|s| !s.get("terminal").and_then(Value::as_bool).unwrap_or(false))
            .count() as f64,
    )
}

/// Verifies a report. I/O and parse failures (including a missing curve
/// file) are errors; disagreements are reported through the exit code.
pub fn verify(report_path: &Path, curves_dir: Option<&Path>) -> anyhow::Result<VerifyOutcome> {
    let text = std::fs::read_to_string(report_path).with_context(|| format!("reading {}", report_path.display()))?;
    let report: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", report_path.display()))?;
    let base = report_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let curves = match curves_dir {
        Some(d) => Curves {
            root: d.to_path_buf(),
            flat: true,
        },
        None => Curves { root: base, flat: false },
    };
    let certs: Vec<BoundCertificate> = serde_json::from_value(
        report.get("certificates").cloned().context("report has no certificates")?,
    )
    .context("parsing certificates")?;
    let witnesses = report.get("witnesses").and_then(Value::as_object);

    let mut checks = Vec::new();
    let mut problems = Vec::new();
    let mut notes = Vec::new();
    for c in &certs {
        let mut pr = Vec::new();
        let claimed = match evaluate(c.formula, &c.params) {
            Ok(x) => x,
            Err(e) => {
                pr.push(e.to_string());
                f64::NAN
            }
        };
        if !close(claimed, c.claimed) {
            pr.push(format!("claimed {} but the formula gives {claimed}", c.claimed));
        }
        let measured = if c.formula == FormulaId::StepCount {
            cut_count(&report).unwrap_or_else(|| {
                pr.push("no step records".into());
                f64::NAN
            })
        } else {
            match witnesses.and_then(|w| w.get(c.formula.name())).and_then(Value::as_str) {
                Some(rel) => curves.length(rel)?,
                None => {
                    pr.push("no witness curve".into());
                    f64::NAN
                }
            }
        };
        if !close(measured, c.measured) {
            pr.push(format!("measured {} but the witness gives {measured}", c.measured));
        }
        let pass = measured <= claimed + c.slack;
        if pass != c.pass {
            pr.push(format!("pass flag {} but recomputation gives {pass}", c.pass));
        }
        checks.push(CertCheck {
            formula: c.formula.name().into(),
            claimed: c.claimed,
            measured: c.measured,
            slack: c.slack,
            pass: c.pass,
            recomputed_claimed: claimed,
            recomputed_measured: measured,
            problems: pr,
        });
    }

    let status = report.get("status").and_then(Value::as_str).unwrap_or("");
    match status {
        "hypothesis_violated" => {
            let v = report.get("violation").context("violated run without a violation record")?;
            let rel = v.get("loop_curve").and_then(Value::as_str).context("violation without a loop")?;
            let len = curves.length(rel)?;
            let claimed = v.get("loop_length").and_then(Value::as_f64).unwrap_or(f64::NAN);
            if !close(len, claimed) {
                problems.push(format!("refuting loop measures {len}, report says {claimed}"));
            }
            let l = report.pointer("/params/l").and_then(Value::as_f64).unwrap_or(f64::NAN);
            if !(len > l) {
                problems.push(format!("refuting loop of length {len} does not exceed l = {l}"));
            }
            notes.push(format!("refuting loop {rel}: re-measured {len:.12} > l = {l}"));
        }
        "ok" | "certificate_failed" => {
            let all = checks.iter().all(|c| c.pass);
            let structural = ["disjoint_ok", "g0_matches", "g1_matches", "based"]
                .iter()
                .all(|k| report.pointer(&format!("/family/{k}")).and_then(Value::as_bool).unwrap_or(true));
            if (status == "ok") != (all && structural) {
                problems.push(format!("status {status} disagrees with the certificates"));
            }
        }
        other => bail!("unknown report status {other:?}"),
    }

    let ok = checks.iter().all(CertCheck::ok) && problems.is_empty();
    Ok(VerifyOutcome {
        code: if ok { EXIT_OK } else { EXIT_MISMATCH },
        checks,
        problems,
        notes,
    })
}
