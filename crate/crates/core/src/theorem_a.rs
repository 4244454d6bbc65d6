//! Shortening a long curve from `p` while keeping every intermediate curve
//! under control.
//!
//! The curve is consumed from the front: cut the current curve at arclength
//! `l + a + δ'`, close the head with a minimal geodesic `e` back to `p`,
//! shorten the loop `head * ē` to a short based loop `γ`, and splice `γ * e`
//! in place of the head. The resulting family `γ_s` alternates between
//! *moving* spans (the end point runs forward along `α`) and *frozen* spans
//! (the end point sits still while the head is replaced).

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::birkhoff::{shorten_based_loop, BirkhoffConfig};
use crate::certificate::{params, BoundCertificate, FormulaId, SlackPolicy};
use crate::curve::{LoopAt, PLCurve};
use crate::error::{GeoError, Result};
use crate::frame::{frame_gap, Frame, Remeasurer, Slice};
use crate::homotopy::{lemma_path_homotopy, LengthHomotopy};

fn default_refine() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShorteningParams {
    /// Lower edge of the loop-length gap.
    pub l: f64,
    /// Diameter bound.
    pub a: f64,
    pub delta: f64,
    /// Subdivision factor for moving spans.
    #[serde(default = "default_refine")]
    pub refine: usize,
    #[serde(default)]
    pub slack: SlackPolicy,
}

impl ShorteningParams {
    pub fn new(l: f64, a: f64, delta: f64) -> Result<Self> {
        let p = ShorteningParams {
            l,
            a,
            delta,
            refine: 1,
            slack: SlackPolicy::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_slack(mut self, slack: SlackPolicy) -> Self {
        self.slack = slack;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.l.is_finite()
            && self.a.is_finite()
            && self.delta.is_finite()
            && self.l >= 0.0
            && self.a > 0.0
            && self.delta > 0.0
            && self.refine >= 1;
        if ok {
            Ok(())
        } else {
            Err(GeoError::Config(format!(
                "need l >= 0, a > 0, delta > 0 (got l={}, a={}, delta={})",
                self.l, self.a, self.delta
            )))
        }
    }

    /// Lengths where based geodesic loops must not occur: `(l, l+2a+δ]`.
    pub fn hypothesis_interval(&self) -> (f64, f64) {
        (self.l, self.l + 2.0 * self.a + self.delta)
    }

    pub fn o1_slack(&self) -> f64 {
        self.slack.slack(self.a, self.delta, 0.0)
    }
}

#[derive(Clone, Debug)]
pub enum Span {
    /// `γ(τ) = prefix * α|[from, τ]` for `τ` in `[from, to]`.
    Moving {
        prefix: Arc<PLCurve>,
        from: f64,
        to: f64,
    },
    /// End point fixed at `α(tau)` while the head is replaced.
    Frozen { tau: f64, frames: Vec<Frame> },
}

impl Span {
    pub fn is_moving(&self) -> bool {
        matches!(self, Span::Moving { .. })
    }
}

/// What happened at one cut.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub tau: f64,
    pub head_length: f64,
    pub e_length: f64,
    pub loop_length: f64,
    pub limit_length: f64,
    pub stages: usize,
    pub escapes: usize,
    /// The closing step of a loop run (no cut, `e` constant).
    pub terminal: bool,
}

#[derive(Clone, Debug)]
pub struct ShorteningFamily {
    pub alpha: Arc<PLCurve>,
    pub params: ShorteningParams,
    pub spans: Vec<Span>,
    pub steps: Vec<StepRecord>,
    pub final_curve: Arc<PLCurve>,
    /// Run as a loop: the last step closes with a constant `e`.
    pub closed: bool,
}

/// A discretised family: frames with their `s` and `τ` values, the cut
/// positions `P` on `α`, and the span boundaries `Q` in `s`.
#[derive(Clone, Debug)]
pub struct FamilySample {
    pub frames: Vec<Frame>,
    pub s: Vec<f64>,
    pub tau: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Frame index of each entry of `q`.
    pub q_index: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub max_length: f64,
    pub bound: f64,
    pub slack: f64,
    pub a: bool,
    pub b: bool,
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
    pub c4: bool,
}

impl InvariantReport {
    pub fn all(&self) -> bool {
        self.a && self.b && self.c1 && self.c2 && self.c3 && self.c4
    }
}

pub(crate) fn moving_frame(alpha: &Arc<PLCurve>, prefix: &Arc<PLCurve>, from: f64, tau: f64) -> Frame {
    Frame::of(prefix).then(Slice::new(alpha, from, tau))
}

impl ShorteningFamily {
    pub fn big_l(&self) -> f64 {
        self.alpha.length()
    }

    /// Number of cuts made (the closing step of a loop run is not a cut).
    pub fn cut_count(&self) -> usize {
        self.steps.iter().filter(|s| !s.terminal).count()
    }

    /// Cut positions on `α`, starting at 0 and ending at the last moving end.
    pub fn partition_p(&self) -> Vec<f64> {
        let mut p = vec![0.0];
        for sp in &self.spans {
            if let Span::Moving { to, .. } = sp {
                p.push(*to);
            }
        }
        p
    }

    /// Moving-span step in arclength.
    pub fn frame_step(&self) -> f64 {
        self.alpha.model().margin / 8.0 / self.params.refine as f64
    }

    /// Discretises the family. Consecutive spans share their boundary frame.
    pub fn sample(&self) -> FamilySample {
        let h = self.frame_step();
        let mut frames: Vec<Frame> = Vec::new();
        let mut tau: Vec<f64> = Vec::new();
        let mut q_index = vec![0];
        for (j, sp) in self.spans.iter().enumerate() {
            let skip = usize::from(j > 0);
            match sp {
                Span::Moving { prefix, from, to } => {
                    let n = ((to - from) / h).ceil().max(1.0) as usize;
                    for k in skip..=n {
                        let t = if k == n {
                            *to
                        } else {
                            from + (to - from) * k as f64 / n as f64
                        };
                        frames.push(moving_frame(&self.alpha, prefix, *from, t));
                        tau.push(t);
                    }
                }
                Span::Frozen { tau: t, frames: fr } => {
                    for f in fr.iter().skip(skip) {
                        frames.push(f.clone());
                        tau.push(*t);
                    }
                }
            }
            q_index.push(frames.len() - 1);
        }
        let n = frames.len();
        let s: Vec<f64> = (0..n)
            .map(|i| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 })
            .collect();
        let q = q_index.iter().map(|&i| s[i]).collect();
        FamilySample {
            frames,
            s,
            tau,
            p: self.partition_p(),
            q,
            q_index,
        }
    }

    /// `γ_s` followed by the unused tail `α|[τ(s), L]`.
    pub fn with_tail(&self, frame: &Frame, tau: f64) -> Frame {
        frame.clone().then(Slice::new(&self.alpha, tau, self.big_l()))
    }

    /// The path homotopy from `α` to the final curve.
    pub fn homotopy(&self) -> LengthHomotopy {
        let smp = self.sample();
        let frames = smp
            .frames
            .iter()
            .zip(&smp.tau)
            .map(|(f, &t)| self.with_tail(f, t))
            .collect();
        LengthHomotopy::new(frames, self.big_l() + 2.0 * self.params.a)
    }

    /// Re-measures the family and checks its structural properties.
    pub fn check_invariants(&self) -> InvariantReport {
        let smp = self.sample();
        let mut r = Remeasurer::new();
        let lens: Vec<f64> = smp.frames.iter().map(|f| r.frame_len(f)).collect();
        let pr = &self.params;
        let slack = pr.o1_slack();
        let bound = pr.l + 3.0 * pr.a + pr.delta;
        let max_length = lens.iter().copied().fold(0.0, f64::max);
        let b = smp.tau.windows(2).all(|w| w[0] <= w[1]);
        let (mut c1, mut c2, mut c3) = (true, true, true);
        for (j, sp) in self.spans.iter().enumerate() {
            let (i0, i1) = (smp.q_index[j], smp.q_index[j + 1]);
            match sp {
                Span::Frozen { .. } => {
                    let e0 = smp.frames[i0].end();
                    c1 &= smp.frames[i0..=i1].iter().all(|f| f.end() == e0);
                }
                Span::Moving { from, to, .. } => {
                    if to > from {
                        c2 &= smp.tau[i0..=i1].windows(2).all(|w| w[0] < w[1]);
                    }
                    c2 &= smp.tau[i0] == *from && smp.tau[i1] == *to;
                    c3 &= lens[i0] <= pr.l + pr.a + slack;
                }
            }
        }
        let last = smp.frames.last().unwrap();
        let fin = Frame::of(&self.final_curve);
        let c4 = (r.frame_len(last) - r.frame_len(&fin)).abs() <= 1e-9
            && frame_gap(last, &fin, 64) <= 1e-9
            && last.start() == *self.final_curve.start()
            && last.end() == *self.final_curve.end();
        InvariantReport {
            max_length,
            bound,
            slack,
            a: max_length <= bound + slack,
            b,
            c1,
            c2,
            c3,
            c4,
        }
    }
}

/// Result of [`shorten_curve`].
#[derive(Clone, Debug)]
pub struct Shortened {
    pub final_curve: Arc<PLCurve>,
    pub homotopy: LengthHomotopy,
    pub family: ShorteningFamily,
    /// Step-count certificate: predicted cuts vs. actual cuts.
    pub cert: BoundCertificate,
    /// Homotopy, final-length and family-length certificates.
    pub bounds: Vec<BoundCertificate>,
}

/// Builds the family for `alpha`. With `closed`, `alpha` must be a loop and
/// the run ends with a closing step that shortens the remaining loop itself,
/// so the final loop has length at most `l`.
pub fn build_family(
    alpha: &Arc<PLCurve>,
    pr: &ShorteningParams,
    closed: bool,
    cfg: &BirkhoffConfig,
) -> Result<ShorteningFamily> {
    pr.validate()?;
    if closed && !alpha.is_closed() {
        return Err(GeoError::Config("loop run on an open curve".into()));
    }
    let m = alpha.model().clone();
    let p = alpha.start().clone();
    let big_l = alpha.length();
    let target = pr.l + pr.a;
    let slack = pr.o1_slack();
    let mut prefix = Arc::new(PLCurve::constant(m.clone(), p.clone()));
    let mut pos = 0.0;
    let mut spans = Vec::new();
    let mut steps = Vec::new();
    let mut closed_done = false;
    loop {
        let cur = prefix.length() + (big_l - pos);
        let (next, terminal) = if cur > target {
            let dp = pr.delta.min(cur - target);
            ((pos + target + dp - prefix.length()).min(big_l), false)
        } else if closed && !closed_done {
            (big_l, true)
        } else {
            break;
        };
        spans.push(Span::Moving {
            prefix: prefix.clone(),
            from: pos,
            to: next,
        });
        let head = moving_frame(alpha, &prefix, pos, next);
        let q = alpha.point_at(next);
        let e = Arc::new(m.minimal_geodesic(&p, &q)?);
        let ef = Frame::of(&e);
        let lp = head.clone().then_frame(&ef.reversed()).materialize()?;
        let loop_length = lp.length();
        let trace = shorten_based_loop(&LoopAt::new(lp)?, cfg)?;
        let limit = trace.limit().clone();
        if limit.length() > pr.l {
            return Err(GeoError::HypothesisViolated {
                loop_length: limit.length(),
                loop_curve: Box::new((*limit).clone()),
            });
        }
        let h = LengthHomotopy::from_trace(&trace);
        let lem = lemma_path_homotopy(&head, &ef, &h, slack)?;
        steps.push(StepRecord {
            tau: next,
            head_length: head.length(),
            e_length: e.length(),
            loop_length,
            limit_length: limit.length(),
            stages: trace.stages.len(),
            escapes: trace.escapes,
            terminal,
        });
        spans.push(Span::Frozen {
            tau: next,
            frames: lem.frames,
        });
        prefix = Arc::new(limit.concat(&e)?);
        pos = next;
        closed_done |= terminal;
    }
    let final_curve = if closed {
        prefix.clone()
    } else {
        spans.push(Span::Moving {
            prefix: prefix.clone(),
            from: pos,
            to: big_l,
        });
        Arc::new(moving_frame(alpha, &prefix, pos, big_l).materialize()?)
    };
    Ok(ShorteningFamily {
        alpha: alpha.clone(),
        params: *pr,
        spans,
        steps,
        final_curve,
        closed,
    })
}

/// Shortens a curve from `p` to a curve of length at most `l + a` with the
/// same ends, through curves of length at most `L + 2a`.
pub fn shorten_curve(alpha: &Arc<PLCurve>, pr: &ShorteningParams) -> Result<Shortened> {
    shorten_curve_with(alpha, pr, &BirkhoffConfig::default())
}

pub fn shorten_curve_with(
    alpha: &Arc<PLCurve>,
    pr: &ShorteningParams,
    cfg: &BirkhoffConfig,
) -> Result<Shortened> {
    let family = build_family(alpha, pr, false, cfg)?;
    let homotopy = family.homotopy();
    let big_l = alpha.length();
    let slack = pr.o1_slack();
    let mut r = Remeasurer::new();
    let hmax = homotopy.remeasure_max(&mut r);
    let inv = family.check_invariants();
    let cert = BoundCertificate::new(
        FormulaId::StepCount,
        params(&[("L", big_l), ("l", pr.l), ("a", pr.a), ("delta", pr.delta)]),
        family.cut_count() as f64,
        0.0,
    )?;
    let bounds = vec![
        BoundCertificate::new(
            FormulaId::LPlus2a,
            params(&[("L", big_l), ("a", pr.a)]),
            hmax,
            slack,
        )?,
        BoundCertificate::new(
            FormulaId::LPlusA,
            params(&[("l", pr.l), ("a", pr.a)]),
            family.final_curve.remeasure(),
            slack,
        )?,
        BoundCertificate::new(
            FormulaId::LPlus3aDelta,
            params(&[("l", pr.l), ("a", pr.a), ("delta", pr.delta)]),
            inv.max_length,
            slack,
        )?,
    ];
    Ok(Shortened {
        final_curve: family.final_curve.clone(),
        homotopy,
        family,
        cert,
        bounds,
    })
}

/// `γ_s` followed by the rest of `alpha`, with `s` in `[0, 1]` on the
/// sampled grid.
pub fn partial_shortening(family: &ShorteningFamily, alpha: &Arc<PLCurve>, s: f64) -> Result<PLCurve> {
    let smp = family.sample();
    let n = smp.frames.len();
    let i = ((s.clamp(0.0, 1.0) * (n - 1) as f64).round() as usize).min(n - 1);
    let f = smp.frames[i]
        .clone()
        .then(Slice::new(alpha, smp.tau[i], alpha.length()));
    f.materialize()
}
