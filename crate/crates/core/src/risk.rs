//! Concrete risk functionals and the acceptance-set bridge.
//!
//! Quantile convention: `var` evaluates `inf{m ; P(X+m<0) <= alpha}` with the
//! strict inequality taken literally, so ties at atoms are resolved by
//! `-sup{t ; P(X<t) <= alpha}`. `es` integrates the resulting step function
//! of the level exactly from the sorted atoms; no Monte Carlo anywhere.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::acceptance::AcceptanceSet;
use crate::error::{EngineError, Result};
use crate::par::find_first_violation;
use crate::report::{LawReport, Witness};
use crate::sampler::{trial_rng, PositionSampler};
use crate::scenario::{EventMask, Position, ScenarioSpace};

/// Largest bracket the acceptance-margin bisection will explore before
/// declaring the value infinite (or minus-infinity-suspect).
pub const BRACKET_CAP: f64 = 1e12;

/// Extended-real risk value: finite or `+inf`. Minus infinity is never a
/// legal value; routines that would produce it return an error instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskValue {
    Finite(f64),
    PosInf,
}

impl RiskValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            RiskValue::Finite(v) => Some(v),
            RiskValue::PosInf => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, RiskValue::Finite(_))
    }

    /// Collapses to `f64`, mapping `PosInf` to `f64::INFINITY`.
    pub fn as_f64(self) -> f64 {
        match self {
            RiskValue::Finite(v) => v,
            RiskValue::PosInf => f64::INFINITY,
        }
    }
}

impl fmt::Display for RiskValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskValue::Finite(v) => write!(f, "{v}"),
            RiskValue::PosInf => write!(f, "inf"),
        }
    }
}

impl Serialize for RiskValue {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RiskValue::Finite(v) => ser.serialize_f64(*v),
            RiskValue::PosInf => ser.serialize_str("inf"),
        }
    }
}

/// Built-in loss functions for shortfall risk: increasing with `l(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossFunction {
    /// `x^p`, `p >= 1`.
    Power { p: f64 },
    /// `e^x - 1`.
    Exponential,
    /// Piecewise-linear interpolation through `(0,0)` and the given knots,
    /// extrapolated with the last slope.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl LossFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            LossFunction::Power { p } => {
                if !p.is_finite() || *p < 1.0 {
                    return Err(EngineError::InvalidParameter {
                        name: "p",
                        reason: format!("power loss requires p >= 1, got {p}"),
                    });
                }
            }
            LossFunction::Exponential => {}
            LossFunction::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return Err(EngineError::InvalidParameter {
                        name: "knots",
                        reason: "at least one knot is required".into(),
                    });
                }
                let mut prev = (0.0, 0.0);
                for &(x, y) in knots {
                    if !(x.is_finite() && y.is_finite()) || x <= prev.0 || y < prev.1 {
                        return Err(EngineError::InvalidParameter {
                            name: "knots",
                            reason: "knots must be finite, strictly increasing in x, nondecreasing in y".into(),
                        });
                    }
                    prev = (x, y);
                }
            }
        }
        Ok(())
    }

    /// Evaluates the loss at `x >= 0`.
    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        match self {
            LossFunction::Power { p } => {
                if *p == 1.0 {
                    x
                } else if *p == 2.0 {
                    x * x
                } else {
                    x.powf(*p)
                }
            }
            LossFunction::Exponential => x.exp_m1(),
            LossFunction::PiecewiseLinear { knots } => {
                let mut prev = (0.0, 0.0);
                for &(kx, ky) in knots {
                    if x <= kx {
                        let t = (x - prev.0) / (kx - prev.0);
                        return prev.1 + t * (ky - prev.1);
                    }
                    prev = (kx, ky);
                }
                let (lx, ly) = *knots.last().unwrap();
                let before = if knots.len() >= 2 { knots[knots.len() - 2] } else { (0.0, 0.0) };
                let slope = (ly - before.1) / (lx - before.0);
                ly + slope * (x - lx)
            }
        }
    }

    /// True when the built-in is convex (slopes nondecreasing for the
    /// piecewise-linear case).
    pub fn is_convex(&self) -> bool {
        match self {
            LossFunction::Power { .. } | LossFunction::Exponential => true,
            LossFunction::PiecewiseLinear { knots } => {
                let mut prev = (0.0, 0.0);
                let mut prev_slope = f64::NEG_INFINITY;
                for &(x, y) in knots {
                    let slope = (y - prev.1) / (x - prev.0);
                    if slope + 1e-12 < prev_slope {
                        return false;
                    }
                    prev_slope = slope;
                    prev = (x, y);
                }
                true
            }
        }
    }

    /// Convex conjugate on the half-line, `sup_{x>=0} (x y - l(x))`, for
    /// `y >= 0`. Exact for every built-in.
    pub fn conjugate(&self, y: f64) -> f64 {
        debug_assert!(y >= 0.0);
        match self {
            LossFunction::Power { p } => {
                if *p == 1.0 {
                    if y <= 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    // Maximizer x* = (y/p)^(1/(p-1)).
                    let x = (y / p).powf(1.0 / (p - 1.0));
                    x * y - self.eval(x)
                }
            }
            LossFunction::Exponential => {
                if y <= 1.0 {
                    0.0
                } else {
                    y * y.ln() - y + 1.0
                }
            }
            LossFunction::PiecewiseLinear { knots } => {
                let (lx, ly) = *knots.last().unwrap();
                let before = if knots.len() >= 2 { knots[knots.len() - 2] } else { (0.0, 0.0) };
                let last_slope = (ly - before.1) / (lx - before.0);
                if y > last_slope {
                    return f64::INFINITY;
                }
                // Concave piecewise-linear objective attains its sup at a knot.
                let mut best = 0.0f64;
                for &(x, v) in knots {
                    best = best.max(x * y - v);
                }
                best
            }
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EngineError::InvalidParameter {
            name: "alpha",
            reason: format!("level must lie in (0,1), got {alpha}"),
        });
    }
    Ok(())
}

/// Sorted atoms `(value, mass)` of a position under one prior, zero-mass
/// scenarios dropped.
fn sorted_atoms(space: &ScenarioSpace, x: &Position, prior: usize) -> Result<Vec<(f64, f64)>> {
    let p = space.prior(prior)?;
    let mut atoms: Vec<(f64, f64)> = x
        .payoffs()
        .iter()
        .zip(&p.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| (v, w))
        .collect();
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Merge equal values so cumulative masses are breakpoints.
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (v, w) in atoms {
        match merged.last_mut() {
            Some((pv, pw)) if *pv == v => *pw += w,
            _ => merged.push((v, w)),
        }
    }
    Ok(merged)
}

/// Value at risk at level `alpha` in `(0,1)` under one prior.
///
/// Returns `-t*` where `t* = sup{t ; P(X < t) <= alpha}`, computed exactly by
/// scanning cumulative masses of the sorted atoms.
pub fn var(space: &ScenarioSpace, x: &Position, alpha: f64, prior: usize) -> Result<f64> {
    check_alpha(alpha)?;
    let atoms = sorted_atoms(space, x, prior)?;
    let mut cum = 0.0;
    for (v, w) in &atoms {
        cum += w;
        if cum > alpha {
            return Ok(-v);
        }
    }
    // Total mass is 1 > alpha, so the scan always returns.
    Err(EngineError::Internal("quantile scan exhausted total mass".into()))
}

/// Expected shortfall at level `alpha`: the exact integral of the
/// piecewise-constant map `beta -> var(X, beta)` over `(0, alpha]`, divided
/// by `alpha`. Breakpoints are the cumulative atom masses.
pub fn es(space: &ScenarioSpace, x: &Position, alpha: f64, prior: usize) -> Result<f64> {
    check_alpha(alpha)?;
    let atoms = sorted_atoms(space, x, prior)?;
    let mut integral = 0.0;
    let mut lo = 0.0;
    for (v, w) in &atoms {
        let hi = lo + w;
        let span = hi.min(alpha) - lo;
        if span > 0.0 {
            integral += -v * span;
        }
        lo = hi;
        if lo >= alpha {
            break;
        }
    }
    Ok(integral / alpha)
}

/// Expected disutility of the loss profile: `E_P[l(X^-)]`.
pub fn shortfall(space: &ScenarioSpace, x: &Position, loss: &LossFunction, prior: usize) -> Result<f64> {
    loss.validate()?;
    let p = space.prior(prior)?;
    let neg = x.neg_part();
    Ok(neg
        .payoffs()
        .iter()
        .zip(&p.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| w * loss.eval(v))
        .sum())
}

/// SPAN-style test: no scenario of the test event with positive prior mass
/// shows a loss.
pub fn span_accept(space: &ScenarioSpace, x: &Position, event: &EventMask, prior: usize) -> Result<bool> {
    let p = space.prior(prior)?;
    Ok(!x
        .payoffs()
        .iter()
        .zip(&p.weights)
        .zip(&event.members)
        .any(|((&v, &w), &m)| m && w > 0.0 && v < 0.0))
}

/// Claims attached to a risk functional. Checkers consult these; nothing is
/// assumed beyond what a functional claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RiskClaims {
    pub convex: bool,
    pub monotone: bool,
    pub surplus_invariant: bool,
    pub si_subject_to_positivity: bool,
    pub s_additive: bool,
}

/// Shared signature of user-supplied evaluators.
pub type Evaluator = Arc<dyn Fn(&ScenarioSpace, &Position) -> Result<RiskValue> + Send + Sync>;

#[derive(Clone)]
pub(crate) enum RiskKind {
    Var { alpha: f64, prior: usize },
    Es { alpha: f64, prior: usize },
    ShortfallValue { loss: LossFunction, prior: usize },
    ExpectedLoss { prior: usize },
    MaxLoss,
    AcceptanceMargin { set: Box<AcceptanceSet> },
    Custom { eval: Evaluator },
}

impl fmt::Debug for RiskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskKind::Var { alpha, prior } => write!(f, "Var {{ alpha: {alpha}, prior: {prior} }}"),
            RiskKind::Es { alpha, prior } => write!(f, "Es {{ alpha: {alpha}, prior: {prior} }}"),
            RiskKind::ShortfallValue { loss, prior } => {
                write!(f, "ShortfallValue {{ loss: {loss:?}, prior: {prior} }}")
            }
            RiskKind::ExpectedLoss { prior } => write!(f, "ExpectedLoss {{ prior: {prior} }}"),
            RiskKind::MaxLoss => write!(f, "MaxLoss"),
            RiskKind::AcceptanceMargin { set } => write!(f, "AcceptanceMargin {{ set: {set:?} }}"),
            RiskKind::Custom { .. } => write!(f, "Custom"),
        }
    }
}

/// An evaluable risk functional with an optional reference payoff `S` and
/// explicit claims.
#[derive(Debug, Clone)]
pub struct RiskFunctional {
    label: String,
    kind: RiskKind,
    numeraire: Option<Position>,
    claims: RiskClaims,
}

impl RiskFunctional {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn claims(&self) -> RiskClaims {
        self.claims
    }

    pub fn numeraire(&self) -> Option<&Position> {
        self.numeraire.as_ref()
    }

    pub(crate) fn kind(&self) -> &RiskKind {
        &self.kind
    }

    /// Value at risk as a functional; `S = 1`.
    pub fn var(space: &ScenarioSpace, alpha: f64, prior: usize) -> Result<Self> {
        check_alpha(alpha)?;
        space.prior(prior)?;
        Ok(RiskFunctional {
            label: format!("var[{alpha}]"),
            kind: RiskKind::Var { alpha, prior },
            numeraire: Some(space.unit()),
            claims: RiskClaims {
                convex: false,
                monotone: true,
                surplus_invariant: false,
                si_subject_to_positivity: true,
                s_additive: true,
            },
        })
    }

    /// Expected shortfall as a functional; `S = 1`.
    pub fn es(space: &ScenarioSpace, alpha: f64, prior: usize) -> Result<Self> {
        check_alpha(alpha)?;
        space.prior(prior)?;
        Ok(RiskFunctional {
            label: format!("es[{alpha}]"),
            kind: RiskKind::Es { alpha, prior },
            numeraire: Some(space.unit()),
            claims: RiskClaims {
                convex: true,
                monotone: true,
                surplus_invariant: false,
                si_subject_to_positivity: false,
                s_additive: true,
            },
        })
    }

    /// Shortfall level map `X -> E_P[l(X^-)]`; surplus invariant, not
    /// S-additive.
    pub fn shortfall_value(space: &ScenarioSpace, loss: LossFunction, prior: usize) -> Result<Self> {
        loss.validate()?;
        space.prior(prior)?;
        let convex = loss.is_convex();
        Ok(RiskFunctional {
            label: "shortfall".into(),
            kind: RiskKind::ShortfallValue { loss, prior },
            numeraire: None,
            claims: RiskClaims {
                convex,
                monotone: true,
                surplus_invariant: true,
                si_subject_to_positivity: true,
                s_additive: false,
            },
        })
    }

    /// Linear expected loss `X -> E_P[-X]`; `S = 1`.
    pub fn expected_loss(space: &ScenarioSpace, prior: usize) -> Result<Self> {
        space.prior(prior)?;
        Ok(RiskFunctional {
            label: "expected-loss".into(),
            kind: RiskKind::ExpectedLoss { prior },
            numeraire: Some(space.unit()),
            claims: RiskClaims {
                convex: true,
                monotone: true,
                surplus_invariant: false,
                si_subject_to_positivity: false,
                s_additive: true,
            },
        })
    }

    /// Worst-case loss `X -> -min_supp X`; `S = 1`.
    pub fn max_loss(space: &ScenarioSpace) -> Self {
        RiskFunctional {
            label: "max-loss".into(),
            kind: RiskKind::MaxLoss,
            numeraire: Some(space.unit()),
            claims: RiskClaims {
                convex: true,
                monotone: true,
                surplus_invariant: false,
                si_subject_to_positivity: true,
                s_additive: true,
            },
        }
    }

    /// Custom evaluator with caller-provided claims and optional `S`.
    pub fn custom(
        label: impl Into<String>,
        eval: Evaluator,
        numeraire: Option<Position>,
        claims: RiskClaims,
    ) -> Self {
        RiskFunctional { label: label.into(), kind: RiskKind::Custom { eval }, numeraire, claims }
    }

    /// Margin functional `X -> inf{m ; X + m S in A}` for a monotone
    /// acceptance set and a reference payoff `S >= 0` that is strictly
    /// positive on the support.
    ///
    /// Evaluation brackets `m` by doubling and bisects to `1e-10`; `+inf` is
    /// returned when no `m <= 1e12` is acceptable, and a bracket escaping
    /// below `-1e12` is reported as an error (minus infinity is never a
    /// legitimate value).
    pub fn from_acceptance(space: &ScenarioSpace, set: AcceptanceSet, s: Position) -> Result<Self> {
        if !set.claims().monotone {
            return Err(EngineError::MissingClaim("monotone"));
        }
        if s.len() != space.len() {
            return Err(EngineError::LengthMismatch { expected: space.len(), got: s.len() });
        }
        if let Some((i, &v)) = s.payoffs().iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(EngineError::NegativeEntry { index: i, value: v });
        }
        if let Some(i) = space.support().indices().find(|&i| s.get(i) == 0.0) {
            return Err(EngineError::DegenerateNumeraire { index: i });
        }
        let convex = set.claims().convex;
        let si = set.claims().surplus_invariant;
        Ok(RiskFunctional {
            label: format!("margin[{}]", set.label()),
            kind: RiskKind::AcceptanceMargin { set: Box::new(set) },
            numeraire: Some(s),
            claims: RiskClaims {
                convex,
                monotone: true,
                surplus_invariant: false,
                si_subject_to_positivity: si,
                s_additive: true,
            },
        })
    }

    /// Evaluates the functional. Never returns minus infinity.
    pub fn eval(&self, space: &ScenarioSpace, x: &Position) -> Result<RiskValue> {
        match &self.kind {
            RiskKind::Var { alpha, prior } => Ok(RiskValue::Finite(var(space, x, *alpha, *prior)?)),
            RiskKind::Es { alpha, prior } => Ok(RiskValue::Finite(es(space, x, *alpha, *prior)?)),
            RiskKind::ShortfallValue { loss, prior } => {
                Ok(RiskValue::Finite(shortfall(space, x, loss, *prior)?))
            }
            RiskKind::ExpectedLoss { prior } => {
                let p = space.prior(*prior)?;
                Ok(RiskValue::Finite(-p.expect(x.payoffs())))
            }
            RiskKind::MaxLoss => {
                let worst = space
                    .support()
                    .indices()
                    .map(|i| x.get(i))
                    .fold(f64::INFINITY, f64::min);
                Ok(RiskValue::Finite(if worst.is_finite() { -worst } else { 0.0 }))
            }
            RiskKind::AcceptanceMargin { set } => {
                let s = self.numeraire.as_ref().expect("margin functional always has S");
                acceptance_margin(space, set, s, x)
            }
            RiskKind::Custom { eval } => eval(space, x),
        }
    }
}

/// Bisection core of `from_acceptance`.
fn acceptance_margin(
    space: &ScenarioSpace,
    set: &AcceptanceSet,
    s: &Position,
    x: &Position,
) -> Result<RiskValue> {
    let member = |m: f64| set.contains(space, &x.add_scaled(m, s));
    let s_min = space
        .support()
        .indices()
        .map(|i| s.get(i))
        .fold(f64::INFINITY, f64::min);
    let guess = (1.0 + x.sup_norm() / s_min).max(1.0);

    // Acceptable upper end.
    let mut hi = guess;
    while !member(hi) {
        hi *= 2.0;
        if hi > BRACKET_CAP {
            return Ok(RiskValue::PosInf);
        }
    }
    // Unacceptable lower end.
    let mut lo = -guess;
    while member(lo) {
        lo *= 2.0;
        if lo < -BRACKET_CAP {
            return Err(EngineError::MinusInfinitySuspect { cap: BRACKET_CAP });
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if member(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(RiskValue::Finite(hi))
}

/// Options shared by the randomized functional checkers.
#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub trials: u64,
    pub seed: u64,
    pub half_width: f64,
    pub tolerance: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { trials: 1000, seed: 0, half_width: 5.0, tolerance: 1e-8 }
    }
}

/// Randomized S-additivity check: `rho(X + mS) = rho(X) - m` on pairs where
/// both sides are finite.
pub fn check_s_additive(
    space: &ScenarioSpace,
    rho: &RiskFunctional,
    opts: CheckOptions,
) -> Result<LawReport> {
    let s = rho.numeraire().ok_or(EngineError::MissingClaim("S"))?.clone();
    let sampler = PositionSampler::new(space, opts.half_width);
    let violation = find_first_violation(opts.trials, |t| {
        let mut rng = trial_rng(opts.seed, t);
        let x = sampler.sample(&mut rng);
        let m: f64 = rng.gen_range(-opts.half_width..=opts.half_width);
        let base = rho.eval(space, &x);
        let shifted = rho.eval(space, &x.add_scaled(m, &s));
        match (base, shifted) {
            (Ok(RiskValue::Finite(v0)), Ok(RiskValue::Finite(v1))) => {
                if (v1 - (v0 - m)).abs() > opts.tolerance {
                    Some(
                        Witness::new(format!(
                            "rho(X+mS) = {v1} but rho(X) - m = {}",
                            v0 - m
                        ))
                        .at_trial(t)
                        .with_x(x.payoffs().to_vec())
                        .with_values(vec![m, v0, v1]),
                    )
                } else {
                    None
                }
            }
            // Pairs with an infinite side are vacuous for this law.
            (Ok(_), Ok(_)) => None,
            (Err(e), _) | (_, Err(e)) => {
                Some(Witness::new(format!("evaluation error: {e}")).at_trial(t))
            }
        }
    });
    Ok(match violation {
        Some(w) => LawReport::counterexample("s-additivity", opts.trials, opts.seed, w),
        None => LawReport::pass("s-additivity", opts.trials, opts.seed),
    })
}

/// Randomized check of surplus invariance subject to positivity:
/// `rho(X) > 0` implies `rho(X) = rho(-X^-)`. When the functional claims to
/// be S-additive and monotone, the verdict is cross-checked against the
/// surplus invariance of its zero sublevel set; a disagreement is itself a
/// counterexample.
pub fn check_si_subject_pos(
    space: &ScenarioSpace,
    rho: &RiskFunctional,
    opts: CheckOptions,
) -> Result<LawReport> {
    let sampler = PositionSampler::new(space, opts.half_width);
    let violation = find_first_violation(opts.trials, |t| {
        let mut rng = trial_rng(opts.seed, t);
        let x = sampler.sample(&mut rng);
        let v = match rho.eval(space, &x) {
            Ok(v) => v,
            Err(e) => return Some(Witness::new(format!("evaluation error: {e}")).at_trial(t)),
        };
        let positive = match v {
            RiskValue::Finite(f) => f > 0.0,
            RiskValue::PosInf => true,
        };
        if !positive {
            return None;
        }
        let lossonly = x.neg_part().negate();
        let v2 = match rho.eval(space, &lossonly) {
            Ok(v2) => v2,
            Err(e) => return Some(Witness::new(format!("evaluation error: {e}")).at_trial(t)),
        };
        let ok = match (v, v2) {
            (RiskValue::Finite(a), RiskValue::Finite(b)) => (a - b).abs() <= opts.tolerance,
            (RiskValue::PosInf, RiskValue::PosInf) => true,
            _ => false,
        };
        if ok {
            None
        } else {
            Some(
                Witness::new(format!("rho(X) = {v} > 0 but rho(-X^-) = {v2}"))
                    .at_trial(t)
                    .with_x(x.payoffs().to_vec())
                    .with_y(lossonly.payoffs().to_vec())
                    .with_values(vec![v.as_f64(), v2.as_f64()]),
            )
        }
    });

    let mut report = match violation {
        Some(w) => LawReport::counterexample("si-subject-to-positivity", opts.trials, opts.seed, w),
        None => LawReport::pass("si-subject-to-positivity", opts.trials, opts.seed),
    };

    // Cross-check against the sublevel-set characterization.
    let claims = rho.claims();
    if claims.s_additive && claims.monotone {
        let sublevel = AcceptanceSet::sublevel_of(space, rho);
        let set_report = crate::acceptance::check_surplus_invariant(
            space,
            &sublevel,
            crate::acceptance::CheckOptions {
                trials: opts.trials,
                seed: opts.seed,
                half_width: opts.half_width,
            },
        );
        if set_report.verdict == report.verdict {
            report = report.with_note(
                "sublevel-set surplus-invariance cross-check agrees with the direct verdict",
            );
        } else {
            let detail = format!(
                "direct verdict {:?} disagrees with sublevel-set surplus invariance {:?}",
                report.verdict, set_report.verdict
            );
            let mut w = Witness::new(detail);
            if let Some(sw) = set_report.witness {
                w.x = sw.x;
                w.y = sw.y;
            }
            report = LawReport::counterexample("si-subject-to-positivity", opts.trials, opts.seed, w)
                .with_note("cross-check mismatch: claims are inconsistent with behavior");
        }
    }
    Ok(report)
}

/// Flags the impossible claim combination: a monotone functional cannot be
/// surplus invariant, S-additive, and finite anywhere, since those force
/// `rho(X) - m = rho(-(X+mS)^-) >= rho(0)` for every `m`.
pub fn incompatible_claims(rho: &RiskFunctional) -> Option<String> {
    let c = rho.claims();
    if c.monotone && c.surplus_invariant && c.s_additive {
        Some(format!(
            "`{}` claims monotone + surplus invariant + S-additive; such a functional is \
             identically +inf",
            rho.label()
        ))
    } else {
        None
    }
}

use rand::Rng;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Verdict;
    use crate::acceptance::AcceptanceSet;

    fn uniform2() -> ScenarioSpace {
        ScenarioSpace::uniform(2)
    }

    /// Independent quantile oracle: grid scan over m at resolution 1e-4,
    /// then bisection refinement on the monotone indicator.
    fn var_oracle(space: &ScenarioSpace, x: &Position, alpha: f64, prior: usize) -> f64 {
        let p = &space.priors()[prior];
        let ok = |m: f64| {
            let mass: f64 = x
                .payoffs()
                .iter()
                .zip(&p.weights)
                .filter(|(&v, _)| v + m < 0.0)
                .map(|(_, &w)| w)
                .sum();
            mass <= alpha
        };
        let bound = x.sup_norm() + 1.0;
        let mut m = -bound;
        while !ok(m) {
            m += 1e-4;
        }
        let mut hi = m;
        let mut lo = m - 1e-4;
        if ok(lo) {
            return lo; // hit the plateau exactly
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Adaptive quadrature of the (monotone, piecewise-constant) level map
    /// `beta -> var(X, beta)`; sound because equal endpoint values of a
    /// monotone step function force constancy on the interval.
    fn es_oracle(space: &ScenarioSpace, x: &Position, alpha: f64, prior: usize) -> f64 {
        fn integrate(
            f: &dyn Fn(f64) -> f64,
            lo: f64,
            hi: f64,
            flo: f64,
            fhi: f64,
        ) -> f64 {
            if flo == fhi || hi - lo < 1e-12 {
                return 0.5 * (flo + fhi) * (hi - lo);
            }
            let mid = 0.5 * (lo + hi);
            let fmid = f(mid);
            integrate(f, lo, mid, flo, fmid) + integrate(f, mid, hi, fmid, fhi)
        }
        let f = |beta: f64| var_oracle(space, x, beta, prior);
        let eps = 1e-9;
        let (flo, fhi) = (f(eps), f(alpha));
        integrate(&f, eps, alpha, flo, fhi) / alpha
    }

    #[test]
    fn var_examples() {
        let s = uniform2();
        let x = s.position(vec![-1.0, 2.0]).unwrap();
        assert_eq!(var(&s, &x, 0.4, 0).unwrap(), 1.0);
        assert_eq!(var(&s, &x, 0.6, 0).unwrap(), -2.0);
        let c = s.constant(3.5);
        assert_eq!(var(&s, &c, 0.25, 0).unwrap(), -3.5);
        assert!(var(&s, &x, 0.0, 0).is_err());
        assert!(var(&s, &x, 1.0, 0).is_err());
    }

    #[test]
    fn es_examples() {
        let s = uniform2();
        let x = s.position(vec![-1.0, 2.0]).unwrap();
        assert_eq!(es(&s, &x, 0.5, 0).unwrap(), 1.0);
        let x = s.position(vec![-1.0, 10.0]).unwrap();
        assert!((es(&s, &x, 0.75, 0).unwrap() - (-8.0 / 3.0)).abs() < 1e-15);
        let c = s.constant(2.0);
        assert_eq!(es(&s, &c, 0.3, 0).unwrap(), -2.0);
    }

    #[test]
    fn var_es_match_brute_force_oracle() {
        let s = ScenarioSpace::new(
            vec!["a", "b", "c"],
            vec![("P", vec![0.2, 0.3, 0.5])],
        )
        .unwrap();
        let sampler = PositionSampler::new(&s, 5.0);
        for t in 0..200 {
            let mut rng = trial_rng(99, t);
            let x = sampler.sample(&mut rng);
            for &alpha in &[0.1, 0.25, 0.5, 0.9] {
                let v = var(&s, &x, alpha, 0).unwrap();
                let vo = var_oracle(&s, &x, alpha, 0);
                assert!((v - vo).abs() < 1e-6, "var mismatch: {v} vs {vo} for {x:?}");
                let e = es(&s, &x, alpha, 0).unwrap();
                let eo = es_oracle(&s, &x, alpha, 0);
                assert!((e - eo).abs() < 1e-6, "es mismatch: {e} vs {eo} for {x:?}");
            }
        }
    }

    #[test]
    fn shortfall_examples() {
        let s = uniform2();
        let x = s.position(vec![-1.0, 2.0]).unwrap();
        assert_eq!(shortfall(&s, &x, &LossFunction::Power { p: 1.0 }, 0).unwrap(), 0.5);
        let pos = s.position(vec![0.5, 2.0]).unwrap();
        assert_eq!(shortfall(&s, &pos, &LossFunction::Exponential, 0).unwrap(), 0.0);
        let x = s.position(vec![-2.0, -1.0]).unwrap();
        assert_eq!(shortfall(&s, &x, &LossFunction::Power { p: 2.0 }, 0).unwrap(), 2.5);
    }

    #[test]
    fn span_examples() {
        let s = uniform2();
        let x = s.position(vec![-1.0, 2.0]).unwrap();
        let e1 = EventMask::from_indices(2, &[0]);
        let e2 = EventMask::from_indices(2, &[1]);
        assert!(!span_accept(&s, &x, &e1, 0).unwrap());
        assert!(span_accept(&s, &x, &e2, 0).unwrap());
        let pos = s.position(vec![0.0, 3.0]).unwrap();
        assert!(span_accept(&s, &pos, &EventMask::full(2), 0).unwrap());
    }

    #[test]
    fn margin_examples() {
        let s = uniform2();
        let rho =
            RiskFunctional::from_acceptance(&s, AcceptanceSet::positive_orthant(), s.unit())
                .unwrap();
        let x = s.position(vec![-1.0, 2.0]).unwrap();
        let v = rho.eval(&s, &x).unwrap().finite().unwrap();
        assert!((v - 1.0).abs() < 1e-9);

        let pos = s.position(vec![0.5, 2.0]).unwrap();
        let v = rho.eval(&s, &pos).unwrap().finite().unwrap();
        assert!((v + 0.5).abs() < 1e-9);

        // Linear halfspace margin equals the linear oracle.
        let half = AcceptanceSet::halfspace(&s, vec![0.5, 0.5], 0.0).unwrap();
        let rho = RiskFunctional::from_acceptance(&s, half, s.unit()).unwrap();
        let sampler = PositionSampler::new(&s, 5.0);
        for t in 0..50 {
            let mut rng = trial_rng(5, t);
            let x = sampler.sample(&mut rng);
            let expect = -(0.5 * x.get(0) + 0.5 * x.get(1));
            let got = rho.eval(&s, &x).unwrap().finite().unwrap();
            assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
        }
    }

    #[test]
    fn margin_attains_the_infimum_within_eps() {
        let s = uniform2();
        let set = AcceptanceSet::es_level(&s, 0.5, 0).unwrap();
        let rho = RiskFunctional::from_acceptance(&s, set.clone(), s.unit()).unwrap();
        let x = s.position(vec![-1.0, 2.0]).unwrap();
        let m = rho.eval(&s, &x).unwrap().finite().unwrap();
        let eps = 1e-8;
        assert!(set.contains(&s, &x.add_scaled(m + eps, &s.unit())));
        assert!(!set.contains(&s, &x.add_scaled(m - eps, &s.unit())));
    }

    #[test]
    fn margin_rejects_bad_inputs() {
        let s = uniform2();
        // Degenerate numeraire.
        let bad_s = s.position(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            RiskFunctional::from_acceptance(&s, AcceptanceSet::positive_orthant(), bad_s),
            Err(EngineError::DegenerateNumeraire { .. })
        ));
        // Set without a monotonicity claim.
        let custom = AcceptanceSet::custom(
            "even",
            std::sync::Arc::new(|_: &ScenarioSpace, _: &Position| true),
            crate::acceptance::SetClaims {
                convex: false,
                cone: false,
                monotone: false,
                surplus_invariant: false,
            },
        );
        assert!(matches!(
            RiskFunctional::from_acceptance(&s, custom, s.unit()),
            Err(EngineError::MissingClaim("monotone"))
        ));
        // Whole space: every m is acceptable, the bracket escapes below.
        let rho =
            RiskFunctional::from_acceptance(&s, AcceptanceSet::whole_space(), s.unit()).unwrap();
        let x = s.position(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            rho.eval(&s, &x),
            Err(EngineError::MinusInfinitySuspect { .. })
        ));
    }

    #[test]
    fn margin_plus_infinity() {
        let s = uniform2();
        // Empty set: nothing is ever acceptable.
        let never = AcceptanceSet::custom(
            "empty",
            std::sync::Arc::new(|_: &ScenarioSpace, _: &Position| false),
            crate::acceptance::SetClaims {
                convex: true,
                cone: false,
                monotone: true,
                surplus_invariant: true,
            },
        );
        let rho = RiskFunctional::from_acceptance(&s, never, s.unit()).unwrap();
        let x = s.position(vec![1.0, 1.0]).unwrap();
        assert_eq!(rho.eval(&s, &x).unwrap(), RiskValue::PosInf);
    }

    #[test]
    fn s_additivity_of_es_and_margin() {
        let s = uniform2();
        let es_rho = RiskFunctional::es(&s, 0.5, 0).unwrap();
        let opts = CheckOptions { trials: 400, seed: 11, ..Default::default() };
        assert!(check_s_additive(&s, &es_rho, opts).unwrap().is_pass());

        let rho =
            RiskFunctional::from_acceptance(&s, AcceptanceSet::positive_orthant(), s.unit())
                .unwrap();
        assert!(check_s_additive(&s, &rho, opts).unwrap().is_pass());

        // The shortfall level map is not S-additive; give it S = 1 and watch it fail.
        let mut sf = RiskFunctional::shortfall_value(&s, LossFunction::Power { p: 2.0 }, 0).unwrap();
        sf.numeraire = Some(s.unit());
        let report = check_s_additive(&s, &sf, opts).unwrap();
        assert_eq!(report.verdict, Verdict::Counterexample);
    }

    #[test]
    fn si_subject_pos_var_passes_es_fails() {
        let s = uniform2();
        let opts = CheckOptions { trials: 800, seed: 3, ..Default::default() };

        let var_set = AcceptanceSet::var_level(&s, 0.4, 0).unwrap();
        let rho = RiskFunctional::from_acceptance(&s, var_set, s.unit()).unwrap();
        let report = check_si_subject_pos(&s, &rho, opts).unwrap();
        assert!(report.is_pass(), "{report:?}");

        let es_set = AcceptanceSet::es_level(&s, 0.75, 0).unwrap();
        let rho = RiskFunctional::from_acceptance(&s, es_set, s.unit()).unwrap();
        let report = check_si_subject_pos(&s, &rho, opts).unwrap();
        assert_eq!(report.verdict, Verdict::Counterexample);
    }

    #[test]
    fn incompatibility_is_flagged() {
        let s = uniform2();
        let all_three = RiskFunctional::custom(
            "impossible",
            Arc::new(|_: &ScenarioSpace, _: &Position| Ok(RiskValue::Finite(0.0))),
            Some(s.unit()),
            RiskClaims {
                convex: true,
                monotone: true,
                surplus_invariant: true,
                si_subject_to_positivity: true,
                s_additive: true,
            },
        );
        assert!(incompatible_claims(&all_three).is_some());
        let es_rho = RiskFunctional::es(&s, 0.5, 0).unwrap();
        assert!(incompatible_claims(&es_rho).is_none());
    }

    #[test]
    fn var_is_si_subject_to_positivity_on_the_grid() {
        // Exact equality: whenever var(X) > 0, var(X) = var(-X^-).
        let s = ScenarioSpace::new(vec!["a", "b", "c"], vec![("P", vec![0.25, 0.25, 0.5])])
            .unwrap();
        let grid: Vec<f64> = (-6..=6).map(|i| 0.5 * i as f64).collect();
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    let x = s.position(vec![a, b, c]).unwrap();
                    for alpha in [0.2, 0.4, 0.6] {
                        let v = var(&s, &x, alpha, 0).unwrap();
                        if v > 0.0 {
                            let w = var(&s, &x.neg_part().negate(), alpha, 0).unwrap();
                            assert_eq!(v, w, "alpha={alpha}, X={x:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn es_is_translation_equivariant_exactly_on_dyadic_grids() {
        // Dyadic payoffs and shifts make the step integration exact in f64.
        let s = uniform2();
        let grid: Vec<f64> = (-8..=8).map(|i| 0.5 * i as f64).collect();
        for &a in &grid {
            for &b in &grid {
                let x = s.position(vec![a, b]).unwrap();
                for &m in &[-2.0, -0.5, 0.5, 3.0] {
                    let shifted = s.position(vec![a + m, b + m]).unwrap();
                    let lhs = es(&s, &shifted, 0.5, 0).unwrap();
                    let rhs = es(&s, &x, 0.5, 0).unwrap() - m;
                    assert_eq!(lhs, rhs, "X={x:?}, m={m}");
                }
            }
        }
    }

    #[test]
    fn es_is_monotone_and_convex_on_grid_pairs() {
        let s = uniform2();
        let grid: Vec<f64> = (-4..=4).map(|i| i as f64).collect();
        let points: Vec<Position> = grid
            .iter()
            .flat_map(|&a| grid.iter().map(move |&b| (a, b)))
            .map(|(a, b)| s.position(vec![a, b]).unwrap())
            .collect();
        for x in &points {
            for y in &points {
                let ex = es(&s, x, 0.5, 0).unwrap();
                let ey = es(&s, y, 0.5, 0).unwrap();
                if crate::scenario::order_leq(x, y, s.support()) {
                    assert!(ex >= ey, "monotonicity fails: {x:?} <= {y:?}");
                }
                let mid = x.add(y).scale(0.5);
                let em = es(&s, &mid, 0.5, 0).unwrap();
                assert!(em <= 0.5 * (ex + ey) + 1e-12, "convexity fails at {x:?}, {y:?}");
            }
        }
    }

    #[test]
    fn risk_value_serializes_finite_and_inf() {
        assert_eq!(serde_json::to_string(&RiskValue::Finite(1.5)).unwrap(), "1.5");
        assert_eq!(serde_json::to_string(&RiskValue::PosInf).unwrap(), "\"inf\"");
    }
}
