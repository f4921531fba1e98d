//! Acceptance sets as membership oracles, plus randomized and enumerated
//! checkers for the structural laws of surplus-invariant monotone sets:
//! the loss-profile equivalences, reconstruction from the solid part
//! `D = -A_-`, band-projection stability, and convexity via `D`.
//!
//! Sets are oracles rather than explicit geometry, so every law is testable
//! by sampling or enumeration on arbitrary built-ins and user oracles alike.
//! Closedness of sublevel oracles is not falsifiable from finitely many
//! membership queries; built-ins are closed by construction and custom
//! oracles get a note in the report instead.

use std::fmt;
use std::sync::Arc;

use crate::error::{EngineError, Result};
use crate::par::find_first_violation;
use crate::report::{LawReport, Witness};
use crate::risk::{es, shortfall, span_accept, var, LossFunction, RiskFunctional, RiskValue};
use crate::sampler::{trial_rng, PositionSampler};
use crate::scenario::{EventMask, Position, ScenarioSpace};

/// Structural flags claimed by a set. Checkers verify claims; they never
/// assume them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct SetClaims {
    pub convex: bool,
    pub cone: bool,
    pub monotone: bool,
    pub surplus_invariant: bool,
}

type Oracle = Arc<dyn Fn(&ScenarioSpace, &Position) -> bool + Send + Sync>;

#[derive(Clone)]
pub(crate) enum SetKind {
    WholeSpace,
    PositiveOrthant,
    /// `{X ; X_i >= lower_i on the support}`, `lower_i <= 0` or `-inf` (free).
    Box { lower: Vec<f64> },
    VarLevel { alpha: f64, prior: usize },
    EsLevel { alpha: f64, prior: usize },
    Span { event: EventMask, prior: usize },
    ShortfallLevel { loss: LossFunction, prior: usize, level: f64 },
    /// `{X ; X^- <= u for some box bound u}`: union of loss boxes.
    LossBoxUnion { uppers: Vec<Vec<f64>> },
    /// `{X ; <w, X> >= bound}` with `w >= 0`.
    Halfspace { weights: Vec<f64>, bound: f64 },
    Intersection { members: Vec<AcceptanceSet> },
    Custom { oracle: Oracle },
}

impl fmt::Debug for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetKind::WholeSpace => write!(f, "WholeSpace"),
            SetKind::PositiveOrthant => write!(f, "PositiveOrthant"),
            SetKind::Box { lower } => write!(f, "Box {{ lower: {lower:?} }}"),
            SetKind::VarLevel { alpha, prior } => write!(f, "VarLevel({alpha}, prior {prior})"),
            SetKind::EsLevel { alpha, prior } => write!(f, "EsLevel({alpha}, prior {prior})"),
            SetKind::Span { event, prior } => write!(f, "Span({event:?}, prior {prior})"),
            SetKind::ShortfallLevel { loss, prior, level } => {
                write!(f, "ShortfallLevel({loss:?}, prior {prior}, level {level})")
            }
            SetKind::LossBoxUnion { uppers } => write!(f, "LossBoxUnion({uppers:?})"),
            SetKind::Halfspace { weights, bound } => {
                write!(f, "Halfspace({weights:?} >= {bound})")
            }
            SetKind::Intersection { members } => write!(f, "Intersection({members:?})"),
            SetKind::Custom { .. } => write!(f, "Custom"),
        }
    }
}

/// An acceptance set: a deterministic membership oracle over canonical
/// (quasi-sure) representatives, together with structural claims.
#[derive(Debug, Clone)]
pub struct AcceptanceSet {
    label: String,
    kind: SetKind,
    claims: SetClaims,
}

impl AcceptanceSet {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn claims(&self) -> SetClaims {
        self.claims
    }

    /// The entire space.
    pub fn whole_space() -> Self {
        AcceptanceSet {
            label: "whole-space".into(),
            kind: SetKind::WholeSpace,
            claims: SetClaims { convex: true, cone: true, monotone: true, surplus_invariant: true },
        }
    }

    /// `{X >= 0}` quasi-surely.
    pub fn positive_orthant() -> Self {
        AcceptanceSet {
            label: "positive-orthant".into(),
            kind: SetKind::PositiveOrthant,
            claims: SetClaims { convex: true, cone: true, monotone: true, surplus_invariant: true },
        }
    }

    /// Per-coordinate loss limits: `X_i >= lower_i` on the support, with
    /// `lower_i = -inf` leaving the coordinate unconstrained. All bounds must
    /// be `<= 0` so the set is surplus invariant.
    pub fn box_lower(space: &ScenarioSpace, lower: Vec<f64>) -> Result<Self> {
        if lower.len() != space.len() {
            return Err(EngineError::LengthMismatch { expected: space.len(), got: lower.len() });
        }
        if let Some(&l) = lower.iter().find(|&&l| l > 0.0 || l.is_nan()) {
            return Err(EngineError::InvalidParameter {
                name: "lower",
                reason: format!("bounds must be <= 0 (or -inf), got {l}"),
            });
        }
        let cone = lower.iter().all(|&l| l == 0.0 || l == f64::NEG_INFINITY);
        Ok(AcceptanceSet {
            label: "box".into(),
            kind: SetKind::Box { lower },
            claims: SetClaims { convex: true, cone, monotone: true, surplus_invariant: true },
        })
    }

    /// `{VaR_alpha <= 0}`: surplus-invariant cone, not convex in general.
    pub fn var_level(space: &ScenarioSpace, alpha: f64, prior: usize) -> Result<Self> {
        space.prior(prior)?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(EngineError::InvalidParameter {
                name: "alpha",
                reason: format!("level must lie in (0,1), got {alpha}"),
            });
        }
        Ok(AcceptanceSet {
            label: format!("var[{alpha}]"),
            kind: SetKind::VarLevel { alpha, prior },
            claims: SetClaims { convex: false, cone: true, monotone: true, surplus_invariant: true },
        })
    }

    /// `{ES_alpha <= 0}`: convex cone, not surplus invariant.
    pub fn es_level(space: &ScenarioSpace, alpha: f64, prior: usize) -> Result<Self> {
        space.prior(prior)?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(EngineError::InvalidParameter {
                name: "alpha",
                reason: format!("level must lie in (0,1), got {alpha}"),
            });
        }
        Ok(AcceptanceSet {
            label: format!("es[{alpha}]"),
            kind: SetKind::EsLevel { alpha, prior },
            claims: SetClaims { convex: true, cone: true, monotone: true, surplus_invariant: false },
        })
    }

    /// SPAN-style test on an event: no prior-charged loss scenario inside it.
    pub fn span(space: &ScenarioSpace, event: EventMask, prior: usize) -> Result<Self> {
        space.prior(prior)?;
        if event.len() != space.len() {
            return Err(EngineError::LengthMismatch { expected: space.len(), got: event.len() });
        }
        Ok(AcceptanceSet {
            label: "span".into(),
            kind: SetKind::Span { event, prior },
            claims: SetClaims { convex: true, cone: true, monotone: true, surplus_invariant: true },
        })
    }

    /// `{E_P[l(X^-)] <= level}` for a built-in loss function.
    pub fn shortfall_level(
        space: &ScenarioSpace,
        loss: LossFunction,
        prior: usize,
        level: f64,
    ) -> Result<Self> {
        loss.validate()?;
        space.prior(prior)?;
        if level.is_nan() || level < 0.0 {
            return Err(EngineError::InvalidParameter {
                name: "level",
                reason: format!("shortfall budget must be >= 0, got {level}"),
            });
        }
        let convex = loss.is_convex();
        Ok(AcceptanceSet {
            label: "shortfall".into(),
            kind: SetKind::ShortfallLevel { loss, prior, level },
            claims: SetClaims { convex, cone: false, monotone: true, surplus_invariant: true },
        })
    }

    /// `{X ; X^- <= u for some u in uppers}`; non-convex once two maximal
    /// boxes remain. Dominated boxes are pruned.
    pub fn loss_box_union(space: &ScenarioSpace, uppers: Vec<Vec<f64>>) -> Result<Self> {
        if uppers.is_empty() {
            return Err(EngineError::InvalidParameter {
                name: "uppers",
                reason: "at least one loss box is required".into(),
            });
        }
        for u in &uppers {
            if u.len() != space.len() {
                return Err(EngineError::LengthMismatch { expected: space.len(), got: u.len() });
            }
            if let Some((i, &v)) = u.iter().enumerate().find(|(_, &v)| v < 0.0 || !v.is_finite()) {
                return Err(EngineError::NegativeEntry { index: i, value: v });
            }
        }
        let mut maximal: Vec<Vec<f64>> = Vec::new();
        for u in uppers {
            let dominated = maximal
                .iter()
                .any(|m| u.iter().zip(m).all(|(a, b)| a <= b));
            if !dominated {
                maximal.retain(|m| !m.iter().zip(&u).all(|(a, b)| a <= b));
                maximal.push(u);
            }
        }
        let convex = maximal.len() <= 1;
        Ok(AcceptanceSet {
            label: "loss-box-union".into(),
            kind: SetKind::LossBoxUnion { uppers: maximal },
            claims: SetClaims { convex, cone: false, monotone: true, surplus_invariant: true },
        })
    }

    /// Monotone halfspace `{<w, X> >= bound}` with `w >= 0`; convex and
    /// monotone but not surplus invariant.
    pub fn halfspace(space: &ScenarioSpace, weights: Vec<f64>, bound: f64) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(EngineError::LengthMismatch { expected: space.len(), got: weights.len() });
        }
        if let Some((i, &w)) = weights.iter().enumerate().find(|(_, &w)| w < 0.0 || !w.is_finite()) {
            return Err(EngineError::NegativeEntry { index: i, value: w });
        }
        Ok(AcceptanceSet {
            label: "halfspace".into(),
            kind: SetKind::Halfspace { weights, bound },
            claims: SetClaims {
                convex: true,
                cone: bound == 0.0,
                monotone: true,
                surplus_invariant: false,
            },
        })
    }

    /// Intersection; claims are the conjunction of the members' claims.
    pub fn intersection(members: Vec<AcceptanceSet>) -> Result<Self> {
        if members.is_empty() {
            return Err(EngineError::InvalidParameter {
                name: "members",
                reason: "intersection of zero sets is not representable".into(),
            });
        }
        let claims = SetClaims {
            convex: members.iter().all(|m| m.claims.convex),
            cone: members.iter().all(|m| m.claims.cone),
            monotone: members.iter().all(|m| m.claims.monotone),
            surplus_invariant: members.iter().all(|m| m.claims.surplus_invariant),
        };
        let label = format!(
            "intersection[{}]",
            members.iter().map(|m| m.label.clone()).collect::<Vec<_>>().join(", ")
        );
        Ok(AcceptanceSet { label, kind: SetKind::Intersection { members }, claims })
    }

    /// User-supplied oracle with caller-asserted claims. Order closedness of
    /// custom oracles is not verifiable from membership queries; law reports
    /// carry a note.
    pub fn custom(label: impl Into<String>, oracle: Oracle, claims: SetClaims) -> Self {
        AcceptanceSet { label: label.into(), kind: SetKind::Custom { oracle }, claims }
    }

    /// Zero sublevel set `{rho <= 0}` of a functional.
    pub fn sublevel_of(space: &ScenarioSpace, rho: &RiskFunctional) -> Self {
        let rho = rho.clone();
        let claims = SetClaims {
            convex: rho.claims().convex,
            cone: false,
            monotone: rho.claims().monotone,
            surplus_invariant: rho.claims().si_subject_to_positivity,
        };
        let _ = space;
        AcceptanceSet {
            label: format!("sublevel[{}]", rho.label()),
            kind: SetKind::Custom {
                oracle: Arc::new(move |sp: &ScenarioSpace, x: &Position| {
                    matches!(rho.eval(sp, x), Ok(RiskValue::Finite(v)) if v <= 0.0)
                }),
            },
            claims,
        }
    }

    /// Membership oracle. Inputs are expected in canonical (quasi-sure)
    /// representative form, as produced by `ScenarioSpace::position` and all
    /// engine arithmetic.
    pub fn contains(&self, space: &ScenarioSpace, x: &Position) -> bool {
        match &self.kind {
            SetKind::WholeSpace => true,
            SetKind::PositiveOrthant => space.support().indices().all(|i| x.get(i) >= 0.0),
            SetKind::Box { lower } => {
                space.support().indices().all(|i| x.get(i) >= lower[i])
            }
            SetKind::VarLevel { alpha, prior } => {
                var(space, x, *alpha, *prior).map(|v| v <= 0.0).unwrap_or(false)
            }
            SetKind::EsLevel { alpha, prior } => {
                es(space, x, *alpha, *prior).map(|v| v <= 0.0).unwrap_or(false)
            }
            SetKind::Span { event, prior } => span_accept(space, x, event, *prior).unwrap_or(false),
            SetKind::ShortfallLevel { loss, prior, level } => {
                shortfall(space, x, loss, *prior).map(|v| v <= *level).unwrap_or(false)
            }
            SetKind::LossBoxUnion { uppers } => {
                let neg = x.neg_part();
                uppers
                    .iter()
                    .any(|u| neg.payoffs().iter().zip(u).all(|(a, b)| a <= b))
            }
            SetKind::Halfspace { weights, bound } => x.dot(weights) >= *bound,
            SetKind::Intersection { members } => members.iter().all(|m| m.contains(space, x)),
            SetKind::Custom { oracle } => oracle(space, x),
        }
    }

    /// Membership of a nonnegative loss profile in `D = -A_-`.
    pub fn in_d(&self, space: &ScenarioSpace, w: &Position) -> Result<bool> {
        if let Some((i, &v)) = w.payoffs().iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(EngineError::NegativeEntry { index: i, value: v });
        }
        Ok(self.contains(space, &w.negate()))
    }

    /// True when the membership oracle is a built-in with an order-closed
    /// representation (everything except `Custom`).
    pub fn is_builtin_order_closed(&self) -> bool {
        match &self.kind {
            SetKind::Custom { .. } => false,
            SetKind::Intersection { members } => members.iter().all(|m| m.is_builtin_order_closed()),
            _ => true,
        }
    }

    /// Analytic certificate that the loss direction `-t e_i` stays inside the
    /// set for every `t > 0` (`Some(true)`), is known to leave it
    /// (`Some(false)`), or is undecided analytically (`None`).
    pub fn coordinate_free_certificate(&self, space: &ScenarioSpace, i: usize) -> Option<bool> {
        match &self.kind {
            SetKind::WholeSpace => Some(true),
            SetKind::PositiveOrthant => Some(!space.support().contains(i)),
            SetKind::Box { lower } => {
                Some(!space.support().contains(i) || lower[i] == f64::NEG_INFINITY)
            }
            SetKind::VarLevel { alpha, prior } => {
                let w = space.priors()[*prior].weights[i];
                Some(w <= *alpha)
            }
            SetKind::Span { event, prior } => {
                let w = space.priors()[*prior].weights[i];
                Some(!event.contains(i) || w == 0.0)
            }
            SetKind::ShortfallLevel { prior, .. } | SetKind::EsLevel { prior, .. } => {
                // Free only when the coordinate carries no mass under the prior.
                Some(space.priors()[*prior].weights[i] == 0.0)
            }
            SetKind::Halfspace { weights, .. } => Some(weights[i] == 0.0),
            SetKind::LossBoxUnion { .. } => Some(false),
            SetKind::Intersection { members } => {
                let mut all_true = true;
                for m in members {
                    match m.coordinate_free_certificate(space, i) {
                        Some(true) => {}
                        Some(false) => return Some(false),
                        None => all_true = false,
                    }
                }
                if all_true {
                    Some(true)
                } else {
                    None
                }
            }
            SetKind::Custom { .. } => None,
        }
    }
}

/// Options for the randomized set checkers.
#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub trials: u64,
    pub seed: u64,
    pub half_width: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { trials: 1000, seed: 0, half_width: 5.0 }
    }
}

fn custom_note(set: &AcceptanceSet, report: LawReport) -> LawReport {
    if set.is_builtin_order_closed() {
        report
    } else {
        report.with_note("order closedness of the custom oracle is assumed, not sampled")
    }
}

/// Randomized surplus-invariance check: partners `X` and `Y = -X^- + W`
/// (surplus `W >= 0` supported where `X >= 0`) share a loss profile, so their
/// verdicts must agree.
pub fn check_surplus_invariant(
    space: &ScenarioSpace,
    set: &AcceptanceSet,
    opts: CheckOptions,
) -> LawReport {
    let sampler = PositionSampler::new(space, opts.half_width);
    let violation = find_first_violation(opts.trials, |t| {
        let mut rng = trial_rng(opts.seed, t);
        let x = sampler.sample_for_set(&mut rng, set);
        let allowed: Vec<bool> = x.payoffs().iter().map(|&v| v >= 0.0).collect();
        let surplus = if rng.gen_bool(0.3) {
            space.constant(0.0)
        } else {
            sampler.surplus_on(&mut rng, &allowed)
        };
        let y = x.neg_part().negate().add(&surplus);
        let mx = set.contains(space, &x);
        let my = set.contains(space, &y);
        if mx != my {
            Some(
                Witness::new(format!(
                    "X^- = Y^- but membership differs (X: {mx}, Y: {my})"
                ))
                .at_trial(t)
                .with_x(x.payoffs().to_vec())
                .with_y(y.payoffs().to_vec()),
            )
        } else {
            None
        }
    });
    let report = match violation {
        Some(w) => LawReport::counterexample("surplus-invariance", opts.trials, opts.seed, w),
        None => LawReport::pass("surplus-invariance", opts.trials, opts.seed),
    };
    custom_note(set, report)
}

/// Randomized check of the loss-profile equivalences for a monotone set:
/// membership implies `-X^-` membership; lowering the loss profile preserves
/// membership; membership is reconstructed from `D = -A_-`; and `D` is solid.
pub fn check_equivalences(
    space: &ScenarioSpace,
    set: &AcceptanceSet,
    opts: CheckOptions,
) -> Result<LawReport> {
    if !set.claims().monotone {
        return Err(EngineError::MissingClaim("monotone"));
    }
    let sampler = PositionSampler::new(space, opts.half_width);
    let violation = find_first_violation(opts.trials, |t| {
        let mut rng = trial_rng(opts.seed, t);
        let x = sampler.sample_for_set(&mut rng, set);
        let neg = x.neg_part();
        let loss_only = neg.negate();
        let mx = set.contains(space, &x);
        let m_loss = set.contains(space, &loss_only);

        if mx && !m_loss {
            return Some(
                Witness::new("X accepted but -X^- rejected")
                    .at_trial(t)
                    .with_x(x.payoffs().to_vec())
                    .with_y(loss_only.payoffs().to_vec()),
            );
        }
        // Reconstruction from the solid part: X in A iff X^- in D.
        if mx != m_loss {
            return Some(
                Witness::new("membership is not a function of the loss profile")
                    .at_trial(t)
                    .with_x(x.payoffs().to_vec())
                    .with_y(loss_only.payoffs().to_vec()),
            );
        }
        if mx {
            // Dominated loss profile: Y^- <= X^- forces Y in A.
            let shrink: Vec<f64> = (0..space.len()).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let allowed: Vec<bool> = neg.payoffs().iter().map(|&v| v == 0.0).collect();
            let surplus = sampler.surplus_on(&mut rng, &allowed);
            let y = space
                .canonicalize(
                    neg.payoffs()
                        .iter()
                        .zip(&shrink)
                        .zip(surplus.payoffs())
                        .map(|((&n, &u), &s)| -(n * u) + s)
                        .collect(),
                );
            if !set.contains(space, &y) {
                return Some(
                    Witness::new("Y^- <= X^- and X accepted, but Y rejected")
                        .at_trial(t)
                        .with_x(x.payoffs().to_vec())
                        .with_y(y.payoffs().to_vec()),
                );
            }
        }
        // Solidity of D on nonnegative profiles.
        let w = sampler.nonnegative(&mut rng);
        if set.in_d(space, &w).unwrap_or(false) {
            let v = space.canonicalize(
                w.payoffs().iter().map(|&n| n * rng.gen_range(0.0..=1.0)).collect(),
            );
            if !set.in_d(space, &v).unwrap_or(false) {
                return Some(
                    Witness::new("D is not solid: W in D, 0 <= V <= W, V rejected")
                        .at_trial(t)
                        .with_x(w.payoffs().to_vec())
                        .with_y(v.payoffs().to_vec()),
                );
            }
        }
        None
    });
    let report = match violation {
        Some(w) => LawReport::counterexample("si-equivalences", opts.trials, opts.seed, w),
        None => LawReport::pass("si-equivalences", opts.trials, opts.seed),
    };
    Ok(custom_note(set, report))
}

const BAND_ENUM_LIMIT: usize = 12;

/// Band-projection stability: for accepted `X`, every restriction `1_E X`
/// stays accepted. Equivalent to surplus invariance for monotone sets at this
/// scale, where every band is an event restriction.
pub fn check_band_stability(
    space: &ScenarioSpace,
    set: &AcceptanceSet,
    opts: CheckOptions,
) -> Result<LawReport> {
    if !set.claims().monotone {
        return Err(EngineError::MissingClaim("monotone"));
    }
    let n = space.len();
    let sampler = PositionSampler::new(space, opts.half_width);
    let violation = find_first_violation(opts.trials, |t| {
        let mut rng = trial_rng(opts.seed, t);
        let x = sampler.sample_for_set(&mut rng, set);
        if !set.contains(space, &x) {
            return None;
        }
        let check_event = |e: &EventMask| -> Option<Witness> {
            let projected = x.band_project(e);
            if set.contains(space, &projected) {
                None
            } else {
                Some(
                    Witness::new(format!(
                        "X accepted but its restriction to {:?} is rejected",
                        space.labels_of_event(e)
                    ))
                    .at_trial(t)
                    .with_x(x.payoffs().to_vec())
                    .with_y(projected.payoffs().to_vec()),
                )
            }
        };
        if n <= BAND_ENUM_LIMIT {
            for e in EventMask::enumerate_all(n) {
                if let Some(w) = check_event(&e) {
                    return Some(w);
                }
            }
            None
        } else {
            for _ in 0..64 {
                let e = EventMask {
                    members: (0..n).map(|_| rng.gen_bool(0.5)).collect(),
                };
                if let Some(w) = check_event(&e) {
                    return Some(w);
                }
            }
            None
        }
    });
    let report = match violation {
        Some(w) => LawReport::counterexample("band-stability", opts.trials, opts.seed, w),
        None => LawReport::pass("band-stability", opts.trials, opts.seed),
    }
    .with_note("band stability is equivalent to surplus invariance for monotone sets");
    Ok(custom_note(set, report))
}

/// Paired convexity check: searches for midpoint violations in `A` and in its
/// solid part `D = -A_-` independently, maps each witness to the other side,
/// and requires the two verdicts to agree.
pub fn check_convexity_via_d(
    space: &ScenarioSpace,
    set: &AcceptanceSet,
    opts: CheckOptions,
) -> Result<LawReport> {
    if !set.claims().monotone {
        return Err(EngineError::MissingClaim("monotone"));
    }
    if !set.claims().surplus_invariant {
        return Err(EngineError::MissingClaim("surplus_invariant"));
    }
    let sampler = PositionSampler::new(space, opts.half_width);

    let a_violation = find_first_violation(opts.trials, |t| {
        let mut rng = trial_rng(opts.seed ^ 0xA11CE, t);
        let x = sampler.sample_for_set(&mut rng, set);
        let y = sampler.sample_for_set(&mut rng, set);
        if set.contains(space, &x) && set.contains(space, &y) {
            let mid = x.add(&y).scale(0.5);
            if !set.contains(space, &mid) {
                return Some((x, y));
            }
        }
        None
    });
    let d_violation = find_first_violation(opts.trials, |t| {
        let mut rng = trial_rng(opts.seed ^ 0xD0_17, t);
        let w = sampler.nonnegative(&mut rng);
        let v = sampler.nonnegative(&mut rng);
        if set.in_d(space, &w).unwrap_or(false) && set.in_d(space, &v).unwrap_or(false) {
            let mid = w.add(&v).scale(0.5);
            if !set.in_d(space, &mid).unwrap_or(false) {
                return Some((w, v));
            }
        }
        None
    });

    // A D-side violation is an A-side violation verbatim (negate the profiles).
    // An A-side violation transfers to D through solidity of the loss parts.
    let a_status = a_violation.is_some()
        || d_violation
            .as_ref()
            .map(|(w, v)| {
                let (x, y) = (w.negate(), v.negate());
                let mid = x.add(&y).scale(0.5);
                set.contains(space, &x) && set.contains(space, &y) && !set.contains(space, &mid)
            })
            .unwrap_or(false);
    let d_status = d_violation.is_some()
        || a_violation
            .as_ref()
            .map(|(x, y)| {
                let (w, v) = (x.neg_part(), y.neg_part());
                let mid = w.add(&v).scale(0.5);
                set.in_d(space, &w).unwrap_or(false)
                    && set.in_d(space, &v).unwrap_or(false)
                    && !set.in_d(space, &mid).unwrap_or(true)
            })
            .unwrap_or(false);

    let mut report = if a_status == d_status {
        let mut r = LawReport::pass("convexity-via-D", opts.trials, opts.seed);
        if a_status {
            r = r.with_note("both A and D are non-convex; verdicts agree");
            if let Some((x, y)) = &a_violation {
                r.witness = Some(
                    Witness::new("midpoint violation in A (matching violation holds in D)")
                        .with_x(x.payoffs().to_vec())
                        .with_y(y.payoffs().to_vec()),
                );
            } else if let Some((w, v)) = &d_violation {
                r.witness = Some(
                    Witness::new("midpoint violation in D (matching violation holds in A)")
                        .with_x(w.payoffs().to_vec())
                        .with_y(v.payoffs().to_vec()),
                );
            }
        } else {
            r = r.with_note("no convexity violation found in A or in D");
        }
        if set.claims().convex && a_status {
            r = r.with_note("set claims convexity but a midpoint violation was found");
        }
        r
    } else {
        let detail = format!(
            "convexity verdicts disagree: A non-convex = {a_status}, D non-convex = {d_status}"
        );
        LawReport::counterexample("convexity-via-D", opts.trials, opts.seed, Witness::new(detail))
    };
    report = custom_note(set, report);
    Ok(report)
}

use rand::Rng;
