//! Three-band decomposition of convex order-closed surplus-invariant
//! monotone sets, computed by per-coordinate loss probes.
//!
//! At this scale every band is an event restriction, so the decomposition is
//! a partition of the support into: `E1`, where no loss is acceptable; `E2`,
//! where losses are acceptable up to a radially bounded solid set `D`; and
//! `E3`, where losses are unconstrained. Unboundedness is not decidable from
//! finitely many membership queries, so `E3` classifications carry a
//! "probe-censored" flag unless a built-in supplies an analytic certificate.

use serde::Serialize;

use crate::acceptance::AcceptanceSet;
use crate::error::{EngineError, Result};
use crate::par::{find_first_violation, map_trials};
use crate::report::{LawReport, Witness};
use crate::sampler::{trial_rng, PositionSampler};
use crate::scenario::{EventMask, Position, ScenarioSpace};

pub const DEFAULT_PROBE_BOUND: f64 = 1e9;

/// The computed partition plus the membership oracle for the solid part `D`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub e1: EventMask,
    pub e2: EventMask,
    pub e3: EventMask,
    pub flags: Vec<String>,
    pub probe_bound: f64,
    /// Largest acceptable pure loss per scenario (`None` off the support or
    /// where the coordinate is free).
    pub coordinate_bounds: Vec<Option<f64>>,
    set: AcceptanceSet,
}

/// JSON form: scenario labels per band.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    #[serde(rename = "E1")]
    pub e1: Vec<String>,
    #[serde(rename = "E2")]
    pub e2: Vec<String>,
    #[serde(rename = "E3")]
    pub e3: Vec<String>,
    pub flags: Vec<String>,
    pub probe_bound: f64,
}

impl Decomposition {
    /// Membership in `D = -A_- restricted to E2`: nonnegative, supported on
    /// `E2`, and acceptable when negated.
    pub fn d_contains(&self, space: &ScenarioSpace, w: &Position) -> Result<bool> {
        if let Some((i, &v)) = w.payoffs().iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(EngineError::NegativeEntry { index: i, value: v });
        }
        if w.payoffs().iter().enumerate().any(|(i, &v)| v > 0.0 && !self.e2.contains(i)) {
            return Ok(false);
        }
        Ok(self.set.contains(space, &w.negate()))
    }

    pub fn report(&self, space: &ScenarioSpace) -> DecompositionReport {
        DecompositionReport {
            e1: space.labels_of_event(&self.e1),
            e2: space.labels_of_event(&self.e2),
            e3: space.labels_of_event(&self.e3),
            flags: self.flags.clone(),
            probe_bound: self.probe_bound,
        }
    }
}

/// Largest `t` with `-t e_i` acceptable, probed by doubling and bisection up
/// to `t_max`. Returns `None` when the probe escapes `t_max` (coordinate
/// looks free).
fn loss_capacity(
    space: &ScenarioSpace,
    set: &AcceptanceSet,
    i: usize,
    t_max: f64,
) -> Option<f64> {
    let member = |t: f64| set.contains(space, &space.scaled_basis(i, -t));
    if !member(1e-11) {
        return Some(0.0);
    }
    let mut lo = 1e-11;
    let mut hi = 1.0;
    while member(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > t_max {
            return None;
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-9 * lo.max(1.0) {
            return Some(lo);
        }
        if member(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Decomposes a convex order-closed surplus-invariant monotone built-in set
/// by scanning pure-loss capacities per scenario.
pub fn decompose(space: &ScenarioSpace, set: &AcceptanceSet, t_max: f64) -> Result<Decomposition> {
    let claims = set.claims();
    if !claims.convex {
        return Err(EngineError::MissingClaim("convex"));
    }
    if !claims.monotone {
        return Err(EngineError::MissingClaim("monotone"));
    }
    if !claims.surplus_invariant {
        return Err(EngineError::MissingClaim("surplus_invariant"));
    }
    if !set.is_builtin_order_closed() {
        return Err(EngineError::MissingClaim("order-closed builtin"));
    }
    if t_max.is_nan() || t_max <= 1.0 {
        return Err(EngineError::InvalidParameter {
            name: "t_max",
            reason: format!("probe bound must exceed 1, got {t_max}"),
        });
    }

    let n = space.len();
    let mut e1 = vec![false; n];
    let mut e2 = vec![false; n];
    let mut e3 = vec![false; n];
    let mut flags = Vec::new();
    let mut bounds: Vec<Option<f64>> = vec![None; n];

    // Per scenario: loss capacity (None = escaped the probe) and certificate.
    type CoordScan = (usize, Option<Option<f64>>, Option<bool>);
    let scans: Vec<Option<CoordScan>> = map_trials(n as u64, |idx| {
        let i = idx as usize;
        if !space.support().contains(i) {
            return None;
        }
        let certificate = set.coordinate_free_certificate(space, i);
        if certificate == Some(true) {
            return Some((i, None, certificate));
        }
        Some((i, Some(loss_capacity(space, set, i, t_max)), certificate))
    });

    for scan in scans.into_iter().flatten() {
        let (i, capacity, certificate) = scan;
        match capacity {
            None => {
                // Certificate says free: clean E3 membership.
                e3[i] = true;
            }
            Some(None) => {
                e3[i] = true;
                flags.push(format!(
                    "{}: unbounded within probe (no analytic certificate)",
                    space.labels()[i]
                ));
            }
            Some(Some(s)) => {
                if s == 0.0 {
                    e1[i] = true;
                } else if s >= t_max {
                    e3[i] = true;
                } else {
                    if s > t_max / 2.0 {
                        flags.push(format!(
                            "{}: probe-censored (loss capacity {s} in (t_max/2, t_max))",
                            space.labels()[i]
                        ));
                    }
                    e2[i] = true;
                    bounds[i] = Some(s);
                }
                // A certificate asserting freedom would contradict a finite scan.
                if certificate == Some(true) {
                    return Err(EngineError::Internal(format!(
                        "certificate/probe disagreement at scenario {i}"
                    )));
                }
            }
        }
    }

    Ok(Decomposition {
        e1: EventMask { members: e1 },
        e2: EventMask { members: e2 },
        e3: EventMask { members: e3 },
        flags,
        probe_bound: t_max,
        coordinate_bounds: bounds,
        set: set.clone(),
    })
}

/// Options for the decomposition verifiers.
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub trials: u64,
    pub seed: u64,
    pub half_width: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { trials: 2000, seed: 0, half_width: 5.0 }
    }
}

/// Membership must factor through the bands: nonnegative on `E1`, loss
/// profile on `E2` inside `D`, unconstrained on `E3`.
pub fn verify_reconstruction(
    space: &ScenarioSpace,
    set: &AcceptanceSet,
    dec: &Decomposition,
    opts: VerifyOptions,
) -> LawReport {
    let sampler = PositionSampler::new(space, opts.half_width);
    let violation = find_first_violation(opts.trials, |t| {
        let mut rng = trial_rng(opts.seed, t);
        let x = sampler.sample_for_set(&mut rng, set);
        let direct = set.contains(space, &x);
        let on_e1_ok = dec.e1.indices().all(|i| x.get(i) >= 0.0);
        let loss2 = x.band_project(&dec.e2).neg_part();
        let in_d = dec.d_contains(space, &loss2).unwrap_or(false);
        let reconstructed = on_e1_ok && in_d;
        if direct != reconstructed {
            Some(
                Witness::new(format!(
                    "membership {direct} but band reconstruction gives {reconstructed} \
                     (E1 ok: {on_e1_ok}, loss in D: {in_d})"
                ))
                .at_trial(t)
                .with_x(x.payoffs().to_vec()),
            )
        } else {
            None
        }
    });
    match violation {
        Some(w) => LawReport::counterexample("decomposition-reconstruction", opts.trials, opts.seed, w),
        None => LawReport::pass("decomposition-reconstruction", opts.trials, opts.seed),
    }
}

/// Every nonzero member of `D` must leave `D` under large enough scaling
/// (within the probe bound).
pub fn check_radially_bounded_d(
    space: &ScenarioSpace,
    dec: &Decomposition,
    opts: VerifyOptions,
) -> LawReport {
    if dec.e2.is_empty() {
        return LawReport::pass("d-radially-bounded", 0, opts.seed)
            .with_note("E2 is empty; D = {0} is vacuously radially bounded");
    }
    let sampler = PositionSampler::new(space, opts.half_width);
    let violation = find_first_violation(opts.trials, |t| {
        let mut rng = trial_rng(opts.seed ^ 0x5AD, t);
        let w = sampler.nonnegative(&mut rng).band_project(&dec.e2);
        if w.is_zero() || !dec.d_contains(space, &w).unwrap_or(false) {
            return None;
        }
        let mut lambda = 1.0;
        while lambda * w.sup_norm() <= dec.probe_bound {
            if !dec.d_contains(space, &w.scale(lambda)).unwrap_or(false) {
                return None; // exit scaling found
            }
            lambda *= 2.0;
        }
        Some(
            Witness::new(format!(
                "scaled copies of W stayed in D up to the probe bound {}",
                dec.probe_bound
            ))
            .at_trial(t)
            .with_x(w.payoffs().to_vec()),
        )
    });
    match violation {
        Some(w) => LawReport::counterexample("d-radially-bounded", opts.trials, opts.seed, w),
        None => LawReport::pass("d-radially-bounded", opts.trials, opts.seed),
    }
}

/// `D` must touch every scenario of `E2`: some member charges it. In the
/// robust reading, every sub-event of `E2` with positive capacity must meet a
/// member of `D`.
pub fn check_support_condition(
    space: &ScenarioSpace,
    dec: &Decomposition,
    opts: VerifyOptions,
) -> LawReport {
    let mut report = LawReport::pass("d-support-condition", opts.trials, opts.seed);
    if dec.e2.is_empty() {
        return report.with_note("E2 is empty; the support condition is vacuous");
    }
    for i in dec.e2.indices() {
        let s = dec.coordinate_bounds[i].unwrap_or(0.0);
        let w = space.scaled_basis(i, 0.5 * s);
        let ok = dec.d_contains(space, &w).unwrap_or(false);
        if !ok {
            return LawReport::counterexample(
                "d-support-condition",
                opts.trials,
                opts.seed,
                Witness::new(format!(
                    "no member of D charges scenario {}",
                    space.labels()[i]
                ))
                .with_x(w.payoffs().to_vec()),
            );
        }
    }
    // Robust form: sampled sub-events of E2 with positive capacity.
    let e2_indices: Vec<usize> = dec.e2.indices().collect();
    if e2_indices.len() <= 12 {
        for e in EventMask::enumerate_all(e2_indices.len()) {
            if e.is_empty() {
                continue;
            }
            let full = EventMask::from_indices(
                space.len(),
                &e.indices().map(|j| e2_indices[j]).collect::<Vec<_>>(),
            );
            if crate::robust::capacity(space, &full) > 0.0 {
                let hit = full.indices().any(|i| {
                    let s = dec.coordinate_bounds[i].unwrap_or(0.0);
                    dec.d_contains(space, &space.scaled_basis(i, 0.5 * s)).unwrap_or(false)
                });
                if !hit {
                    return LawReport::counterexample(
                        "d-support-condition",
                        opts.trials,
                        opts.seed,
                        Witness::new(format!(
                            "event {:?} has positive capacity but meets no member of D",
                            space.labels_of_event(&full)
                        )),
                    );
                }
            }
        }
        report = report.with_note("all nonempty sub-events of E2 are charged by D");
    }
    report
}

/// Probed recession/lineality directions must match the band formula:
/// recession = nonnegative on `E1 + E2`, free on `E3`; lineality = supported
/// on `E3`.
pub fn recession_lineality(
    space: &ScenarioSpace,
    set: &AcceptanceSet,
    dec: &Decomposition,
    opts: VerifyOptions,
) -> LawReport {
    let sampler = PositionSampler::new(space, opts.half_width);
    let base = space.constant(0.0);
    debug_assert!(set.contains(space, &base));
    let probe_grid: Vec<f64> = {
        let mut ts = Vec::new();
        let mut t = 1.0;
        while t <= dec.probe_bound {
            ts.push(t);
            t *= 10.0;
        }
        ts
    };
    let recedes_probed = |v: &Position| probe_grid.iter().all(|&t| set.contains(space, &base.add_scaled(t, v)));
    let constrained = dec.e1.union(&dec.e2);
    let violation = find_first_violation(opts.trials, |t| {
        let mut rng = trial_rng(opts.seed ^ 0x5EC, t);
        // Deterministic coordinate probes first, then random directions.
        let v = if (t as usize) < 2 * space.len() {
            let i = (t as usize) / 2;
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            space.scaled_basis(i, sign)
        } else {
            sampler.sample(&mut rng)
        };
        let predicted = constrained.indices().all(|i| v.get(i) >= 0.0);
        let probed = recedes_probed(&v);
        if predicted != probed {
            return Some(
                Witness::new(format!(
                    "recession: formula predicts {predicted}, probe says {probed}"
                ))
                .at_trial(t)
                .with_x(v.payoffs().to_vec()),
            );
        }
        let lin_predicted = constrained.indices().all(|i| v.get(i) == 0.0);
        let lin_probed = probed && recedes_probed(&v.negate());
        if lin_predicted != lin_probed {
            return Some(
                Witness::new(format!(
                    "lineality: formula predicts {lin_predicted}, probe says {lin_probed}"
                ))
                .at_trial(t)
                .with_x(v.payoffs().to_vec()),
            );
        }
        None
    });
    match violation {
        Some(w) => LawReport::counterexample("recession-lineality", opts.trials, opts.seed, w),
        None => LawReport::pass("recession-lineality", opts.trials, opts.seed),
    }
}
