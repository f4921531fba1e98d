//! Multi-prior structure: the capacity `c(E) = sup_P P(E)`, robust norms, and
//! the tractable dual measures `mu_{P,Z}(E) = E_P[1_E Z]` whose span is the
//! working dual domain in the robust setting.

use serde::Serialize;

use crate::error::{EngineError, Result};
use crate::scenario::{EventMask, Position, ScenarioSpace};

/// Worst-case probability of an event over the prior family.
pub fn capacity(space: &ScenarioSpace, event: &EventMask) -> f64 {
    space.priors().iter().map(|p| p.mass(event)).fold(0.0, f64::max)
}

/// True when the event carries no mass under any prior.
pub fn is_c_null(space: &ScenarioSpace, event: &EventMask) -> bool {
    capacity(space, event) == 0.0
}

/// Robust `L^p` norm: `sup_P ||X||_{L^p(P)}`; for `p = inf` the quasi-sure
/// essential sup, i.e. the largest `|X|` entry on the union of supports.
pub fn robust_norm(space: &ScenarioSpace, x: &Position, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(EngineError::InvalidParameter {
            name: "p",
            reason: format!("exponent must satisfy p >= 1 (got {p})"),
        });
    }
    if p.is_infinite() {
        // Positions are canonical, so off-support entries are already zero.
        return Ok(x.sup_norm());
    }
    let norm_under = |weights: &[f64]| -> f64 {
        let moment: f64 =
            weights.iter().zip(x.payoffs()).map(|(w, v)| w * v.abs().powf(p)).sum();
        moment.powf(1.0 / p)
    };
    Ok(space.priors().iter().map(|pr| norm_under(&pr.weights)).fold(0.0, f64::max))
}

/// One generator `a * mu_{P,Z}` of the dual span: a prior, a bounded density
/// vector, and a scalar coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct DualTerm {
    pub prior: usize,
    pub density: Vec<f64>,
    pub coeff: f64,
}

/// A signed measure stored in span form, `mu = sum_k a_k mu_{P_k, Z_k}`.
///
/// The span form mirrors how these measures arise; [`DualMeasure::canonical_density`]
/// reduces a measure to a single signed mass vector over the union of supports
/// (one choice among the representations that agree on all positions).
#[derive(Debug, Clone, PartialEq)]
pub struct DualMeasure {
    terms: Vec<DualTerm>,
}

impl DualMeasure {
    pub fn new(space: &ScenarioSpace, terms: Vec<DualTerm>) -> Result<Self> {
        for t in &terms {
            space.prior(t.prior)?;
            if t.density.len() != space.len() {
                return Err(EngineError::LengthMismatch {
                    expected: space.len(),
                    got: t.density.len(),
                });
            }
            if let Some(i) = t.density.iter().position(|z| !z.is_finite()) {
                return Err(EngineError::NonFinitePayoff { index: i });
            }
            if !t.coeff.is_finite() {
                return Err(EngineError::InvalidParameter {
                    name: "coeff",
                    reason: "coefficient must be finite".into(),
                });
            }
        }
        Ok(DualMeasure { terms })
    }

    /// `mu_{P,Z}` itself.
    pub fn generator(space: &ScenarioSpace, prior: usize, density: Vec<f64>) -> Result<Self> {
        DualMeasure::new(space, vec![DualTerm { prior, density, coeff: 1.0 }])
    }

    pub fn terms(&self) -> &[DualTerm] {
        &self.terms
    }

    /// Mass the measure puts on an event: `sum_k a_k E_{P_k}[1_E Z_k]`.
    pub fn mass(&self, space: &ScenarioSpace, event: &EventMask) -> f64 {
        self.canonical_density(space)
            .iter()
            .zip(event.members.iter())
            .filter(|(_, &m)| m)
            .map(|(d, _)| d)
            .sum()
    }

    /// Per-scenario signed masses `mu({i}) = sum_k a_k P_k({i}) Z_k(i)`.
    ///
    /// This vanishes off the union of supports, so the measure is
    /// automatically zero on every c-null event.
    pub fn canonical_density(&self, space: &ScenarioSpace) -> Vec<f64> {
        let mut density = vec![0.0; space.len()];
        for t in &self.terms {
            let weights = &space.priors()[t.prior].weights;
            for i in 0..space.len() {
                density[i] += t.coeff * weights[i] * t.density[i];
            }
        }
        density
    }

    /// True when every generator is nonnegative (`a_k >= 0`, `Z_k >= 0`), so
    /// the measure is positive by construction.
    pub fn is_positive_form(&self) -> bool {
        self.terms.iter().all(|t| t.coeff >= 0.0 && t.density.iter().all(|&z| z >= 0.0))
    }
}

/// The pairing `<X, mu> = E_mu[X]`, well defined on quasi-sure classes.
pub fn pair(space: &ScenarioSpace, x: &Position, mu: &DualMeasure) -> f64 {
    x.dot(&mu.canonical_density(space))
}

/// The standing identification of bounded payoffs with the norm dual of the
/// measure space is automatic over a finite outcome set: both sides are the
/// span of the support coordinates. Nothing to compute; recorded so callers
/// can surface the assumption in reports.
pub const DUAL_PAIRING_ASSUMPTION: &str =
    "bounded-payoff/measure duality holds automatically on a finite scenario space";

/// Summary of a robust space emitted by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct RobustSummary {
    pub scenario_count: usize,
    pub prior_count: usize,
    pub support: Vec<String>,
    pub assumption: &'static str,
}

pub fn summarize(space: &ScenarioSpace) -> RobustSummary {
    RobustSummary {
        scenario_count: space.len(),
        prior_count: space.priors().len(),
        support: space.labels_of_event(space.support()),
        assumption: DUAL_PAIRING_ASSUMPTION,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_prior_space() -> ScenarioSpace {
        ScenarioSpace::new(
            vec!["w1", "w2"],
            vec![("P1", vec![1.0, 0.0]), ("P2", vec![0.5, 0.5])],
        )
        .unwrap()
    }

    #[test]
    fn capacity_examples() {
        let s = two_prior_space();
        let e2 = EventMask::from_indices(2, &[1]);
        assert_eq!(capacity(&s, &e2), 0.5);
        assert_eq!(capacity(&s, &EventMask::empty(2)), 0.0);
        assert_eq!(capacity(&s, &EventMask::full(2)), 1.0);
    }

    #[test]
    fn c_null_examples() {
        let s = ScenarioSpace::new(vec!["w1", "w2"], vec![("P", vec![1.0, 0.0])]).unwrap();
        assert!(is_c_null(&s, &EventMask::from_indices(2, &[1])));
        assert!(is_c_null(&s, &EventMask::empty(2)));
        let full = ScenarioSpace::uniform(2);
        assert!(!is_c_null(&full, &EventMask::from_indices(2, &[0])));
    }

    #[test]
    fn robust_norm_examples() {
        let s = ScenarioSpace::new(
            vec!["w1", "w2"],
            vec![("P1", vec![1.0, 0.0]), ("P2", vec![0.0, 1.0])],
        )
        .unwrap();
        let x = s.position(vec![2.0, 4.0]).unwrap();
        assert_eq!(robust_norm(&s, &x, 1.0).unwrap(), 4.0);
        assert_eq!(robust_norm(&s, &s.constant(0.0), 1.0).unwrap(), 0.0);

        let u = ScenarioSpace::uniform(2);
        let x = u.position(vec![2.0, 4.0]).unwrap();
        let got = robust_norm(&u, &x, 2.0).unwrap();
        assert!((got - 10f64.sqrt()).abs() < 1e-12);
        assert_eq!(robust_norm(&u, &x, f64::INFINITY).unwrap(), 4.0);
        assert!(robust_norm(&u, &x, 0.5).is_err());
    }

    #[test]
    fn pairing_examples() {
        let u = ScenarioSpace::uniform(2);
        let x = u.position(vec![2.0, 4.0]).unwrap();
        let mu = DualMeasure::generator(&u, 0, vec![1.0, 1.0]).unwrap();
        assert_eq!(pair(&u, &x, &mu), 3.0);

        let zero = DualMeasure::new(
            &u,
            vec![DualTerm { prior: 0, density: vec![5.0, -1.0], coeff: 0.0 }],
        )
        .unwrap();
        assert_eq!(pair(&u, &x, &zero), 0.0);

        let half = DualMeasure::generator(&u, 0, vec![1.0, 0.0]).unwrap();
        assert_eq!(pair(&u, &x, &half), 1.0);
    }

    #[test]
    fn canonical_density_vanishes_on_c_null_events() {
        let s = ScenarioSpace::new(
            vec!["a", "b", "c"],
            vec![("P1", vec![0.5, 0.5, 0.0]), ("P2", vec![0.0, 1.0, 0.0])],
        )
        .unwrap();
        let mu = DualMeasure::new(
            &s,
            vec![
                DualTerm { prior: 0, density: vec![3.0, 1.0, 9.0], coeff: 2.0 },
                DualTerm { prior: 1, density: vec![4.0, -1.0, 9.0], coeff: 1.0 },
            ],
        )
        .unwrap();
        let d = mu.canonical_density(&s);
        assert_eq!(d[2], 0.0);
        assert_eq!(mu.mass(&s, &EventMask::from_indices(3, &[2])), 0.0);
        // Mass of {b}: 2*0.5*1 + 1*1*(-1) = 0.
        assert_eq!(mu.mass(&s, &EventMask::from_indices(3, &[1])), 0.0);
        assert_eq!(mu.mass(&s, &EventMask::from_indices(3, &[0])), 3.0);
    }

    #[test]
    fn capacity_is_monotone_under_inclusion() {
        let s = ScenarioSpace::new(
            vec!["a", "b", "c"],
            vec![("P1", vec![0.6, 0.4, 0.0]), ("P2", vec![0.1, 0.2, 0.7])],
        )
        .unwrap();
        let masks: Vec<EventMask> = EventMask::enumerate_all(3).collect();
        for e in &masks {
            for f in &masks {
                if e.is_subset_of(f) {
                    assert!(capacity(&s, e) <= capacity(&s, f) + 1e-15);
                }
            }
        }
    }

    #[test]
    fn positive_pairing_is_monotone() {
        let s = two_prior_space();
        let mu = DualMeasure::new(
            &s,
            vec![
                DualTerm { prior: 0, density: vec![0.5, 2.0], coeff: 1.0 },
                DualTerm { prior: 1, density: vec![1.0, 0.0], coeff: 0.25 },
            ],
        )
        .unwrap();
        assert!(mu.is_positive_form());
        let x = s.position(vec![-1.0, 3.0]).unwrap();
        let y = s.position(vec![0.0, 4.0]).unwrap();
        assert!(pair(&s, &x, &mu) <= pair(&s, &y, &mu));
    }
}
