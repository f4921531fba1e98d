//! Finite scenario spaces, payoff vectors, and the lattice operations every
//! other module consumes.
//!
//! Scenarios are identified by index; labels are metadata only. A space
//! carries one or more probability priors, and the union of their supports
//! induces the quasi-sure equivalence: payoff entries off that union are
//! normalized to zero on ingestion, so vector equality decides quasi-sure
//! equality and all lattice laws hold exactly on stored doubles.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};

const PRIOR_MASS_TOL: f64 = 1e-12;

/// One probability prior over the scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub name: String,
    pub weights: Vec<f64>,
}

impl Prior {
    /// Probability of an event under this prior.
    pub fn mass(&self, event: &EventMask) -> f64 {
        self.weights
            .iter()
            .zip(event.members.iter())
            .filter(|(_, &m)| m)
            .map(|(w, _)| w)
            .sum()
    }

    /// Expectation of a payoff vector under this prior.
    pub fn expect(&self, payoffs: &[f64]) -> f64 {
        self.weights.iter().zip(payoffs).map(|(w, x)| w * x).sum()
    }
}

/// Wire form of a scenario space: `{"scenarios": [...], "priors": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub scenarios: Vec<String>,
    pub priors: Vec<Prior>,
}

/// A finite outcome set with one or more probability priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceSpec", into = "SpaceSpec")]
pub struct ScenarioSpace {
    labels: Vec<String>,
    priors: Vec<Prior>,
    support: EventMask,
}

impl ScenarioSpace {
    /// Builds a space and validates every prior: correct length, entries
    /// `>= 0`, total mass `1` within `1e-12`.
    pub fn new<S: Into<String>>(labels: Vec<S>, priors: Vec<(S, Vec<f64>)>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if priors.is_empty() {
            return Err(EngineError::InvalidParameter {
                name: "priors",
                reason: "at least one prior is required".into(),
            });
        }
        let mut built = Vec::with_capacity(priors.len());
        for (name, weights) in priors {
            let name = name.into();
            if weights.len() != labels.len() {
                return Err(EngineError::LengthMismatch {
                    expected: labels.len(),
                    got: weights.len(),
                });
            }
            if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
                return Err(EngineError::InvalidPrior {
                    name,
                    reason: format!("weight {w} is negative or non-finite"),
                });
            }
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > PRIOR_MASS_TOL {
                return Err(EngineError::InvalidPrior {
                    name,
                    reason: format!("weights sum to {total}, not 1"),
                });
            }
            built.push(Prior { name, weights });
        }
        let support = EventMask {
            members: (0..labels.len())
                .map(|i| built.iter().any(|p| p.weights[i] > 0.0))
                .collect(),
        };
        Ok(ScenarioSpace { labels, priors: built, support })
    }

    /// `n` scenarios `w1..wn` under a single uniform prior.
    pub fn uniform(n: usize) -> Self {
        let labels: Vec<String> = (1..=n).map(|i| format!("w{i}")).collect();
        let weights = vec![1.0 / n as f64; n];
        ScenarioSpace::new(labels, vec![("P".to_string(), weights)])
            .expect("uniform prior is always valid")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn priors(&self) -> &[Prior] {
        &self.priors
    }

    pub fn prior(&self, index: usize) -> Result<&Prior> {
        self.priors.get(index).ok_or(EngineError::PriorIndex(index))
    }

    pub fn prior_index(&self, name: &str) -> Result<usize> {
        self.priors
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| EngineError::UnknownPrior(name.to_string()))
    }

    /// Union of the supports of all priors; the quasi-sure reference event.
    pub fn support(&self) -> &EventMask {
        &self.support
    }

    /// Ingests a payoff vector: checks length and finiteness, then zeroes
    /// entries off the union of supports (canonical quasi-sure representative).
    pub fn position(&self, payoffs: Vec<f64>) -> Result<Position> {
        if payoffs.len() != self.len() {
            return Err(EngineError::LengthMismatch { expected: self.len(), got: payoffs.len() });
        }
        if let Some(i) = payoffs.iter().position(|x| !x.is_finite()) {
            return Err(EngineError::NonFinitePayoff { index: i });
        }
        Ok(self.canonicalize(payoffs))
    }

    /// Zeroes off-support entries without re-validating.
    pub fn canonicalize(&self, mut payoffs: Vec<f64>) -> Position {
        for (x, &m) in payoffs.iter_mut().zip(self.support.members.iter()) {
            if !m {
                *x = 0.0;
            }
        }
        Position { payoffs }
    }

    /// Constant payoff `c` (zero off support).
    pub fn constant(&self, c: f64) -> Position {
        self.canonicalize(vec![c; self.len()])
    }

    /// The unit payoff `1` (zero off support).
    pub fn unit(&self) -> Position {
        self.constant(1.0)
    }

    /// Payoff `t` in scenario `i`, zero elsewhere.
    pub fn scaled_basis(&self, i: usize, t: f64) -> Position {
        let mut v = vec![0.0; self.len()];
        v[i] = t;
        self.canonicalize(v)
    }

    /// Event holding the listed scenario labels.
    pub fn event_of_labels(&self, labels: &[String]) -> Result<EventMask> {
        let mut members = vec![false; self.len()];
        for l in labels {
            let i = self
                .labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| EngineError::InvalidParameter {
                    name: "event",
                    reason: format!("unknown scenario `{l}`"),
                })?;
            members[i] = true;
        }
        Ok(EventMask { members })
    }

    /// Scenario labels selected by a mask.
    pub fn labels_of_event(&self, event: &EventMask) -> Vec<String> {
        self.labels
            .iter()
            .zip(event.members.iter())
            .filter(|(_, &m)| m)
            .map(|(l, _)| l.clone())
            .collect()
    }
}

impl TryFrom<SpaceSpec> for ScenarioSpace {
    type Error = EngineError;

    fn try_from(spec: SpaceSpec) -> Result<Self> {
        ScenarioSpace::new(
            spec.scenarios,
            spec.priors.into_iter().map(|p| (p.name, p.weights)).collect(),
        )
    }
}

impl From<ScenarioSpace> for SpaceSpec {
    fn from(space: ScenarioSpace) -> Self {
        SpaceSpec { scenarios: space.labels, priors: space.priors }
    }
}

/// A payoff vector over a scenario space (currency units at the horizon).
///
/// Values are immutable after construction; every operation returns a new
/// position. Equality is exact equality of the canonical representatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Position {
    payoffs: Vec<f64>,
}

impl Position {
    pub fn payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    pub fn len(&self) -> usize {
        self.payoffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payoffs.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.payoffs[i]
    }

    /// `X^+ = X v 0`, componentwise.
    pub fn pos_part(&self) -> Position {
        Position { payoffs: self.payoffs.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect() }
    }

    /// `X^- = -(X ^ 0)`, the loss profile, componentwise.
    pub fn neg_part(&self) -> Position {
        Position { payoffs: self.payoffs.iter().map(|&x| if x < 0.0 { -x } else { 0.0 }).collect() }
    }

    /// `|X| = X^+ + X^-`.
    pub fn abs(&self) -> Position {
        Position { payoffs: self.payoffs.iter().map(|&x| x.abs()).collect() }
    }

    /// Restriction `1_E X`: equals `X` on the event, zero off it.
    pub fn band_project(&self, event: &EventMask) -> Position {
        debug_assert_eq!(self.len(), event.members.len());
        Position {
            payoffs: self
                .payoffs
                .iter()
                .zip(event.members.iter())
                .map(|(&x, &m)| if m { x } else { 0.0 })
                .collect(),
        }
    }

    pub fn add(&self, other: &Position) -> Position {
        debug_assert_eq!(self.len(), other.len());
        Position {
            payoffs: self.payoffs.iter().zip(&other.payoffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Position) -> Position {
        debug_assert_eq!(self.len(), other.len());
        Position {
            payoffs: self.payoffs.iter().zip(&other.payoffs).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, t: f64) -> Position {
        Position { payoffs: self.payoffs.iter().map(|x| t * x).collect() }
    }

    /// `X + t * Y` in one pass.
    pub fn add_scaled(&self, t: f64, other: &Position) -> Position {
        debug_assert_eq!(self.len(), other.len());
        Position {
            payoffs: self.payoffs.iter().zip(&other.payoffs).map(|(a, b)| a + t * b).collect(),
        }
    }

    pub fn negate(&self) -> Position {
        self.scale(-1.0)
    }

    /// Componentwise minimum.
    pub fn min(&self, other: &Position) -> Position {
        debug_assert_eq!(self.len(), other.len());
        Position {
            payoffs: self
                .payoffs
                .iter()
                .zip(&other.payoffs)
                .map(|(&a, &b)| if a < b { a } else { b })
                .collect(),
        }
    }

    /// Componentwise maximum.
    pub fn max(&self, other: &Position) -> Position {
        debug_assert_eq!(self.len(), other.len());
        Position {
            payoffs: self
                .payoffs
                .iter()
                .zip(&other.payoffs)
                .map(|(&a, &b)| if a > b { a } else { b })
                .collect(),
        }
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.payoffs.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    /// Largest absolute entry.
    pub fn sup_norm(&self) -> f64 {
        self.payoffs.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.payoffs.iter().all(|&x| x == 0.0)
    }

    /// True when every entry is `>= 0`.
    pub fn is_nonnegative(&self) -> bool {
        self.payoffs.iter().all(|&x| x >= 0.0)
    }
}

/// Quasi-sure order: `x <= y` on every scenario of the support event.
pub fn order_leq(x: &Position, y: &Position, support: &EventMask) -> bool {
    debug_assert_eq!(x.len(), y.len());
    x.payoffs
        .iter()
        .zip(&y.payoffs)
        .zip(&support.members)
        .all(|((a, b), &m)| !m || a <= b)
}

/// An event, i.e. a set of scenarios. Bands of the payoff lattice are exactly
/// the sets of positions supported on a fixed event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventMask {
    pub members: Vec<bool>,
}

impl EventMask {
    pub fn full(n: usize) -> Self {
        EventMask { members: vec![true; n] }
    }

    pub fn empty(n: usize) -> Self {
        EventMask { members: vec![false; n] }
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Self {
        let mut members = vec![false; n];
        for &i in indices {
            members[i] = true;
        }
        EventMask { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.iter().all(|&m| !m)
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members[i]
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn complement(&self) -> EventMask {
        EventMask { members: self.members.iter().map(|m| !m).collect() }
    }

    pub fn intersect(&self, other: &EventMask) -> EventMask {
        EventMask {
            members: self.members.iter().zip(&other.members).map(|(a, b)| *a && *b).collect(),
        }
    }

    pub fn union(&self, other: &EventMask) -> EventMask {
        EventMask {
            members: self.members.iter().zip(&other.members).map(|(a, b)| *a || *b).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &EventMask) -> bool {
        self.members.iter().zip(&other.members).all(|(a, b)| !*a || *b)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    /// All `2^n` events of an `n`-scenario space. Callers cap `n`.
    pub fn enumerate_all(n: usize) -> impl Iterator<Item = EventMask> {
        assert!(n < usize::BITS as usize);
        (0usize..(1 << n)).map(move |bits| EventMask {
            members: (0..n).map(|i| bits & (1 << i) != 0).collect(),
        })
    }
}
