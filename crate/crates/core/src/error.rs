use thiserror::Error;

/// Errors surfaced by the engine.
///
/// Numerical routines never panic on bad user input; every rejection listed
/// in an operation contract maps to one of these variants.
#[derive(Debug, Clone, Error)]
pub enum EngineError {
    #[error("length mismatch: expected {expected} scenarios, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid prior `{name}`: {reason}")]
    InvalidPrior { name: String, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite payoff at index {index}")]
    NonFinitePayoff { index: usize },

    #[error("expected a nonnegative position, found {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("reference payoff S must be strictly positive on the support (zero at index {index})")]
    DegenerateNumeraire { index: usize },

    #[error("operation requires the `{0}` claim on its input")]
    MissingClaim(&'static str),

    #[error("no prior named `{0}`")]
    UnknownPrior(String),

    #[error("prior index {0} out of range")]
    PriorIndex(usize),

    #[error("value diverged below -{cap:e}; minus-infinity is not a legal risk value")]
    MinusInfinitySuspect { cap: f64 },

    #[error("set is not radially bounded: scaling survived up to t = {reached:e}")]
    NotRadiallyBounded { reached: f64 },

    #[error("dual feasible set is empty: {0}")]
    InfeasibleDualDomain(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, EngineError>;
