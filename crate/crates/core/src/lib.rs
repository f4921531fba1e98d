//! Scenario-based engine for surplus-invariant acceptance sets and risk
//! functionals on finite probability spaces, robust multi-prior spaces, and a
//! lazy sequence space.
//!
//! The crate evaluates the classical desk-level risk measures (value at risk,
//! expected shortfall, SPAN-style tests, shortfall budgets), represents
//! acceptance sets as membership oracles, and verifies the structural laws
//! connecting them: surplus invariance and its loss-profile equivalences,
//! S-additivity, the three-band decomposition of convex order-closed
//! surplus-invariant sets, conjugate duality and biconjugate recovery,
//! polar/bipolar round trips for solid sets, Orlicz/Luxemburg norms, and
//! monotone-truncation extensions on a sequence space where boundedness is a
//! genuine restriction.
//!
//! Everything randomized is seed-replayable, and checkers fan trials out in
//! parallel (feature `parallel`, on by default) with merges that are
//! deterministic by trial index.

pub mod acceptance;
pub mod decomposition;
pub mod duality;
pub mod error;
pub mod orlicz;
pub mod par;
pub mod report;
pub mod risk;
pub mod robust;
pub mod sampler;
pub mod scenario;
pub mod seq;

pub use error::{EngineError, Result};
