//! Report types shared by the randomized law checkers.
//!
//! Every check is replayable: the report carries the seed, and all trial
//! randomness is derived from `(seed, trial index)` alone.

use serde::Serialize;

/// Outcome of a law check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Counterexample,
}

/// Concrete evidence attached to a counterexample (or to an informational
/// note, e.g. the convexity status of each side of a paired check).
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    /// Trial index on which the evidence was produced, when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial: Option<u64>,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    /// Auxiliary numbers (risk values, masses) referenced by `detail`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Witness {
    pub fn new(detail: impl Into<String>) -> Self {
        Witness { trial: None, detail: detail.into(), x: None, y: None, values: None }
    }

    pub fn at_trial(mut self, trial: u64) -> Self {
        self.trial = Some(trial);
        self
    }

    pub fn with_x(mut self, x: Vec<f64>) -> Self {
        self.x = Some(x);
        self
    }

    pub fn with_y(mut self, y: Vec<f64>) -> Self {
        self.y = Some(y);
        self
    }

    pub fn with_values(mut self, values: Vec<f64>) -> Self {
        self.values = Some(values);
        self
    }
}

/// Result of a randomized or enumerated law check.
#[derive(Debug, Clone, Serialize)]
pub struct LawReport {
    pub law: String,
    pub verdict: Verdict,
    pub trials: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl LawReport {
    pub fn pass(law: impl Into<String>, trials: u64, seed: u64) -> Self {
        LawReport {
            law: law.into(),
            verdict: Verdict::Pass,
            trials,
            witness: None,
            seed,
            notes: Vec::new(),
        }
    }

    pub fn counterexample(
        law: impl Into<String>,
        trials: u64,
        seed: u64,
        witness: Witness,
    ) -> Self {
        LawReport {
            law: law.into(),
            verdict: Verdict::Counterexample,
            trials,
            witness: Some(witness),
            seed,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn is_pass(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_serializes_to_contract_shape() {
        let r = LawReport::counterexample(
            "surplus-invariance",
            100,
            7,
            Witness::new("same loss, different verdicts")
                .at_trial(3)
                .with_x(vec![-1.0, 10.0])
                .with_y(vec![-1.0, 1.5]),
        );
        let v: serde_json::Value = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(v["law"], "surplus-invariance");
        assert_eq!(v["verdict"], "counterexample");
        assert_eq!(v["trials"], 100);
        assert_eq!(v["seed"], 7);
        assert_eq!(v["witness"]["x"][1], 10.0);
    }
}
