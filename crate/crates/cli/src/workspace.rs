//! Workspace file: one self-describing JSON document holding the scenario
//! space, priors, and every named object a command can reference.

use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

use surplus_core::acceptance::AcceptanceSet;
use surplus_core::risk::{LossFunction, RiskFunctional};
use surplus_core::robust::{DualMeasure, DualTerm};
use surplus_core::scenario::{Position, Prior, ScenarioSpace};
use surplus_core::seq::{SeqFunctional, SeqPosition, ShortfallMargin, TailRule};
use surplus_core::duality::SolidSet;

/// CLI-level error; the variant decides the exit code (2 for dangling
/// references, 3 for malformed input).
#[derive(Debug)]
pub enum CliError {
    Reference(String),
    Input(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Reference(m) => write!(f, "{m}"),
            CliError::Input(m) => write!(f, "{m}"),
        }
    }
}

impl From<surplus_core::EngineError> for CliError {
    fn from(e: surplus_core::EngineError) -> Self {
        match e {
            surplus_core::EngineError::UnknownPrior(p) => {
                CliError::Reference(format!("no prior named `{p}`"))
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Deserialize)]
struct NamedPayoffs {
    name: String,
    payoffs: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum AcceptanceSpec {
    WholeSpace,
    PositiveOrthant,
    Box { lower: Vec<Option<f64>> },
    Var { alpha: f64, prior: String },
    Es { alpha: f64, prior: String },
    Span { event: Vec<String>, prior: String },
    Shortfall { loss: LossFunction, level: f64, prior: String },
    LossBoxUnion { uppers: Vec<Vec<f64>> },
    Halfspace { weights: Vec<f64>, bound: f64 },
    Intersection { members: Vec<String> },
}

#[derive(Debug, Clone, Deserialize)]
struct NamedAcceptance {
    name: String,
    #[serde(flatten)]
    spec: AcceptanceSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FunctionalSpec {
    Var { alpha: f64, prior: String },
    Es { alpha: f64, prior: String },
    Shortfall { loss: LossFunction, prior: String },
    ExpectedLoss { prior: String },
    MaxLoss,
    FromAcceptance {
        set: String,
        #[serde(rename = "S")]
        s: Option<Vec<f64>>,
    },
    Span {
        event: Vec<String>,
        prior: String,
        #[serde(rename = "S")]
        s: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
struct NamedFunctional {
    name: String,
    #[serde(flatten)]
    spec: FunctionalSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SolidSpec {
    Box { upper: Vec<f64> },
    Polytope { vertices: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Deserialize)]
struct NamedSolid {
    name: String,
    #[serde(flatten)]
    spec: SolidSpec,
}

#[derive(Debug, Clone, Deserialize)]
struct DualTermSpec {
    prior: String,
    density: Vec<f64>,
    coeff: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct NamedMeasure {
    name: String,
    terms: Vec<DualTermSpec>,
}

#[derive(Debug, Clone, Deserialize)]
struct NamedSeqPosition {
    name: String,
    head: Vec<f64>,
    tail: TailRule,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SeqFunctionalSpec {
    WeightedShortfall { scale: f64, ratio: f64 },
    SupShortfall,
    ShortfallMargin { scale: f64, ratio: f64, level: f64 },
}

#[derive(Debug, Clone, Deserialize)]
struct NamedSeqFunctional {
    name: String,
    #[serde(flatten)]
    spec: SeqFunctionalSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkspaceFile {
    scenarios: Vec<String>,
    priors: Vec<Prior>,
    #[serde(default)]
    positions: Vec<NamedPayoffs>,
    #[serde(default)]
    acceptance_sets: Vec<NamedAcceptance>,
    #[serde(default)]
    functionals: Vec<NamedFunctional>,
    #[serde(default)]
    solid_sets: Vec<NamedSolid>,
    #[serde(default)]
    dual_measures: Vec<NamedMeasure>,
    #[serde(default)]
    seq_positions: Vec<NamedSeqPosition>,
    #[serde(default)]
    seq_functionals: Vec<NamedSeqFunctional>,
    #[serde(default)]
    seed: u64,
}

/// Either of the two sequence functional flavors a command can target.
pub enum SeqTarget {
    Base(SeqFunctional),
    Margin(ShortfallMargin),
}

/// Fully built workspace with name lookups.
pub struct Workspace {
    pub space: ScenarioSpace,
    pub seed: u64,
    positions: Vec<(String, Position)>,
    sets: Vec<(String, AcceptanceSet)>,
    functionals: Vec<(String, RiskFunctional)>,
    solids: Vec<(String, SolidSet)>,
    measures: Vec<(String, DualMeasure)>,
    seq_positions: Vec<(String, SeqPosition)>,
    seq_functionals: Vec<(String, SeqTarget)>,
}

fn unique_names<'a>(kind: &str, names: impl Iterator<Item = &'a String>) -> CliResult<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(CliError::Input(format!("duplicate {kind} name `{n}`")));
        }
    }
    Ok(())
}

impl Workspace {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let file: WorkspaceFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("malformed workspace: {e}")))?;
        Self::build(file)
    }

    fn build(file: WorkspaceFile) -> CliResult<Self> {
        let space = ScenarioSpace::new(
            file.scenarios,
            file.priors.into_iter().map(|p| (p.name, p.weights)).collect(),
        )?;

        unique_names("position", file.positions.iter().map(|p| &p.name))?;
        unique_names("acceptance set", file.acceptance_sets.iter().map(|p| &p.name))?;
        unique_names("functional", file.functionals.iter().map(|p| &p.name))?;
        unique_names("solid set", file.solid_sets.iter().map(|p| &p.name))?;
        unique_names("dual measure", file.dual_measures.iter().map(|p| &p.name))?;
        unique_names("sequence position", file.seq_positions.iter().map(|p| &p.name))?;
        unique_names("sequence functional", file.seq_functionals.iter().map(|p| &p.name))?;

        let mut positions = Vec::new();
        for p in file.positions {
            positions.push((p.name, space.position(p.payoffs)?));
        }

        let mut sets: Vec<(String, AcceptanceSet)> = Vec::new();
        for s in file.acceptance_sets {
            let built = build_acceptance(&space, &sets, &s.spec)?;
            sets.push((s.name, built));
        }

        let mut functionals = Vec::new();
        for f in file.functionals {
            let built = build_functional(&space, &sets, &f.spec)?;
            functionals.push((f.name, built));
        }

        let mut solids = Vec::new();
        for s in file.solid_sets {
            let built = match s.spec {
                SolidSpec::Box { upper } => SolidSet::boxed(upper)?,
                SolidSpec::Polytope { vertices } => SolidSet::polytope(vertices)?,
            };
            if built.dim() != space.len() {
                return Err(CliError::Input(format!(
                    "solid set `{}` has dimension {}, expected {}",
                    s.name,
                    built.dim(),
                    space.len()
                )));
            }
            solids.push((s.name, built));
        }

        let mut measures = Vec::new();
        for m in file.dual_measures {
            let mut terms = Vec::new();
            for t in m.terms {
                terms.push(DualTerm {
                    prior: space.prior_index(&t.prior)?,
                    density: t.density,
                    coeff: t.coeff,
                });
            }
            measures.push((m.name, DualMeasure::new(&space, terms)?));
        }

        let mut seq_positions = Vec::new();
        for p in file.seq_positions {
            seq_positions.push((p.name, SeqPosition::new(p.head, p.tail)?));
        }

        let mut seq_functionals = Vec::new();
        for f in file.seq_functionals {
            let target = match f.spec {
                SeqFunctionalSpec::WeightedShortfall { scale, ratio } => {
                    let rho = SeqFunctional::WeightedShortfall { scale, ratio };
                    rho.validate()?;
                    SeqTarget::Base(rho)
                }
                SeqFunctionalSpec::SupShortfall => SeqTarget::Base(SeqFunctional::SupShortfall),
                SeqFunctionalSpec::ShortfallMargin { scale, ratio, level } => {
                    let m = ShortfallMargin { scale, ratio, level };
                    m.validate()?;
                    SeqTarget::Margin(m)
                }
            };
            seq_functionals.push((f.name, target));
        }

        Ok(Workspace {
            space,
            seed: file.seed,
            positions,
            sets,
            functionals,
            solids,
            measures,
            seq_positions,
            seq_functionals,
        })
    }

    fn lookup<'a, T>(items: &'a [(String, T)], kind: &str, name: &str) -> CliResult<&'a T> {
        items
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .ok_or_else(|| CliError::Reference(format!("no {kind} named `{name}`")))
    }

    /// Resolves a position name, or ingests `@file.csv` with
    /// `scenario,value` rows covering every scenario exactly once.
    pub fn position(&self, name: &str) -> CliResult<Position> {
        if let Some(path) = name.strip_prefix('@') {
            return self.position_from_csv(Path::new(path));
        }
        Self::lookup(&self.positions, "position", name).cloned()
    }

    fn position_from_csv(&self, path: &Path) -> CliResult<Position> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let mut values: Vec<Option<f64>> = vec![None; self.space.len()];
        for (row_idx, record) in reader.records().enumerate() {
            let record =
                record.map_err(|e| CliError::Input(format!("bad CSV row {row_idx}: {e}")))?;
            if record.len() < 2 {
                return Err(CliError::Input(format!(
                    "CSV row {row_idx} needs `scenario,value`"
                )));
            }
            let label = record[0].trim();
            let raw = record[1].trim();
            if row_idx == 0 && raw.parse::<f64>().is_err() {
                continue; // header row
            }
            let value: f64 = raw
                .parse()
                .map_err(|_| CliError::Input(format!("CSV row {row_idx}: bad value `{raw}`")))?;
            let idx = self
                .space
                .labels()
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| CliError::Input(format!("CSV row {row_idx}: unknown scenario `{label}`")))?;
            if values[idx].replace(value).is_some() {
                return Err(CliError::Input(format!("CSV repeats scenario `{label}`")));
            }
        }
        let payoffs: Vec<f64> = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    CliError::Input(format!("CSV misses scenario `{}`", self.space.labels()[i]))
                })
            })
            .collect::<CliResult<_>>()?;
        Ok(self.space.position(payoffs)?)
    }

    pub fn acceptance_set(&self, name: &str) -> CliResult<&AcceptanceSet> {
        Self::lookup(&self.sets, "acceptance set", name)
    }

    pub fn functional(&self, name: &str) -> CliResult<&RiskFunctional> {
        Self::lookup(&self.functionals, "functional", name)
    }

    pub fn solid_set(&self, name: &str) -> CliResult<&SolidSet> {
        Self::lookup(&self.solids, "solid set", name)
    }

    pub fn dual_measure(&self, name: &str) -> CliResult<&DualMeasure> {
        Self::lookup(&self.measures, "dual measure", name)
    }

    pub fn seq_position(&self, name: &str) -> CliResult<&SeqPosition> {
        Self::lookup(&self.seq_positions, "sequence position", name)
    }

    pub fn seq_functional(&self, name: &str) -> CliResult<&SeqTarget> {
        Self::lookup(&self.seq_functionals, "sequence functional", name)
    }

    pub fn prior_index(&self, name: Option<&str>) -> CliResult<usize> {
        match name {
            Some(n) => Ok(self.space.prior_index(n)?),
            None => Ok(0),
        }
    }
}

fn build_acceptance(
    space: &ScenarioSpace,
    existing: &[(String, AcceptanceSet)],
    spec: &AcceptanceSpec,
) -> CliResult<AcceptanceSet> {
    Ok(match spec {
        AcceptanceSpec::WholeSpace => AcceptanceSet::whole_space(),
        AcceptanceSpec::PositiveOrthant => AcceptanceSet::positive_orthant(),
        AcceptanceSpec::Box { lower } => {
            let lower: Vec<f64> =
                lower.iter().map(|l| l.unwrap_or(f64::NEG_INFINITY)).collect();
            AcceptanceSet::box_lower(space, lower)?
        }
        AcceptanceSpec::Var { alpha, prior } => {
            AcceptanceSet::var_level(space, *alpha, space.prior_index(prior)?)?
        }
        AcceptanceSpec::Es { alpha, prior } => {
            AcceptanceSet::es_level(space, *alpha, space.prior_index(prior)?)?
        }
        AcceptanceSpec::Span { event, prior } => AcceptanceSet::span(
            space,
            space.event_of_labels(event)?,
            space.prior_index(prior)?,
        )?,
        AcceptanceSpec::Shortfall { loss, level, prior } => AcceptanceSet::shortfall_level(
            space,
            loss.clone(),
            space.prior_index(prior)?,
            *level,
        )?,
        AcceptanceSpec::LossBoxUnion { uppers } => {
            AcceptanceSet::loss_box_union(space, uppers.clone())?
        }
        AcceptanceSpec::Halfspace { weights, bound } => {
            AcceptanceSet::halfspace(space, weights.clone(), *bound)?
        }
        AcceptanceSpec::Intersection { members } => {
            let resolved: Vec<AcceptanceSet> = members
                .iter()
                .map(|m| Workspace::lookup(existing, "acceptance set", m).cloned())
                .collect::<CliResult<_>>()?;
            AcceptanceSet::intersection(resolved)?
        }
    })
}

fn build_functional(
    space: &ScenarioSpace,
    sets: &[(String, AcceptanceSet)],
    spec: &FunctionalSpec,
) -> CliResult<RiskFunctional> {
    Ok(match spec {
        FunctionalSpec::Var { alpha, prior } => {
            RiskFunctional::var(space, *alpha, space.prior_index(prior)?)?
        }
        FunctionalSpec::Es { alpha, prior } => {
            RiskFunctional::es(space, *alpha, space.prior_index(prior)?)?
        }
        FunctionalSpec::Shortfall { loss, prior } => {
            RiskFunctional::shortfall_value(space, loss.clone(), space.prior_index(prior)?)?
        }
        FunctionalSpec::ExpectedLoss { prior } => {
            RiskFunctional::expected_loss(space, space.prior_index(prior)?)?
        }
        FunctionalSpec::MaxLoss => RiskFunctional::max_loss(space),
        FunctionalSpec::FromAcceptance { set, s } => {
            let set = Workspace::lookup(sets, "acceptance set", set)?.clone();
            let s = match s {
                Some(v) => space.position(v.clone())?,
                None => space.unit(),
            };
            RiskFunctional::from_acceptance(space, set, s)?
        }
        FunctionalSpec::Span { event, prior, s } => {
            let set = AcceptanceSet::span(
                space,
                space.event_of_labels(event)?,
                space.prior_index(prior)?,
            )?;
            let s = match s {
                Some(v) => space.position(v.clone())?,
                None => space.unit(),
            };
            RiskFunctional::from_acceptance(space, set, s)?
        }
    })
}
