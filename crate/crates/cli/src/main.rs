//! `surplus`: evaluate risk functionals, test acceptance, run law checks,
//! decompose acceptance sets, compute polars/duals/norms, and extend sequence
//! functionals — all against one self-describing workspace file.
//!
//! Exit codes: 0 value/pass, 1 law counterexample, 2 dangling reference,
//! 3 malformed input. All randomness flows from one seed, so identical
//! inputs produce byte-identical reports.

mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use surplus_core::acceptance::{self, AcceptanceSet};
use surplus_core::decomposition::{self, VerifyOptions};
use surplus_core::duality::{self, DualDomain};
use surplus_core::orlicz::{self, OrliczFunction};
use surplus_core::risk;
use surplus_core::robust;
use surplus_core::seq;

use workspace::{CliError, CliResult, SeqTarget, Workspace};

const EXIT_COUNTEREXAMPLE: u8 = 1;
const EXIT_REFERENCE: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "surplus", version, about = "Scenario engine for surplus-invariant risk")]
struct Cli {
    /// Workspace JSON file with the scenario space and named objects.
    #[arg(long, value_name = "FILE")]
    workspace: PathBuf,

    /// Overrides the workspace seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Emit JSON (default).
    #[arg(long, global = true)]
    json: bool,

    /// Emit a flat key/value table instead of JSON.
    #[arg(long, global = true, conflicts_with = "json")]
    table: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Law {
    /// Surplus invariance of an acceptance set.
    Si,
    /// Surplus invariance subject to positivity of a functional.
    SiPos,
    /// S-additivity of a functional.
    SAdditive,
    /// Loss-profile equivalences of a monotone set.
    Equivalences,
    /// Band-projection stability of a monotone set.
    BandStability,
    /// Convexity of a set versus its solid part.
    Convexity,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Domain {
    Negative,
    NegativeWithS,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a functional on a position (`@file.csv` ingests CSV).
    Eval { functional: String, position: String },
    /// Test membership of a position in an acceptance set.
    Accept { set: String, position: String },
    /// Run a randomized law check; exits 1 on a counterexample.
    Check {
        #[arg(value_enum)]
        law: Law,
        target: String,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Decompose a convex order-closed surplus-invariant monotone set.
    Decompose {
        set: String,
        #[arg(long, default_value_t = 1e9)]
        tmax: f64,
        /// Also run the reconstruction/boundedness/support/recession
        /// verifiers with this many trials.
        #[arg(long)]
        verify_trials: Option<u64>,
    },
    /// Polar computations for a solid set.
    Polar {
        set: String,
        /// Test this position (as a density) for polar membership.
        #[arg(long, value_name = "POSITION")]
        z: Option<String>,
        /// Test this dual measure for robust polar membership.
        #[arg(long, value_name = "MEASURE")]
        mu: Option<String>,
        /// Produce a strictly positive polar element.
        #[arg(long)]
        witness: bool,
        /// Run the bipolar round trip at this position.
        #[arg(long, value_name = "POSITION")]
        bipolar: Option<String>,
        /// Use the multi-prior pairing and report a measure witness.
        #[arg(long)]
        robust: bool,
        #[arg(long)]
        prior: Option<String>,
    },
    /// Conjugate duality: primal value, biconjugate, gap, witness density.
    Dual {
        functional: String,
        position: String,
        #[arg(long, value_enum, default_value = "negative-with-s")]
        domain: Domain,
    },
    /// Extend a sequence functional by monotone truncation.
    Extend {
        functional: String,
        position: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Truncation schedule base (2 or 3).
        #[arg(long, default_value_t = 2)]
        schedule: u64,
    },
    /// Luxemburg/Orlicz norm (`--orlicz`) or robust L^p norm (`--lp`).
    Norm {
        position: String,
        /// Orlicz spec: `power:P`, `scaled:P:C`, `linfty`, `exp`, or JSON.
        #[arg(long, conflicts_with = "lp")]
        orlicz: Option<String>,
        /// Exponent for the robust norm (`inf` allowed).
        #[arg(long)]
        lp: Option<String>,
        #[arg(long)]
        prior: Option<String>,
    },
}

struct Outcome {
    body: serde_json::Value,
    code: u8,
}

impl Outcome {
    fn ok(body: serde_json::Value) -> Self {
        Outcome { body, code: 0 }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(EXIT_INPUT)
                }
            };
        }
    };
    let table = cli.table;
    match run(cli) {
        Ok(outcome) => {
            if table {
                print!("{}", render_table(&outcome.body));
            } else {
                println!("{}", serde_json::to_string_pretty(&outcome.body).expect("serializable"));
            }
            ExitCode::from(outcome.code)
        }
        Err(CliError::Reference(m)) => {
            eprintln!("reference error: {m}");
            ExitCode::from(EXIT_REFERENCE)
        }
        Err(CliError::Input(m)) => {
            eprintln!("input error: {m}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable")
}

fn run(cli: Cli) -> CliResult<Outcome> {
    let ws = Workspace::load(&cli.workspace)?;
    let seed = cli.seed.unwrap_or(ws.seed);
    match cli.command {
        Command::Eval { functional, position } => {
            let rho = ws.functional(&functional)?;
            let x = ws.position(&position)?;
            let value = rho.eval(&ws.space, &x)?;
            Ok(Outcome::ok(json!({ "value": to_value(&value) })))
        }
        Command::Accept { set, position } => {
            let set = ws.acceptance_set(&set)?;
            let x = ws.position(&position)?;
            Ok(Outcome::ok(json!({ "accepted": set.contains(&ws.space, &x) })))
        }
        Command::Check { law, target, trials, tol } => {
            if trials == 0 {
                return Err(CliError::Input("--trials must be positive".into()));
            }
            run_check(&ws, law, &target, trials, tol, seed)
        }
        Command::Decompose { set, tmax, verify_trials } => {
            let set = ws.acceptance_set(&set)?;
            let dec = decomposition::decompose(&ws.space, set, tmax)?;
            let mut body = to_value(&dec.report(&ws.space));
            if let Some(trials) = verify_trials {
                if trials == 0 {
                    return Err(CliError::Input("--verify-trials must be positive".into()));
                }
                let opts = VerifyOptions { trials, seed, half_width: 5.0 };
                let verification = json!({
                    "reconstruction": to_value(&decomposition::verify_reconstruction(&ws.space, set, &dec, opts)),
                    "radially_bounded": to_value(&decomposition::check_radially_bounded_d(&ws.space, &dec, opts)),
                    "support_condition": to_value(&decomposition::check_support_condition(&ws.space, &dec, opts)),
                    "recession_lineality": to_value(&decomposition::recession_lineality(&ws.space, set, &dec, opts)),
                });
                body.as_object_mut()
                    .expect("report is an object")
                    .insert("verification".into(), verification);
            }
            Ok(Outcome::ok(body))
        }
        Command::Polar { set, z, mu, witness, bipolar, robust, prior } => {
            let solid = ws.solid_set(&set)?;
            let prior_idx = ws.prior_index(prior.as_deref())?;
            if let Some(mname) = mu {
                let measure = ws.dual_measure(&mname)?;
                let (verdict, sup) =
                    duality::robust_polar_membership(&ws.space, solid, measure)?;
                return Ok(Outcome::ok(json!({
                    "verdict": to_value(&verdict),
                    "sup_pairing": sup,
                })));
            }
            if let Some(zname) = z {
                let zpos = ws.position(&zname)?;
                let (verdict, sup) =
                    duality::polar_membership(&ws.space, solid, zpos.payoffs(), prior_idx)?;
                return Ok(Outcome::ok(json!({
                    "verdict": to_value(&verdict),
                    "sup_pairing": sup,
                })));
            }
            if witness {
                let (density, sup) = duality::polar_positive_witness(&ws.space, solid, prior_idx)?;
                return Ok(Outcome::ok(json!({
                    "witness_density": density,
                    "sup_pairing": sup,
                })));
            }
            if let Some(xname) = bipolar {
                let x = ws.position(&xname)?;
                if robust {
                    let (report, measure) = duality::bipolar_check_robust(&ws.space, solid, &x)?;
                    let mut body = to_value(&report);
                    if let Some(mu) = measure {
                        let terms: Vec<serde_json::Value> = mu
                            .terms()
                            .iter()
                            .map(|t| {
                                json!({
                                    "prior": ws.space.priors()[t.prior].name,
                                    "density": t.density,
                                    "coeff": t.coeff,
                                })
                            })
                            .collect();
                        body.as_object_mut()
                            .expect("report is an object")
                            .insert("witness_measure".into(), json!({ "terms": terms }));
                    }
                    return Ok(Outcome::ok(body));
                }
                let report = duality::bipolar_check(solid, x.payoffs())?;
                return Ok(Outcome::ok(to_value(&report)));
            }
            Err(CliError::Input("polar needs one of --z, --mu, --witness, --bipolar".into()))
        }
        Command::Dual { functional, position, domain } => {
            let rho = ws.functional(&functional)?;
            let x = ws.position(&position)?;
            let domain = match domain {
                Domain::Negative => DualDomain::Negative,
                Domain::NegativeWithS => DualDomain::SAdditive,
            };
            let primal = rho.eval(&ws.space, &x)?;
            let dual = duality::biconjugate(&ws.space, rho, &x, domain, seed)?;
            let gap = primal.finite().map(|p| p - dual.value);
            Ok(Outcome::ok(json!({
                "primal": to_value(&primal),
                "dual": dual.value,
                "gap": gap,
                "witness_density": dual.witness,
            })))
        }
        Command::Extend { functional, position, tol, schedule } => {
            let x = ws.seq_position(&position)?;
            match ws.seq_functional(&functional)? {
                SeqTarget::Base(rho) => {
                    let result = seq::extend_with_schedule(rho, x, tol, schedule)?;
                    Ok(Outcome::ok(to_value(&result)))
                }
                SeqTarget::Margin(margin) => {
                    let value = margin.extend(x, tol)?;
                    Ok(Outcome::ok(json!({ "value": value })))
                }
            }
        }
        Command::Norm { position, orlicz: orlicz_spec, lp, prior } => {
            let x = ws.position(&position)?;
            match (orlicz_spec, lp) {
                (Some(spec), None) => {
                    let phi = parse_orlicz(&spec)?;
                    let prior_idx = ws.prior_index(prior.as_deref())?;
                    let value = orlicz::luxemburg_norm(&ws.space, &x, &phi, prior_idx)?;
                    Ok(Outcome::ok(json!({ "value": value })))
                }
                (None, Some(p)) => {
                    let p: f64 = if p == "inf" {
                        f64::INFINITY
                    } else {
                        p.parse().map_err(|_| {
                            CliError::Input(format!("bad exponent `{p}` (number or `inf`)"))
                        })?
                    };
                    let value = robust::robust_norm(&ws.space, &x, p)?;
                    Ok(Outcome::ok(json!({ "value": value })))
                }
                _ => Err(CliError::Input("norm needs exactly one of --orlicz or --lp".into())),
            }
        }
    }
}

fn run_check(
    ws: &Workspace,
    law: Law,
    target: &str,
    trials: u64,
    tol: f64,
    seed: u64,
) -> CliResult<Outcome> {
    let set_opts = acceptance::CheckOptions { trials, seed, half_width: 5.0 };
    let rho_opts = risk::CheckOptions { trials, seed, half_width: 5.0, tolerance: tol };
    let report = match law {
        Law::Si => {
            let set: &AcceptanceSet = ws.acceptance_set(target)?;
            acceptance::check_surplus_invariant(&ws.space, set, set_opts)
        }
        Law::Equivalences => {
            acceptance::check_equivalences(&ws.space, ws.acceptance_set(target)?, set_opts)?
        }
        Law::BandStability => {
            acceptance::check_band_stability(&ws.space, ws.acceptance_set(target)?, set_opts)?
        }
        Law::Convexity => {
            acceptance::check_convexity_via_d(&ws.space, ws.acceptance_set(target)?, set_opts)?
        }
        Law::SiPos => risk::check_si_subject_pos(&ws.space, ws.functional(target)?, rho_opts)?,
        Law::SAdditive => risk::check_s_additive(&ws.space, ws.functional(target)?, rho_opts)?,
    };
    let code = if report.is_pass() { 0 } else { EXIT_COUNTEREXAMPLE };
    Ok(Outcome { body: to_value(&report), code })
}

fn parse_orlicz(spec: &str) -> CliResult<OrliczFunction> {
    let phi = if spec.trim_start().starts_with('{') {
        serde_json::from_str(spec)
            .map_err(|e| CliError::Input(format!("bad Orlicz JSON: {e}")))?
    } else {
        let parts: Vec<&str> = spec.split(':').collect();
        match parts.as_slice() {
            ["power", p] => OrliczFunction::Power {
                p: p.parse().map_err(|_| CliError::Input(format!("bad power `{p}`")))?,
            },
            ["scaled", p, c] => OrliczFunction::ScaledPower {
                p: p.parse().map_err(|_| CliError::Input(format!("bad power `{p}`")))?,
                c: c.parse().map_err(|_| CliError::Input(format!("bad scale `{c}`")))?,
            },
            ["linfty"] => OrliczFunction::LinftyType,
            ["exp"] => OrliczFunction::ExpMinusOne,
            _ => {
                return Err(CliError::Input(format!(
                    "unknown Orlicz spec `{spec}` (power:P, scaled:P:C, linfty, exp, or JSON)"
                )))
            }
        }
    };
    phi.validate()?;
    Ok(phi)
}

/// Flat `key = value` rendering; nested objects are dotted paths. Keys come
/// out of `serde_json::Map` already sorted, so the table is deterministic.
fn render_table(value: &serde_json::Value) -> String {
    fn walk(prefix: &str, v: &serde_json::Value, out: &mut String) {
        match v {
            serde_json::Value::Object(map) => {
                for (k, v) in map {
                    let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&path, v, out);
                }
            }
            other => {
                out.push_str(prefix);
                out.push_str(" = ");
                out.push_str(&other.to_string());
                out.push('\n');
            }
        }
    }
    let mut out = String::new();
    walk("", value, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orlicz_spec_parsing() {
        assert_eq!(parse_orlicz("power:2").unwrap(), OrliczFunction::Power { p: 2.0 });
        assert_eq!(
            parse_orlicz("scaled:2:0.5").unwrap(),
            OrliczFunction::ScaledPower { p: 2.0, c: 0.5 }
        );
        assert_eq!(parse_orlicz("linfty").unwrap(), OrliczFunction::LinftyType);
        assert_eq!(
            parse_orlicz(r#"{"kind":"power","p":3}"#).unwrap(),
            OrliczFunction::Power { p: 3.0 }
        );
        assert!(parse_orlicz("power:0.5").is_err());
        assert!(parse_orlicz("nope").is_err());
    }

    #[test]
    fn table_rendering_is_flat_and_sorted() {
        let v = serde_json::json!({"b": {"y": 2, "x": 1}, "a": true});
        let rendered = render_table(&v);
        assert_eq!(rendered, "a = true\nb.x = 1\nb.y = 2\n");
    }
}
