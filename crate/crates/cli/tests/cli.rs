//! End-to-end tests of the `surplus` binary: command outputs, exit codes,
//! CSV ingestion, and rendering modes.

use std::path::PathBuf;
use std::process::{Command, Output};

fn workspace_json() -> &'static str {
    r#"{
      "scenarios": ["w1", "w2"],
      "priors": [{"name": "P", "weights": [0.5, 0.5]}],
      "positions": [
        {"name": "X", "payoffs": [-1.0, 2.0]},
        {"name": "ones", "payoffs": [1.0, 1.0]},
        {"name": "edge", "payoffs": [4.0, 0.0]}
      ],
      "acceptance_sets": [
        {"name": "var40", "kind": "var", "alpha": 0.4, "prior": "P"},
        {"name": "es75", "kind": "es", "alpha": 0.75, "prior": "P"},
        {"name": "orthant", "kind": "positive_orthant"},
        {"name": "both", "kind": "intersection", "members": ["var40", "orthant"]}
      ],
      "functionals": [
        {"name": "es50", "kind": "es", "alpha": 0.5, "prior": "P"},
        {"name": "vmargin", "kind": "from_acceptance", "set": "var40"},
        {"name": "spanm", "kind": "span", "event": ["w1"], "prior": "P"}
      ],
      "solid_sets": [
        {"name": "C", "kind": "polytope", "vertices": [[2.0, 0.0], [0.0, 2.0]]},
        {"name": "B", "kind": "box", "upper": [1.0, 1.0]}
      ],
      "dual_measures": [
        {"name": "mu", "terms": [{"prior": "P", "density": [1.0, 1.0], "coeff": 1.0}]}
      ],
      "seq_positions": [
        {"name": "xn", "head": [], "tail": {"kind": "affine", "a": -1.0, "b": 0.0}}
      ],
      "seq_functionals": [
        {"name": "ws", "kind": "weighted_shortfall", "scale": 1.0, "ratio": 0.5},
        {"name": "margin", "kind": "shortfall_margin", "scale": 1.0, "ratio": 0.5, "level": 1.0}
      ],
      "seed": 42
    }"#
}

struct Fixture {
    _dir: tempfile::TempDir,
    ws: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws.json");
    std::fs::write(&ws, workspace_json()).unwrap();
    Fixture { _dir: dir, ws }
}

fn run(fix: &Fixture, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surplus"))
        .arg("--workspace")
        .arg(&fix.ws)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn eval_reports_values_and_exit_codes() {
    let fix = fixture();
    let out = run(&fix, &["eval", "es50", "X"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["value"], 1.0);

    // Margin of a constant position under the VaR set.
    let out = run(&fix, &["eval", "vmargin", "ones"]);
    assert_eq!(stdout_json(&out)["value"].as_f64().unwrap(), -1.0);

    let out = run(&fix, &["eval", "missing", "X"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&fix, &["eval", "es50", "missing"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn accept_and_check_verdicts() {
    let fix = fixture();
    let out = run(&fix, &["accept", "orthant", "ones"]);
    assert_eq!(stdout_json(&out)["accepted"], true);

    let out = run(&fix, &["check", "si", "var40", "--trials", "1500"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["verdict"], "pass");

    let out = run(&fix, &["check", "si", "es75", "--trials", "1500"]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], "counterexample");
    assert!(v["witness"]["x"].is_array());
    assert_eq!(v["seed"], 42);

    let out = run(&fix, &["check", "si", "var40", "--trials", "0"]);
    assert_eq!(out.status.code(), Some(3));

    let out = run(&fix, &["check", "s-additive", "es50", "--trials", "500"]);
    assert_eq!(out.status.code(), Some(0));

    let out = run(&fix, &["check", "si-pos", "vmargin", "--trials", "500"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn decompose_and_polar_reports() {
    let fix = fixture();
    let out = run(&fix, &["decompose", "orthant", "--verify-trials", "500"]);
    let v = stdout_json(&out);
    assert_eq!(v["E1"], serde_json::json!(["w1", "w2"]));
    assert_eq!(v["E2"], serde_json::json!([]));
    assert_eq!(v["verification"]["reconstruction"]["verdict"], "pass");

    let out = run(&fix, &["polar", "C", "--bipolar", "edge"]);
    let v = stdout_json(&out);
    assert_eq!(v["gauge"], 2.0);
    assert_eq!(v["member"], false);
    assert_eq!(v["agree"], true);

    let out = run(&fix, &["polar", "C", "--bipolar", "edge", "--robust"]);
    let v = stdout_json(&out);
    assert_eq!(v["witness_measure"]["terms"][0]["prior"], "P");

    let out = run(&fix, &["polar", "B", "--witness"]);
    let v = stdout_json(&out);
    assert!(v["sup_pairing"].as_f64().unwrap() <= 1.0 + 1e-9);

    let out = run(&fix, &["polar", "B", "--z", "ones"]);
    assert_eq!(stdout_json(&out)["verdict"], "member");

    // Measures pair through their canonical scenario masses.
    let out = run(&fix, &["polar", "B", "--mu", "mu"]);
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], "member");
    assert!((v["sup_pairing"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let out = run(&fix, &["polar", "B"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn dual_extend_norm_commands() {
    let fix = fixture();
    let out = run(&fix, &["dual", "es50", "X"]);
    let v = stdout_json(&out);
    assert!((v["primal"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((v["dual"].as_f64().unwrap() - 1.0).abs() < 1e-5);
    assert!(v["gap"].as_f64().unwrap().abs() < 1e-5);

    let out = run(&fix, &["extend", "ws", "xn"]);
    let v = stdout_json(&out);
    assert!((v["value"].as_f64().unwrap() - 2.0).abs() <= 1e-9);
    assert!((v["closed_form"].as_f64().unwrap() - 2.0).abs() <= 1e-12);
    assert!(v["trace"].as_array().unwrap().len() > 3);

    let out = run(&fix, &["extend", "margin", "xn"]);
    assert!((stdout_json(&out)["value"].as_f64().unwrap() - 1.0).abs() <= 1e-8);

    let out = run(&fix, &["norm", "X", "--orlicz", "power:2"]);
    let expect = (0.5f64 * 1.0 + 0.5 * 4.0).sqrt();
    assert!((stdout_json(&out)["value"].as_f64().unwrap() - expect).abs() < 1e-7);

    let out = run(&fix, &["norm", "X", "--lp", "inf"]);
    assert_eq!(stdout_json(&out)["value"], 2.0);

    let out = run(&fix, &["norm", "X"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn csv_positions_are_ingested() {
    let fix = fixture();
    let csv = fix.ws.parent().unwrap().join("pos.csv");
    std::fs::write(&csv, "scenario,value\nw2,2.0\nw1,-1.0\n").unwrap();
    let arg = format!("@{}", csv.display());
    let out = run(&fix, &["eval", "es50", &arg]);
    assert_eq!(stdout_json(&out)["value"], 1.0);

    // Missing scenario is an input error.
    std::fs::write(&csv, "scenario,value\nw1,-1.0\n").unwrap();
    let out = run(&fix, &["eval", "es50", &arg]);
    assert_eq!(out.status.code(), Some(3));

    // Unknown scenario is an input error.
    std::fs::write(&csv, "w1,-1.0\nw3,2.0\n").unwrap();
    let out = run(&fix, &["eval", "es50", &arg]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_workspace_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("bad.json");
    std::fs::write(&ws, "{ not json").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_surplus"))
        .args(["--workspace", ws.to_str().unwrap(), "eval", "a", "b"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // Bad prior mass.
    std::fs::write(
        &ws,
        r#"{"scenarios": ["a"], "priors": [{"name": "P", "weights": [0.7]}]}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_surplus"))
        .args(["--workspace", ws.to_str().unwrap(), "eval", "a", "b"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn table_mode_is_flat() {
    let fix = fixture();
    let out = run(&fix, &["eval", "es50", "X", "--table"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "value = 1.0\n");
}

#[test]
fn seed_flag_overrides_workspace_seed() {
    let fix = fixture();
    let a = run(&fix, &["check", "si", "es75", "--trials", "800", "--seed", "7"]);
    let b = run(&fix, &["check", "si", "es75", "--trials", "800", "--seed", "9"]);
    assert_eq!(stdout_json(&a)["seed"], 7);
    assert_eq!(stdout_json(&b)["seed"], 9);
}
