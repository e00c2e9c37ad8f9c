//! End-to-end checks of the binary: flag parsing, artifact determinism,
//! and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_labandit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_reference_env(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("menu.json");
    fs::write(
        &path,
        r#"{"type":"no_learning","arms":[
            {"id":"low","support":[0.5,-0.5],"probs":[0.5,0.5]},
            {"id":"high","support":[1.0,-1.0],"probs":[0.5,0.5]}]}"#,
    )
    .unwrap();
    path
}

fn write_two_armed(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("two_armed.json");
    fs::write(&path, r#"{"type":"two_armed","p_low":0.2,"p_high":0.8,"mu1":0.5}"#).unwrap();
    path
}

fn write_utility(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("exp0.json");
    fs::write(&path, r#"{"phi1":"exponential","c":0.0,"theta":0.5}"#).unwrap();
    path
}

#[test]
fn value_closed_form_at_origin() {
    let out = run(&[
        "value",
        "--c",
        "0",
        "--sigma-low",
        "0.5",
        "--sigma-high",
        "1",
        "--phi1",
        "exponential",
        "--method",
        "closed-form",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["v"], 0.0);
    assert_eq!(v["method"], "closed-form");
}

#[test]
fn value_methods_agree() {
    let parse = |out: Output| -> f64 {
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["v"].as_f64().unwrap()
    };
    let base = [
        "value",
        "--c",
        "-0.5",
        "--sigma-low",
        "0.5",
        "--sigma-high",
        "1",
    ];
    let cf = parse(run(&[&base[..], &["--method", "closed-form"]].concat()));
    let q = parse(run(&[&base[..], &["--method", "quadrature"]].concat()));
    assert!((cf - 0.33226703951494374).abs() < 1e-10);
    assert!((cf - q).abs() < 1e-6);
}

#[test]
fn density_csv_shape() {
    let out = run(&[
        "density",
        "--sigma-low",
        "0.5",
        "--sigma-high",
        "1",
        "--c",
        "0",
        "--points",
        "11",
        "--y-min",
        "-2",
        "--y-max",
        "2",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines[0], "y,q");
    assert_eq!(lines.len(), 12);
}

#[test]
fn obm_sample_is_deterministic_and_seed_overridable() {
    let args = [
        "obm-sample",
        "--sigma-low",
        "0.5",
        "--sigma-high",
        "1",
        "--steps",
        "16",
        "--seed",
        "5",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    // BANDIT_SEED overrides --seed
    let c = bin().args(args).env("BANDIT_SEED", "6").output().unwrap();
    assert!(c.status.success());
    assert_ne!(a.stdout, c.stdout);
    let d = run(&["obm-sample", "--sigma-low", "0.5", "--sigma-high", "1", "--steps", "16", "--seed", "6"]);
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn dp_subcommand_reports_value_and_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let env = write_reference_env(dir.path());
    let utility = write_utility(dir.path());
    let out = run(&[
        "dp",
        "--env",
        env.to_str().unwrap(),
        "--utility",
        utility.to_str().unwrap(),
        "--n",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - (-0.024464546784911834)).abs() < 1e-12);
    assert!(v["runtime_ms"].is_u64());

    // strategy evaluation at the same horizon
    let out = run(&[
        "dp",
        "--env",
        env.to_str().unwrap(),
        "--utility",
        utility.to_str().unwrap(),
        "--n",
        "1",
        "--strategy",
        "s_star",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - (-0.07740906087308774)).abs() < 1e-12);
}

#[test]
fn dp_two_armed_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let env = write_two_armed(dir.path());
    let utility = write_utility(dir.path());
    let out = run(&[
        "dp",
        "--env",
        env.to_str().unwrap(),
        "--utility",
        utility.to_str().unwrap(),
        "--n",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // uniform prior, one pull: 0.25·(φ(1)+φ(−1))
    assert!((v["value"].as_f64().unwrap() - (-0.03870453043654387)).abs() < 1e-12);
}

#[test]
fn dp_indicator_and_table_dump() {
    let dir = tempfile::tempdir().unwrap();
    let env = write_reference_env(dir.path());
    let table = dir.path().join("table.csv");
    let out = run(&[
        "dp",
        "--env",
        env.to_str().unwrap(),
        "--n",
        "4",
        "--indicator-c",
        "0",
        "--dump-table",
        table.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["atoms_at_boundary"], 1);
    let text = fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("stage,sum,d1,d2,value,argmax\n"));
    // stages 1..=5 with 4(i-1)+1 states each
    assert_eq!(text.trim().lines().count(), 1 + (1 + 5 + 9 + 13 + 17));
}

#[test]
fn simulate_and_posterior_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let menu = write_reference_env(dir.path());
    let learn = write_two_armed(dir.path());
    let per_rep = dir.path().join("reps.csv");
    let out = run(&[
        "simulate",
        "--env",
        menu.to_str().unwrap(),
        "--strategy",
        "s_star",
        "--n",
        "100",
        "--reps",
        "500",
        "--seed",
        "3",
        "--per-rep",
        per_rep.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["reps"], 500);
    assert_eq!(report["horizon"], 100);
    assert!(report["value_estimate"].is_f64());
    let reps_csv = fs::read_to_string(&per_rep).unwrap();
    assert_eq!(reps_csv.trim().lines().count(), 501);

    // byte-identical rerun
    let again = run(&[
        "simulate",
        "--env",
        menu.to_str().unwrap(),
        "--strategy",
        "s_star",
        "--n",
        "100",
        "--reps",
        "500",
        "--seed",
        "3",
    ]);
    assert_eq!(out.stdout, again.stdout);

    let out = run(&[
        "posterior",
        "--env",
        learn.to_str().unwrap(),
        "--truth",
        "low",
        "--n",
        "200",
        "--reps",
        "500",
        "--seed",
        "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["frac_certain_toward_truth"].as_f64().unwrap() > 0.9);
}

#[test]
fn converge_reports_slope() {
    let dir = tempfile::tempdir().unwrap();
    let env = write_reference_env(dir.path());
    let utility = write_utility(dir.path());
    let rows = dir.path().join("rows.csv");
    let out = run(&[
        "converge",
        "--env",
        env.to_str().unwrap(),
        "--utility",
        utility.to_str().unwrap(),
        "--n-grid",
        "16..256",
        "--rows-csv",
        rows.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
    let slope = v["slope"].as_f64().unwrap();
    assert!((-1.2..=-0.3).contains(&slope), "slope {slope}");
    assert!(v["v"].as_f64().unwrap().abs() < 1e-9);
    let csv = fs::read_to_string(&rows).unwrap();
    assert!(csv.starts_with("n,v_n,gap,v\n"));
}

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // nonzero-mean arm
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"type":"no_learning","arms":[{"support":[1.0,-1.0],"probs":[0.6,0.4]}]}"#,
    )
    .unwrap();
    let utility = write_utility(dir.path());
    let out = run(&[
        "dp",
        "--env",
        bad.to_str().unwrap(),
        "--utility",
        utility.to_str().unwrap(),
        "--n",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // unknown strategy selector
    let env = write_reference_env(dir.path());
    let out = run(&[
        "simulate",
        "--env",
        env.to_str().unwrap(),
        "--strategy",
        "nonsense",
        "--n",
        "5",
        "--reps",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // unknown flag is a usage error (clap also exits 2)
    let out = run(&["value", "--c", "0", "--sigma-low", "0.5", "--sigma-high", "1", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));

    // state-space cap exceeded
    let out = run(&[
        "dp",
        "--env",
        env.to_str().unwrap(),
        "--utility",
        utility.to_str().unwrap(),
        "--n",
        "100",
        "--cap",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_lists_every_subcommand() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in [
        "value",
        "density",
        "obm-sample",
        "dp",
        "simulate",
        "posterior",
        "converge",
    ] {
        assert!(text.contains(sub), "missing {sub} in --help");
    }
    for sub in ["value", "dp", "simulate", "converge"] {
        assert!(run(&[sub, "--help"]).status.success());
    }
}

#[test]
fn mismatched_coupling_exits_2() {
    // converge requires theta = sigma_low/sigma_high of the environment
    let dir = tempfile::tempdir().unwrap();
    let env = write_reference_env(dir.path());
    let utility = dir.path().join("wrong.json");
    fs::write(&utility, r#"{"phi1":"exponential","c":0.0,"theta":0.7}"#).unwrap();
    let out = run(&[
        "converge",
        "--env",
        env.to_str().unwrap(),
        "--utility",
        utility.to_str().unwrap(),
        "--n-grid",
        "16..32",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("coupling"), "stderr: {err}");
}

#[test]
fn custom_strategy_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let env = write_reference_env(dir.path());
    let utility = write_utility(dir.path());
    let table = dir.path().join("table.json");
    fs::write(
        &table,
        r#"{"rules":[{"sum_leq":0.0,"arm":"high"}],"default":"low"}"#,
    )
    .unwrap();
    let selector = format!("custom:{}", table.to_str().unwrap());
    let out = run(&[
        "dp",
        "--env",
        env.to_str().unwrap(),
        "--utility",
        utility.to_str().unwrap(),
        "--n",
        "1",
        "--strategy",
        &selector,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // this table reproduces the switching rule exactly
    assert!((v["value"].as_f64().unwrap() - (-0.07740906087308774)).abs() < 1e-12);
}
