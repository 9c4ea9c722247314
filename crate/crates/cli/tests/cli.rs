use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn seqclear(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqclear"))
        .args(args)
        .env_remove("SEQCLEAR_STEP_BOUND")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = seqclear(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

/// Runs a failing command and returns the error code from stderr.
fn fails(args: &[&str]) -> String {
    let out = seqclear(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    err["error"]["code"].as_str().unwrap().to_string()
}

fn gadget(dir: &Path, kind: &str, params: &[&str]) -> PathBuf {
    let path = dir.join(format!("{kind}.json"));
    let mut args = vec!["gadget", kind, "-o", path.to_str().unwrap()];
    for p in params {
        args.extend(["--param", p]);
    }
    ok(&args);
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn branching_has_two_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let file = gadget(dir.path(), "branching", &[]);
    let report = json(&["search", "outcomes", s(&file), "--model", "reversible"]);
    assert_eq!(report["truncated"], false);
    let mut outcomes: Vec<(String, String)> = report["terminals"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| {
            (
                t["rates"]["u"].as_str().unwrap().to_string(),
                t["rates"]["v"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    outcomes.sort();
    assert_eq!(
        outcomes,
        [("0".into(), "1".into()), ("1".into(), "0".into())]
    );
}

#[test]
fn infinite_loop_cycles_under_lex() {
    let dir = tempfile::tempdir().unwrap();
    let file = gadget(dir.path(), "infinite_loop", &[]);
    let trace = dir.path().join("trace.json");
    let out = json(&[
        "run",
        s(&file),
        "--strategy",
        "lex",
        "--max-steps",
        "100",
        "--trace",
        s(&trace),
        "--json",
    ]);
    assert_eq!(out["outcome"]["kind"], "cycle_detected");
    assert_eq!(out["outcome"]["period"], 4);
    let records: Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(records.as_array().unwrap().len(), 4);
    assert_eq!(records[0]["t"], 1);
    assert!(records[0]["old"].is_string());
}

#[test]
fn clearing_requires_debt_only_input() {
    let dir = tempfile::tempdir().unwrap();
    let file = gadget(dir.path(), "example1", &[]);
    assert_eq!(fails(&["clearing", s(&file)]), "not_debt_only");

    let file = gadget(dir.path(), "longstab", &["m=2"]);
    let out = json(&["clearing", s(&file), "--json"]);
    assert_eq!(out["rates"]["v"], "0");
}

#[test]
fn eval_and_equilibrium_check_agree_with_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let file = gadget(dir.path(), "example1", &[]);
    let rates = dir.path().join("r.json");
    std::fs::write(&rates, r#"{"u": "1/2"}"#).unwrap();
    let e = json(&["eval", s(&file), "--rates", s(&rates), "--json"]);
    let v = e["banks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|b| b["id"] == "v")
        .unwrap();
    assert_eq!(v["equity"], "3");
    let check = json(&[
        "equilibrium-check",
        s(&file),
        "--rates",
        s(&rates),
        "--json",
    ]);
    assert_eq!(check["equilibrium"], true);

    let table = ok(&["eval", s(&file), "--rates", s(&rates)]);
    assert!(table.contains("1/2 (~0.500000)"));
    assert!(table.contains("approximations"));
}

#[test]
fn min_and_max_defaults_with_replayed_witness() {
    let dir = tempfile::tempdir().unwrap();
    let file = gadget(dir.path(), "diffoutcome", &["n=10"]);
    let lo = json(&["search", "min-defaults", s(&file)]);
    let hi = json(&["search", "max-defaults", s(&file)]);
    assert_eq!(lo["defaults"], 1);
    assert_eq!(hi["defaults"], 7);
    assert_eq!(
        hi["trace"].as_array().unwrap().len(),
        hi["witness"].as_array().unwrap().len()
    );
}

#[test]
fn best_default_time_reads_dimacs() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("f.cnf");
    std::fs::write(&cnf, "c two clauses\np cnf 2 2\n1 2 0\n-1 0\n").unwrap();
    let report = json(&["best-default-time", "--formula", s(&cnf)]);
    assert_eq!(report["maxsat_opt"], 2);
    assert_eq!(report["best_payoff"], "2");
    assert_eq!(report["opportunities"].as_array().unwrap().len(), 4);
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let file = gadget(dir.path(), "earlydef_monotone", &[]);
    let args = [
        "run",
        s(&file),
        "--model",
        "monotone",
        "--strategy",
        "random:7",
        "--json",
    ];
    assert_eq!(ok(&args), ok(&args));
    let a = ok(&["gadget", "counter", "--param", "k=2"]);
    let b = ok(&["gadget", "counter", "--param", "k=2"]);
    assert_eq!(a, b);
}

#[test]
fn emitted_gadgets_reload() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["example2", "stop_at_will", "best_time"] {
        let params: &[&str] = match kind {
            "stop_at_will" => &["k=5"],
            "best_time" => &["formula=1 -2; 2"],
            _ => &[],
        };
        let file = gadget(dir.path(), kind, params);
        let text = std::fs::read_to_string(&file).unwrap();
        let parsed: Value = serde_json::from_str(&text).unwrap();
        assert!(parsed["roles"].is_object());
        ok(&["eval", s(&file), "--json"]);
        for bank in parsed["banks"].as_array().unwrap() {
            assert!(bank["external_assets"].is_string());
        }
        for c in parsed["debts"]
            .as_array()
            .unwrap()
            .iter()
            .chain(parsed["cds"].as_array().unwrap())
        {
            assert!(c["weight"].is_string());
        }
    }
}

#[test]
fn step_bound_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let file = gadget(dir.path(), "convergence", &[]);
    let out = Command::new(env!("CARGO_BIN_EXE_seqclear"))
        .args(["run", s(&file), "--json"])
        .env("SEQCLEAR_STEP_BOUND", "7")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["outcome"]["kind"], "step_bound_exceeded");
    assert_eq!(v["outcome"]["steps"], 7);
}

#[test]
fn bad_input_is_reported_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"banks": [{"id": "a", "external_assets": 0.5}]}"#).unwrap();
    assert_eq!(fails(&["eval", s(&bad)]), "parse_error");
    assert_eq!(fails(&["eval", "/no/such/file.json"]), "io_error");
    assert_eq!(fails(&["gadget", "nope"]), "unknown_gadget");
    assert_eq!(fails(&["gadget", "longstab", "--param", "m"]), "usage");
    let file = gadget(dir.path(), "branching", &[]);
    assert_eq!(
        fails(&["run", s(&file), "--strategy", "seq:w"]),
        "unknown_bank"
    );
    assert_eq!(
        fails(&["run", s(&file), "--strategy", "seq:src"]),
        "strategy_violation"
    );
    assert_eq!(fails(&["run", s(&file), "--strategy", "sideways"]), "usage");
}
