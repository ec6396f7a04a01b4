use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use defimc::harness::default_scenario;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_defimc"))
}

fn shipped() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/compound_curve.scn")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

/// A small variant of the shipped scenario, written to `dir`.
fn small_scenario(dir: &Path, edit: impl FnOnce(&mut defimc::harness::ScenarioConfig)) -> String {
    let mut cfg = default_scenario();
    cfg.params.max_blocks = 1;
    cfg.menus.exchange_steps = 1;
    edit(&mut cfg);
    let path = dir.join("small.scn");
    std::fs::write(&path, cfg.to_text()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn shipped_scenario_is_the_builtin_one() {
    let out = run(&["default-scenario"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), std::fs::read_to_string(shipped()).unwrap());
}

#[test]
fn single_valid_property_exits_zero_with_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path(), |_| {});
    let out = run(&["verify", &scn, "--property", "exchange_rate_monotone", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let r = &v[0];
    assert_eq!(r["status"], "Valid");
    assert_eq!(r["property"], "exchange_rate_monotone");
    assert!(r["statesVisited"].as_u64().unwrap() > 1);
    assert!(r["transitionsTaken"].as_u64().unwrap() > 0);
    assert!(r["wallTime"].as_f64().is_some());
    assert!(r.get("trace").is_none());
}

#[test]
fn invalid_property_exits_one_with_trace() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path(), |_| {});
    let out = run(&["verify", &scn, "--property", "nonnegative_profit", "--format", "json", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v[0]["status"], "Invalid");
    assert!(!v[0]["trace"]["labels"].as_array().unwrap().is_empty());
}

#[test]
fn literal_redeem_flag_breaks_the_supply_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path(), |_| {});
    let args = ["verify", &scn, "--property", "balance_invariants"];
    assert_eq!(run(&args).status.code(), Some(0));
    let out = bin().args(args).arg("--paper-literal-redeem").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("redeem"));
}

#[test]
fn state_budget_gives_inconclusive_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path(), |_| {});
    let out = run(&["verify", &scn, "--property", "balance_invariants", "--state-budget", "50"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Inconclusive"));
}

#[test]
fn malformed_inputs_exit_two_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scn");
    std::fs::write(&bad, "scnver 1\n[params]\namp = lots\n").unwrap();
    let out = run(&["verify", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let scn = small_scenario(dir.path(), |c| {
        c.properties = vec![("typo".into(), "G (depositorLos >= 0)".into())];
    });
    let out = run(&["verify", &scn]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("column 4") && err.contains("depositorLoss"), "{err}");

    let out = run(&["verify", &scn, "--property", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replay_reproduces_and_rejects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path(), |_| {});
    let traces = dir.path().join("traces");
    let out = run(&["verify", &scn, "--property", "bounded_loss", "--trace-dir", traces.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let file = traces.join("bounded_loss.trace.json");
    let out = run(&["replay", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("reproduced"));

    // a trace that stops early no longer violates
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    let labels = doc["trace"]["labels"].as_array_mut().unwrap();
    labels.pop();
    let short = dir.path().join("short.json");
    std::fs::write(&short, doc.to_string()).unwrap();
    assert_eq!(run(&["replay", short.to_str().unwrap()]).status.code(), Some(0));

    // a label that does not match the model fails outright
    doc["trace"]["labels"][0]["process"] = "someone else".into();
    std::fs::write(&short, doc.to_string()).unwrap();
    let out = run(&["replay", short.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn extremum_reports_value_and_witness() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path(), |_| {});
    let out = run(&["extremum", &scn, "--expr", "depositorLoss", "--max", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v[0]["status"], "Extremum");
    assert!(v[0]["value"].as_i64().unwrap() > 0);
    assert!(!v[0]["trace"]["labels"].as_array().unwrap().is_empty());

    let out = run(&["extremum", &scn, "--expr", "DAI_balances[compCDAI] + 1", "--min", "--format", "json"]);
    assert_eq!(json(&out)[0]["value"], 2501);
}

#[test]
fn stats_covers_every_property() {
    let dir = tempfile::tempdir().unwrap();
    let scn = small_scenario(dir.path(), |_| {});
    let out = run(&["stats", &scn, "--format", "json"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    let total = v["stateSpace"]["statesVisited"].as_u64().unwrap();
    let props = v["properties"].as_array().unwrap();
    assert_eq!(props.len(), 5);
    for p in props {
        // full exploration: every property sees the whole space
        assert_eq!(p["statesVisited"].as_u64().unwrap(), total, "{p}");
    }
}
