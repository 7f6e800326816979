use std::path::PathBuf;

use hopm::cli::{run_cli, EXIT_ABORT, EXIT_INVALID, EXIT_OK, EXIT_USAGE};
use serde_json::Value;

fn corpus(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus/ocs").join(rel).display().to_string()
}

fn hopm(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_cli(std::iter::once("hopm").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn events(out: &str) -> Vec<Value> {
    out.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn check_reports_clean_and_broken_libraries() {
    let (code, out, _) = hopm(&["check", &corpus("library")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("lib.json");
    std::fs::write(&broken, r#"{"graphs":[{"id":"g","signature":{"inputs":[],"branches":{}},"nodes":{},"edges":[]}]}"#).unwrap();
    let (code, out, _) = hopm(&["check", broken.to_str().unwrap()]);
    assert_eq!(code, EXIT_INVALID);
    assert_eq!(events(&out)[0]["kind"], "load-error");
}

#[test]
fn run_with_a_script() {
    let args = [
        "run",
        &corpus("library"),
        "conference-flow",
        "--input",
        "user=alice",
        "--input",
        "proceedings=ocs-2012",
        "--script",
        &corpus("scripts/pay-invoice.json"),
    ];
    let (code, out, err) = hopm(&args);
    assert_eq!(code, EXIT_OK, "{err}");
    let evs = events(&out);
    assert!(evs.iter().any(|e| e["activityId"] == "send invoice"));
    assert_eq!(evs.last().unwrap()["event"], "runFinished");
    assert!(evs.iter().enumerate().all(|(i, e)| e["seq"] == i + 1));
    assert_eq!(hopm(&args).1, out, "runs are deterministic");
}

#[test]
fn run_without_a_decision_aborts() {
    let (code, out, err) = hopm(&["run", &corpus("library"), "register-to-conference", "--input", "user=alice"]);
    assert_eq!(code, EXIT_ABORT);
    assert_eq!(events(&out).last().unwrap()["event"], "runAborted");
    assert!(err.contains("exhausted"));

    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("bad.json");
    std::fs::write(&script, r#"[{"command":"selectVariant","var":"paymentProcess","graphId":"validate-payment"}]"#).unwrap();
    let args = ["run", &corpus("library"), "register-to-conference", "--input", "user=alice", "--script", script.to_str().unwrap()];
    let (code, _, err) = hopm(&args);
    assert_eq!(code, EXIT_ABORT);
    assert!(err.contains("rejected"));
}

#[test]
fn synth_and_dot() {
    let (code, out, err) = hopm(&["synth", &corpus("validation-spec.json"), "--graph-id", "chain"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["solution"]["length"], 2);
    assert_eq!(v["graph"]["id"], "chain");

    let (code, out, _) = hopm(&["export-dot", &corpus("library"), "CreditCardPayment"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("digraph \"CreditCardPayment\""));
    assert_eq!(hopm(&["export-dot", &corpus("library"), "nope"]).0, EXIT_INVALID);
}

#[test]
fn usage_errors() {
    assert_eq!(hopm(&[]).0, EXIT_USAGE);
    assert_eq!(hopm(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(hopm(&["run", &corpus("library"), "conference-flow", "--input", "user=alice"]).0, EXIT_USAGE);
    assert_eq!(hopm(&["run", &corpus("library"), "conference-flow", "--input", "nonsense"]).0, EXIT_USAGE);
    assert_eq!(hopm(&["synth", "/no/such/spec.json"]).0, EXIT_USAGE);
    assert_eq!(hopm(&["--help"]).0, EXIT_OK);
}
