use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace { dir: TempDir::new().unwrap() }
    }

    fn file(&self, name: &str, body: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treeshift")).args(args).output().unwrap()
}

fn run_with(cmd: &str, tree: &Path, weights: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--tree", tree.to_str().unwrap(), "--weights", weights.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn records(o: &Output) -> Vec<Value> {
    stdout(o).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

const BINARY: &str = r#"{"family":"rootless-binary"}"#;
const TILDE: &str = r#"{"family":"tilde"}"#;
const BILATERAL: &str = r#"{"family":"bilateral-path"}"#;
const FINITE: &str = r#"{"vertices":["r","a","b","c"],"edges":[["r","a"],["r","b"],["a","c"]],"root":"r"}"#;
const FINITE_WEIGHTS: &str = r#"{"kind":"map","values":{"a":0.5,"b":0.5,"c":0.9}}"#;
const INV_SQRT2: &str = r#"{"kind":"constant","value":0.7071067811865476}"#;
const RAYS: &str =
    r#"{"kind":"rays","unprimed":{"kind":"family","name":"exp-ray"},"primed":{"kind":"constant","value":0.5}}"#;
const ONE: &str = r#"{"kind":"constant","value":1}"#;

#[test]
fn validate_reports_shape_or_structure_error() {
    let ws = Workspace::new();
    let ok = run(&["validate", "--tree", ws.file("t.json", FINITE).to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("rooted, Br=1"));
    assert!(stdout(&ok).contains("leaves: b c"));

    let circuit = ws.file("c.json", r#"{"vertices":["a","b","c"],"edges":[["a","b"],["b","c"],["c","a"]]}"#);
    let bad = run(&["validate", "--tree", circuit.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("CircuitFound"));

    let tilde = run(&["validate", "--tree", ws.file("tilde.json", TILDE).to_str().unwrap()]);
    assert_eq!(tilde.status.code(), Some(0));
    assert!(stdout(&tilde).contains("rootless, Br=1"));
}

#[test]
fn analyze_classifies_the_standard_examples() {
    let ws = Workspace::new();
    let w = ws.file("w.json", INV_SQRT2);
    let out = run_with("analyze", &ws.file("bin.json", BINARY), &w, &["--levels", "-1:2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("C_{1·} ∧ C_{·0}"), "{text}");
    assert!(text.contains("U: cnu-unilateral, multiplicity inf"), "{text}");

    let out = run_with("analyze", &ws.file("fin.json", FINITE), &ws.file("fw.json", FINITE_WEIGHTS), &[]);
    let text = stdout(&out);
    assert!(text.contains("C_{0·} ∧ C_{·0}"), "{text}");
    assert!(text.contains("provenance: forward certified, adjoint certified"), "{text}");

    let out = run_with("analyze", &ws.file("bil.json", BILATERAL), &ws.file("one.json", ONE), &[]);
    assert!(stdout(&out).contains("= C_{11}"));
}

#[test]
fn non_contraction_exits_3_with_a_rescale_hint() {
    let ws = Workspace::new();
    let out = run_with(
        "analyze",
        &ws.file("bin.json", BINARY),
        &ws.file("w.json", r#"{"kind":"constant","value":0.8}"#),
        &[],
    );
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains("NotAContraction: norm 1.13137"), "{err}");
    assert!(err.contains("rescale the weights by 1/1.13137"), "{err}");
}

#[test]
fn asymptote_commands_and_their_preconditions() {
    let ws = Workspace::new();
    let w = ws.file("w.json", INV_SQRT2);
    let out = run_with("asymptote", &ws.file("bin.json", BINARY), &w, &["--levels", "-1:1", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    let d = recs.iter().find(|r| r["record"] == "asymptote").unwrap();
    assert_eq!(d["class"], "cnu-unilateral");
    assert_eq!(d["multiplicity"], "inf");
    assert!(d["cnu_test"].as_f64().unwrap() <= 2f64.powi(-60));
    let res = recs.iter().find(|r| r["record"] == "intertwining").unwrap();
    assert!(res["max_residual"].as_f64().unwrap() <= 1e-12);

    let out = run_with("asymptote", &ws.file("fin.json", FINITE), &ws.file("fw.json", FINITE_WEIGHTS), &[]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("StableSubtreeEmpty"));

    let out = run_with("adjoint-asymptote", &ws.file("tilde.json", TILDE), &w, &[]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("AdjointStable"));

    let out = run_with("adjoint-asymptote", &ws.file("bil.json", BILATERAL), &ws.file("one.json", ONE), &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("U_*: simple-bilateral"));
}

#[test]
fn cyclic_backward_shift_construction_and_caps() {
    let ws = Workspace::new();
    let spec = ws.file("b.json", r#"{"weights":[[],[]],"tail":1}"#);
    let out = run(&["cyclic", "--backward", spec.to_str().unwrap(), "--terms", "8", "--window", "20", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    assert_eq!(recs[0]["verdict"], "cyclic");
    assert_eq!(recs[0]["rule"], "R3");
    assert_eq!(recs.iter().filter(|r| r["record"] == "term").count(), 8);
    let v = recs.iter().find(|r| r["record"] == "verification").unwrap();
    assert_eq!(v["cyclic"], true);
    assert_eq!(v["rank"], 42);

    let out = run(&["cyclic", "--backward", spec.to_str().unwrap(), "--cap", "10"]);
    assert_eq!(out.status.code(), Some(5));
    assert!(stderr(&out).contains("DimensionCap"));

    let two_zeros = ws.file("z.json", r#"{"weights":[[1,0,1,0,1]],"tail":1}"#);
    let out = run(&["cyclic", "--backward", two_zeros.to_str().unwrap(), "--window", "10", "--json"]);
    let recs = records(&out);
    assert_eq!(recs[0]["verdict"], "non-cyclic");
    assert_eq!(recs[1]["adjusted"], 2);
}

#[test]
fn cyclic_tree_verdict_carries_rule_and_anchor() {
    let ws = Workspace::new();
    let out = run_with("cyclic", &ws.file("bin.json", BINARY), &ws.file("w.json", INV_SQRT2), &["--json"]);
    let recs = records(&out);
    let v = recs.iter().find(|r| r["record"] == "verdict").unwrap();
    assert_eq!(v["verdict"], "non-cyclic");
    assert_eq!(v["rule"], "R2");

    let comb = ws.file("comb.json", r#"{"family":"comb","params":{"primed_leaf":2,"unprimed_leaf":4}}"#);
    let out = run_with("cyclic", &comb, &ws.file("h.json", r#"{"kind":"constant","value":0.5}"#), &[]);
    assert!(stdout(&out).contains("verdict: cyclic by R4 (Thm 6.2)"), "{}", stdout(&out));
}

#[test]
fn similarity_witnesses_and_shape_errors() {
    let ws = Workspace::new();
    let half = ws.file("h.json", r#"{"kind":"constant","value":0.5}"#);
    let comb = ws.file("comb.json", r#"{"family":"comb","params":{"primed_leaf":2,"unprimed_leaf":4}}"#);
    let out = run_with("similarity", &comb, &half, &["--levels", "-2:4", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    let w = &recs[0];
    assert_eq!(w["construction"], "leaf-similarity");
    assert_eq!(w["invertibility"]["mode"], "similar");
    assert!(w["residual"].as_f64().unwrap() <= 1e-12);
    assert_eq!(recs[1]["shift_rank"], recs[1]["target_rank"]);

    let out = run_with("similarity", &ws.file("tilde.json", TILDE), &half, &["--levels", "-2:4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("tilde-quasiaffinity"));

    let out = run_with("similarity", &ws.file("bil.json", BILATERAL), &half, &[]);
    assert_eq!(out.status.code(), Some(6));
    assert!(stderr(&out).contains("ShapeMismatch"));
}

#[test]
fn oracle_agrees_with_dense_truncation() {
    let ws = Workspace::new();
    let out = run_with("oracle", &ws.file("fin.json", FINITE), &ws.file("fw.json", FINITE_WEIGHTS), &["--json"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    assert_eq!(recs[0]["agree"], true);
    assert_eq!(recs[1]["cokernel"], 2);

    let out = run_with("oracle", &ws.file("tilde.json", TILDE), &ws.file("w.json", INV_SQRT2), &["--powers", "6"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn json_output_is_line_delimited_and_reproducible() {
    let ws = Workspace::new();
    let (t, w) = (ws.file("tilde.json", TILDE), ws.file("w.json", RAYS));
    let first = run_with("analyze", &t, &w, &["--json"]);
    let second = run_with("analyze", &t, &w, &["--json"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert_eq!(first.stdout, second.stdout);
    for r in records(&first) {
        assert!(r.is_object() && r["record"].is_string());
    }
}

#[test]
fn bad_arguments_exit_1() {
    let ws = Workspace::new();
    let out = run_with("analyze", &ws.file("t.json", TILDE), &ws.file("w.json", ONE), &["--levels", "3:1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run_with("analyze", &ws.file("t.json", TILDE), &ws.file("w.json", ONE), &["--tol", "-1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["analyze", "--tree", "/nonexistent.json", "--weights", "/nonexistent.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("cannot read"));
}
