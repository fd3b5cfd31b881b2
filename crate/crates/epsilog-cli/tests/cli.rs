//! End-to-end runs of the installed binary: exit codes, JSON reports, and
//! the file formats for proofs, variable-conditions, choice-conditions, and
//! structures.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epsilog"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn vc_check_accepts_two_n_cycles() {
    let dir = TempDir::new().unwrap();
    let vc = write(
        dir.path(),
        "henkin.vc",
        "p !x_0 ?y_1\np !y_0 ?x_1\nn ?y_1 !y_0\nn ?x_1 !x_0\n",
    );
    let out = run(&["vc-check", &vc]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["command"], "vc-check");
    assert_eq!(v["consistent"], true);
    assert_eq!(v["vc"]["p"].as_array().unwrap().len(), 2);
    assert_eq!(v["vc"]["n"].as_array().unwrap().len(), 2);
}

#[test]
fn vc_check_rejects_single_n_cycle_and_names_the_edge() {
    let dir = TempDir::new().unwrap();
    let vc = write(dir.path(), "bad.vc", "p !x_0 ?y\nn ?y !x_0\n");
    let out = run(&["vc-check", &vc, "--emit-dot"]);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["consistent"], false);
    assert!(v["dot"].as_str().unwrap().contains("digraph"));
    let err = stderr(&out);
    assert!(err.contains("N edge (?y, !x_0)"), "stderr: {err}");
}

#[test]
fn check_reports_the_barred_substitution_step() {
    let dir = TempDir::new().unwrap();
    let proof = write(
        dir.path(),
        "example2_1.proof",
        "problem ex y. all x. (y = x)\n\
         gamma 0 0 ?y\n\
         delta- 0 0\n\
         subst ?y := !x_0\n",
    );
    let out = run(&["check", &proof]);
    assert_eq!(code(&out), 1, "stderr: {}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["success"], false);
    assert_eq!(v["steps_applied"], 2);
    assert_eq!(v["failure"]["step"], 2);
    assert_eq!(v["failure"]["text"], "subst ?y := !x_0");
    assert!(v["failure"]["cause"]
        .as_str()
        .unwrap()
        .contains("(P,N)-substitution"));
    let err = stderr(&out);
    assert!(err.contains("N edge (?y, !x_0)"), "stderr: {err}");
}

#[test]
fn check_closes_a_tautology() {
    let dir = TempDir::new().unwrap();
    let proof = write(
        dir.path(),
        "taut.proof",
        "# implication decomposes to a complementary pair\n\
         problem P(C) -> P(C)\n\
         alpha 0 0\n\
         close 0\n",
    );
    let out = run(&["check", &proof]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["success"], true);
    assert_eq!(v["steps_applied"], 2);
    assert_eq!(v["open_goals"].as_array().unwrap().len(), 0);
}

#[test]
fn qelim_reports_the_growth_table() {
    let out = run(&[
        "qelim",
        "--formula",
        "ex w. all x. ex y. all z. P(w, x, y, z)",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["depth"], 15);
    assert_eq!(v["binders"], 1805);
    let subterms = v["subterms"].as_array().unwrap();
    assert_eq!(subterms.len(), 4);
    assert_eq!(subterms[0]["name"], "w");
    assert_eq!(subterms[0]["depth"], 8);
    assert_eq!(subterms[0]["binders"], 42);
    assert_eq!(subterms[3]["name"], "z");
    assert_eq!(subterms[3]["depth"], 15);
    assert_eq!(subterms[3]["binders"], 903);
}

#[test]
fn validity_depends_on_the_variable_condition() {
    let dir = TempDir::new().unwrap();
    let structures = write(dir.path(), "s.json", r#"[{"universe": [0, 1]}]"#);
    let out = run(&["validity", "--formula", "?x = !y", "--structures", &structures]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(stdout_json(&out)["valid"], true);

    let vc = write(dir.path(), "barred.vc", "n ?x !y\n");
    let out = run(&[
        "validity",
        "--formula",
        "?x = !y",
        "--structures",
        &structures,
        "--vc",
        &vc,
    ]);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["valid"], false);
    assert_eq!(v["structures"][0]["valid"], false);
    assert!(stderr(&out).contains("not valid in 1 of 1"));
}

#[test]
fn validity_refuses_oversized_universes() {
    let dir = TempDir::new().unwrap();
    let structures = write(dir.path(), "big.json", r#"[{"universe": [0, 1, 2, 3]}]"#);
    let out = run(&["validity", "--formula", "?x = ?x", "--structures", &structures]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--max-universe"), "stderr: {}", stderr(&out));
}

#[test]
fn eliminate_shares_and_reconstruct_round_trips() {
    let dir = TempDir::new().unwrap();
    let out = run(&["eliminate", "--formula", "P(eps x. P(x)) & P(eps y. P(y))"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["formulas"][0], "P(?x_0) & P(?x_0)");
    assert_eq!(v["cc_dump"], "?x_0 := eps x. P(x)\n");
    assert_eq!(v["cc"].as_array().unwrap().len(), 1);

    let cc = write(dir.path(), "cc.txt", v["cc_dump"].as_str().unwrap());
    let out = run(&["reconstruct", "--formula", "P(?x_0) & P(?x_0)", "--cc", &cc]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["formulas"][0], "P(eps x. P(x)) & P(eps x. P(x))");
}

#[test]
fn eliminate_fresh_keeps_occurrences_apart() {
    let out = run(&[
        "eliminate",
        "--fresh",
        "--formula",
        "P(eps x. P(x)) & P(eps y. P(y))",
    ]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["formulas"][0], "P(?x_0) & P(?y_1)");
    assert_eq!(v["cc"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_inputs_exit_two() {
    let dir = TempDir::new().unwrap();

    let out = run(&["qelim", "--formula", "P("]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).starts_with("error:"), "stderr: {}", stderr(&out));

    let out = run(&["vc-check", dir.path().join("missing.vc").to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let proof = write(dir.path(), "bad.proof", "problem P(C)\nfoo 0 0\n");
    let out = run(&["check", &proof]);
    assert_eq!(code(&out), 2);
}
