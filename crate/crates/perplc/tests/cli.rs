//! Black-box tests of the `perplc` binary: exit codes, JSON output shapes,
//! and the bundled corpus runner.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn perplc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_perplc"))
}

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

fn write_tmp(name: &str, source: &str) -> PathBuf {
    let p = std::env::temp_dir().join(format!("perplc-cli-{name}.ppl"));
    std::fs::write(&p, source).unwrap();
    p
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn solve_succeeds_with_exit_zero() {
    let out = perplc()
        .args(["solve", "--json"])
        .arg(corpus("flip.ppl"))
        .output()
        .unwrap();
    let v = stdout_json(&out);
    let support = v["support"].as_array().expect("support array");
    assert_eq!(support.len(), 2);
    for entry in support {
        assert!(entry["value"].is_string());
        assert!(entry["weight"].is_number());
    }
    assert!(v["report"]["converged"].as_bool().unwrap());
    assert!(v["report"]["sccs"].is_array());
}

#[test]
fn solve_reports_infinite_weight_as_string() {
    let out = perplc()
        .args(["solve", "--exact", "--json"])
        .arg(corpus("diverge.ppl"))
        .output()
        .unwrap();
    let v = stdout_json(&out);
    assert_eq!(v["support"][0]["weight"], serde_json::json!("inf"));
}

#[test]
fn type_errors_exit_one() {
    let p = write_tmp(
        "double-use",
        "let f = \\x: Bool. x in (f true, f true)\n",
    );
    let out = perplc().arg("check").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("f"), "diagnostic should name the binding: {err}");
}

#[test]
fn check_prints_main_type() {
    let out = perplc().arg("check").arg(corpus("flip.ppl")).output().unwrap();
    assert!(out.status.success());
    let s = String::from_utf8_lossy(&out.stdout);
    assert!(s.starts_with("ok: main : "), "got {s}");
}

#[test]
fn linear_mode_is_stricter() {
    let p = write_tmp("drop-fn", "\\k: Bool -> Bool. true\n");
    assert!(perplc().arg("check").arg(&p).output().unwrap().status.success());
    let out = perplc().args(["check", "--linear"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn stuck_transformation_exits_two() {
    // Addition on unary naturals, with the result fed back in as the first
    // argument so both argument positions share one type occurrence. Its fold
    // site captures the recursive call and its unfold site has the other
    // addend free, so neither transformation applies to Nat.
    let p = write_tmp(
        "nat-add",
        "data Nat = Zero | Succ Nat\n\
         define add (m: Nat) (n: Nat) : Nat =\n\
           case m of Zero => n | Succ mm => Succ (add mm n);\n\
         add (add (Succ Zero) (Succ Zero)) (Succ Zero)\n",
    );
    let out = perplc().arg("transform").arg(&p).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn variable_budget_exits_three() {
    let out = perplc()
        .args(["mspe", "--max-vars", "2"])
        .arg(corpus("cfg.ppl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn transform_lists_elimination_sequence() {
    let out = perplc().arg("transform").arg(corpus("pda.ppl")).output().unwrap();
    assert!(out.status.success());
    let s = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines, ["String: D", "Stack: R"], "got {s}");
}

#[test]
fn mspe_json_shape() {
    let out = perplc()
        .args(["mspe", "--json"])
        .arg(corpus("pcfg_unit.ppl"))
        .output()
        .unwrap();
    let v = stdout_json(&out);
    let vars = v["vars"].as_array().expect("vars");
    let eqs = v["eqs"].as_array().expect("eqs");
    assert_eq!(vars.len(), eqs.len());
    assert!(!v["roots"].as_array().expect("roots").is_empty());
    for eq in eqs {
        for m in eq["monomials"].as_array().unwrap() {
            assert!(m["coef"].is_string());
            assert!(m["vars"].is_array());
        }
    }
}

#[test]
fn oracle_reports_bounds_and_residual() {
    let out = perplc()
        .args(["oracle", "--steps", "30"])
        .arg(corpus("fair.ppl"))
        .output()
        .unwrap();
    let v = stdout_json(&out);
    let mut total = 0.0;
    for entry in v["support"].as_array().expect("support") {
        total += entry["weight"].as_f64().unwrap();
        assert!(entry["weight_exact"].is_string());
    }
    let residual = v["residual"].as_f64().expect("residual");
    assert!(total <= 1.0 + 1e-12 && residual >= 0.0, "total {total}, residual {residual}");
}

#[test]
fn corpus_runner_passes() {
    let out = perplc().args(["test-corpus", "--json"]).output().unwrap();
    let v = stdout_json(&out);
    assert_eq!(v["pass"], serde_json::json!(true), "corpus results: {v}");
    assert_eq!(v["entries"].as_array().unwrap().len(), 8);
}
