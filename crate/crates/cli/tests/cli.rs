use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellmorph")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn has_z3() -> bool {
    Command::new("z3").arg("--version").output().map(|o| o.status.success()).unwrap_or(false)
}

#[test]
fn emit_prints_a_horn_system() {
    let o = run(&["emit", corpus("array_fill1.arr").to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("(set-logic HORN)"));
    assert!(text.contains("(declare-fun loop "));
}

#[test]
fn emit_writes_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fill.smt2");
    let o = run(&["emit", corpus("array_fill1.arr").to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.contains("(check-sat)"));
}

#[test]
fn zero_cells_emit_an_array_free_skeleton() {
    let o = run(&["emit", corpus("array_fill1.arr").to_str().unwrap(), "--cells", "0"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("query-unknown"));
    assert!(text.contains("(declare-fun loop (Int Int) Bool)"));
}

#[test]
fn emit_is_byte_identical_across_runs() {
    let args = ["emit", corpus("selection_sort.arr").to_str().unwrap(), "--cells", "2"].map(String::from);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn oracle_passes_on_fill() {
    let o = run(&["check-oracle", corpus("array_fill1.arr").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn oracle_with_empty_arrays_is_a_vacuous_pass() {
    let o = run(&["check-oracle", corpus("array_fill1.arr").to_str().unwrap(), "--bounds", "n=0,lo=0,hi=3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn oracle_detects_a_mutation() {
    let o = run(&["check-oracle", corpus("array_fill1.arr").to_str().unwrap(), "--mutate", "3"]);
    assert_ne!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn failing_hints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let hints = dir.path().join("bad.hints");
    std::fs::write(&hints, "assert at outerloop forall k: 0 <= k && k < n => a[k] == 0;\n").unwrap();
    let o = run(&["emit", corpus("selection_sort.arr").to_str().unwrap(), "--hint", hints.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bad_usage_exits_with_three() {
    assert_eq!(run(&["emit"]).status.code(), Some(3));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(3));
    let o = run(&["emit", corpus("array_fill1.arr").to_str().unwrap(), "--cells", "7"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn missing_input_file_is_a_usage_error() {
    assert_eq!(run(&["emit", "/nonexistent/prog.arr"]).status.code(), Some(3));
}

#[test]
fn cex_on_a_correct_program_finds_nothing() {
    if !has_z3() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.smt2");
    let o = run(&["cex", corpus("array_fill1.arr").to_str().unwrap(), "--depth", "4", "-o", out.to_str().unwrap()]);
    assert!(stdout(&o).contains("no counterexample at depth"), "{}", stdout(&o));
}

#[test]
fn cex_on_the_buggy_fill_finds_a_feasible_trace() {
    if !has_z3() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.smt2");
    let o = run(&["cex", corpus("array_fill1_bug.arr").to_str().unwrap(), "-o", out.to_str().unwrap()]);
    let text = stdout(&o);
    assert!(text.contains("trace formula: sat"), "{text}");
    assert!(text.contains("fails at"), "{text}");
    assert_eq!(o.status.code(), Some(1));
    assert!(out.exists());
}

#[test]
fn solve_reports_proved_and_violated() {
    if !has_z3() {
        return;
    }
    let o = run(&["solve", corpus("array_fill1.arr").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("proved"));
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.txt");
    let o = run(&["solve", corpus("array_fill1_bug.arr").to_str().unwrap(), "-o", w.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("violated"));
    assert!(w.exists());
}
