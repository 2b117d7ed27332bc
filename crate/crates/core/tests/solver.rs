//! End-to-end runs against z3; each test returns early when Spacer is absent.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Duration;

use cellmorph::abstraction::AbstractionConfig;
use cellmorph::frontend::Cfg;
use cellmorph::horn::Value;
use cellmorph::pipeline;
use cellmorph::solver::{self, refine, verify, Refinement, SatResult, SmtSession, SolverKind, Verdict, VerifyOptions};

fn corpus(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name);
    std::fs::read_to_string(p).expect("corpus file")
}

fn cfg(name: &str) -> Cfg {
    pipeline::compile(&corpus(name), None).expect("compiles").cfg
}

fn spacer() -> bool {
    let ok = solver::available(SolverKind::Spacer);
    if !ok {
        eprintln!("spacer not available; skipping");
    }
    ok
}

fn opts() -> VerifyOptions {
    VerifyOptions { timeout: Duration::from_secs(120), ..VerifyOptions::default() }
}

#[test]
fn refinement_adds_one_cell_up_to_two() {
    let arrays: BTreeSet<String> = ["a".to_string()].into();
    let one = AbstractionConfig::with_cells(1);
    let Refinement::Refined(two) = refine(&one, &arrays) else { panic!("should refine") };
    assert_eq!(two.cells_of("a"), 2);
    assert_eq!(refine(&two, &arrays), Refinement::Exhausted);
}

#[test]
fn fill_is_proved_with_one_cell() {
    if !spacer() {
        return;
    }
    let rep = verify(&cfg("array_fill1.arr"), &AbstractionConfig::with_cells(1), &opts()).unwrap();
    assert!(matches!(rep.verdict, Verdict::Proved { .. }), "{:?}", rep.verdict);
    assert_eq!(rep.refinements(), 0);
}

#[test]
fn fill_from_zero_cells_is_proved_after_refinement() {
    if !spacer() {
        return;
    }
    let rep = verify(&cfg("array_fill1.arr"), &AbstractionConfig::with_cells(0), &opts()).unwrap();
    let Verdict::Proved { conf, .. } = &rep.verdict else { panic!("{:?}", rep.verdict) };
    assert_eq!(conf.cells_of("a"), 1);
    assert_eq!(rep.refinements(), 1);
}

#[test]
fn buggy_fill_is_violated_with_a_replayed_run() {
    if !spacer() {
        return;
    }
    let cfg = cfg("array_fill1_bug.arr");
    let rep = verify(&cfg, &AbstractionConfig::with_cells(1), &opts()).unwrap();
    let Verdict::Violated { trace, .. } = &rep.verdict else { panic!("{:?}", rep.verdict) };
    let last = trace.states.last().unwrap();
    let a = last.arrays[cfg.array_index("a").unwrap()].as_ref().unwrap();
    assert!(a.values.contains(&Value::Int(42)));
    assert_eq!(trace.edges.len() + 1, trace.states.len());
}

#[test]
fn counterexample_needs_two_cells() {
    if !spacer() {
        return;
    }
    let rep = verify(&cfg("counterexample.arr"), &AbstractionConfig::with_cells(1), &opts()).unwrap();
    let Verdict::Proved { conf, .. } = &rep.verdict else { panic!("{:?}", rep.verdict) };
    assert_eq!(conf.cells_of("a"), 2);
    assert!(rep.rounds[0].tree.is_some());
}

#[test]
fn rational_map_is_proved() {
    if !spacer() {
        return;
    }
    let rep = verify(&cfg("real_indexed_map.arr"), &AbstractionConfig::with_cells(1), &opts()).unwrap();
    assert!(matches!(rep.verdict, Verdict::Proved { .. }), "{:?}", rep.verdict);
}

#[test]
fn session_reports_named_unsat_cores() {
    if !spacer() {
        return;
    }
    let z3 = solver::locate_z3().unwrap();
    let mut s = SmtSession::start(&z3, Duration::from_secs(10)).unwrap();
    s.send("(set-option :produce-unsat-cores true)").unwrap();
    s.send("(declare-const x Int)").unwrap();
    s.send("(assert (! (> x 2) :named big))").unwrap();
    s.send("(assert (! (< x 1) :named small))").unwrap();
    s.send("(assert (! (>= x (- 5)) :named spare))").unwrap();
    assert_eq!(s.check_sat().unwrap(), SatResult::Unsat);
    let mut core = s.unsat_core().unwrap();
    core.sort();
    assert_eq!(core, ["big", "small"]);
}
