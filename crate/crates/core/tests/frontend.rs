use std::collections::BTreeSet;
use std::path::PathBuf;

use cellmorph::frontend::{self, ErrorKind, Transition};
use cellmorph::oracle::{explore, Bounds};
use cellmorph::pipeline;

fn corpus(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name);
    std::fs::read_to_string(p).expect("corpus file")
}

fn named_points(src: &str) -> BTreeSet<String> {
    let cfg = pipeline::compile(src, None).expect("compiles").cfg;
    cfg.points.iter().filter(|p| p.named).map(|p| p.name.clone()).collect()
}

fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[test]
fn loop_ij_has_the_expected_control_points() {
    assert_eq!(named_points(&corpus("loop_ij.arr")), set(&["init", "loop", "incr_i", "incr_j", "exit"]));
}

#[test]
fn selection_sort_has_the_expected_control_points() {
    let expected = set(&[
        "init", "outerloop", "read1", "loop", "read2", "test", "write1", "write2", "incr", "exit",
    ]);
    let got = named_points(&corpus("selection_sort.arr"));
    assert!(expected.is_subset(&got), "missing points: {:?}", expected.difference(&got).collect::<Vec<_>>());
}

#[test]
fn loops_become_guard_edges_in_both_directions() {
    let cfg = pipeline::compile(&corpus("loop_ij.arr"), None).unwrap().cfg;
    let lp = cfg.point_by_name("loop").unwrap();
    let guards: Vec<String> = cfg
        .out_edges(lp)
        .filter_map(|(_, e)| match &e.t {
            Transition::Guard(g) => Some(g.to_string()),
            _ => None,
        })
        .collect();
    assert_eq!(guards.len(), 2);
    assert!(guards.iter().any(|g| g.starts_with('!')));
}

#[test]
fn undeclared_identifiers_are_reported_with_a_location() {
    let err = frontend::parse("int x;\nx = y;\n").unwrap_err();
    assert_eq!(err.kind, ErrorKind::Undeclared);
    assert_eq!(err.loc.line, 2);
}

#[test]
fn sort_errors_are_reported() {
    let err = frontend::parse("int x;\nbool b;\nx = b;\n").unwrap_err();
    assert_eq!(err.kind, ErrorKind::Sort);
}

#[test]
fn syntax_errors_are_reported() {
    let err = frontend::parse("int x\nx = 1;\n").unwrap_err();
    assert_eq!(err.kind, ErrorKind::Syntax);
}

#[test]
fn normal_form_holds_on_every_edge() {
    for name in ["array_fill1.arr", "array_reverse.arr", "selection_sort.arr", "find_minimum.arr", "array_fill2.arr"] {
        let cfg = pipeline::compile(&corpus(name), None).unwrap().cfg;
        for e in &cfg.edges {
            assert!(e.t.is_normal(), "{name}: `{}` is not normal", e.t);
        }
    }
}

#[test]
fn nested_reads_are_hoisted_into_temporaries() {
    let src = "int n;\nint x;\nint a[n];\nassume(n > 2);\nx = a[a[0]] + a[1];\n";
    let cfg = pipeline::compile(src, None).unwrap().cfg;
    let reads = cfg.edges.iter().filter(|e| matches!(e.t, Transition::Read { .. })).count();
    assert_eq!(reads, 3);
    assert!(cfg.edges.iter().all(|e| e.t.is_normal()));
}

#[test]
fn dead_variables_are_killed() {
    let src = "int n;\nint j;\nj = n + 1;\nn = j;\nn = 0;\nexit:\nassert n == 0;\n";
    let cfg = pipeline::compile(src, None).unwrap().cfg;
    let kills: Vec<&Vec<String>> = cfg
        .edges
        .iter()
        .filter_map(|e| match &e.t {
            Transition::Kill(v) => Some(v),
            _ => None,
        })
        .collect();
    assert!(kills.iter().any(|v| v.contains(&"j".to_string())), "j should be killed: {kills:?}");
}

#[test]
fn programs_without_dead_variables_have_no_kills() {
    let src = "int n;\nn = n + 1;\nexit:\nassert n >= 1 || n <= 0;\n";
    let cfg = pipeline::compile(src, None).unwrap().cfg;
    assert!(cfg.edges.iter().all(|e| !matches!(e.t, Transition::Kill(_))));
}

#[test]
fn loop_ij_with_n_equal_two_exits_with_i_two_and_j_five() {
    let cfg = pipeline::compile(&corpus("loop_ij.arr"), None).unwrap().cfg;
    let reach = explore(&cfg, &Bounds { lo: 2, hi: 2, ..Bounds::default() }).unwrap();
    let exit = cfg.point_by_name("exit").unwrap();
    let finals: Vec<_> = reach.states[exit].iter().collect();
    assert_eq!(finals.len(), 1);
    assert_eq!(finals[0].scalar(&cfg, "i"), Some(cellmorph::horn::Value::Int(2)));
    assert_eq!(finals[0].scalar(&cfg, "j"), Some(cellmorph::horn::Value::Int(5)));
}

#[test]
fn hints_attach_to_labelled_points() {
    let cfg = pipeline::compile(&corpus("selection_sort.arr"), Some(&corpus("selection_sort.hints"))).unwrap().cfg;
    let hints: Vec<_> = cfg.props.iter().filter(|p| p.hint).collect();
    assert_eq!(hints.len(), 1);
    assert_eq!(cfg.points[hints[0].point].name, "outerloop");
}

#[test]
fn hints_at_unknown_labels_are_rejected() {
    let err = pipeline::compile(&corpus("array_fill1.arr"), Some("assert at nowhere i >= 0;\n"));
    assert!(err.is_err());
}
