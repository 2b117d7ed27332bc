use std::path::PathBuf;

use cellmorph::abstraction::{AbstractionConfig, MultisetMode};
use cellmorph::horn::{emit_smtlib, Head, HornSystem, SlotKind};
use cellmorph::pipeline::{self, PipelineError};

fn corpus(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name);
    std::fs::read_to_string(p).expect("corpus file")
}

fn encode(name: &str, conf: &AbstractionConfig) -> Result<HornSystem, PipelineError> {
    let cfg = pipeline::compile(&corpus(name), None).expect("compiles").cfg;
    pipeline::to_horn(&cfg, conf, false)
}

fn cells(n: usize) -> AbstractionConfig {
    AbstractionConfig::with_cells(n)
}

#[test]
fn fill_with_one_cell_matches_the_textbook_shape() {
    let sys = encode("array_fill1.arr", &cells(1)).unwrap();
    let names: Vec<&str> = sys.preds.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names, ["loop", "write", "incr", "end"]);
    for p in &sys.preds {
        let cell_slots = p.slots.iter().filter(|s| matches!(s.kind, SlotKind::CellIndex { .. })).count();
        assert_eq!(cell_slots, 1, "{} has one cell", p.name);
    }
    let queries = sys.clauses.iter().filter(|c| matches!(c.head, Head::Goal(_))).count();
    assert_eq!(queries, 1);
    assert_eq!(sys.clauses.len(), 7);
    let write_rules: Vec<&str> = sys
        .clauses
        .iter()
        .flat_map(|c| c.origin.rules.iter().map(String::as_str))
        .filter(|r| r.starts_with("write1"))
        .collect();
    assert_eq!(write_rules, ["write1-other", "write1-same"]);
}

#[test]
fn zero_cells_give_an_array_free_skeleton() {
    let sys = encode("array_fill1.arr", &cells(0)).unwrap();
    for p in &sys.preds {
        assert!(p.slots.iter().all(|s| matches!(s.kind, SlotKind::Scalar(_))), "{} has array slots", p.name);
    }
    let q = sys.clauses.iter().find(|c| matches!(c.head, Head::Goal(_))).unwrap();
    assert_eq!(q.origin.rules, ["query-unknown"]);
}

#[test]
fn two_cells_on_selection_sort_track_pairs() {
    let sys = encode("selection_sort.arr", &cells(2)).unwrap();
    let lp = sys.pred("loop").unwrap();
    let idx = lp.slots.iter().filter(|s| matches!(s.kind, SlotKind::CellIndex { .. })).count();
    let vals = lp.slots.iter().filter(|s| matches!(s.kind, SlotKind::CellValue { .. })).count();
    assert_eq!((idx, vals), (2, 2));
    let rules: Vec<&str> = sys.clauses.iter().flat_map(|c| c.origin.rules.iter().map(String::as_str)).collect();
    for r in ["read2-below", "read2-above", "read2-first", "read2-second", "write2-both", "init2-diagonal"] {
        assert!(rules.contains(&r), "missing {r}");
    }
}

#[test]
fn one_cell_cannot_express_sortedness() {
    let sys = encode("selection_sort.arr", &cells(1)).unwrap();
    assert!(sys.clauses.iter().any(|c| c.origin.rules == ["query-unknown"]));
}

#[test]
fn weakened_reads_never_join_two_copies() {
    let conf = AbstractionConfig { weakened_read: true, ..cells(1) };
    let sys = encode("find_minimum.arr", &conf).unwrap();
    for c in &sys.clauses {
        assert!(c.body.len() <= 1, "clause {:?} has {} body atoms", c.origin, c.body.len());
    }
    let full = encode("find_minimum.arr", &cells(1)).unwrap();
    assert!(full.clauses.iter().any(|c| c.body.len() == 2));
}

#[test]
fn counts_need_multiset_tracking() {
    assert!(matches!(encode("selection_sort_perm.arr", &cells(1)), Err(PipelineError::Encode(_))));
    let conf = AbstractionConfig { multiset: MultisetMode::TrackOrig, ..cells(1) };
    let sys = encode("selection_sort_perm.arr", &conf).unwrap();
    let lp = sys.pred("loop").unwrap();
    assert!(lp.slots.iter().any(|s| matches!(s.kind, SlotKind::Count { .. })));
    assert!(lp.slots.iter().any(|s| matches!(s.kind, SlotKind::CountSample { .. })));
}

#[test]
fn shared_index_merges_cells_of_equal_domains() {
    let conf = AbstractionConfig { shared_index: true, ..cells(2) };
    let shared = encode("array_reverse.arr", &conf).unwrap();
    let separate = encode("array_reverse.arr", &cells(2)).unwrap();
    let count = |s: &HornSystem| {
        s.pred("loop").unwrap().slots.iter().filter(|x| matches!(x.kind, SlotKind::CellIndex { .. })).count()
    };
    assert_eq!(count(&shared), 2);
    assert_eq!(count(&separate), 4);
}

#[test]
fn simplification_shrinks_without_changing_queries() {
    let cfg = pipeline::compile(&corpus("array_reverse.arr"), None).unwrap().cfg;
    let raw = pipeline::to_horn(&cfg, &cells(1), true).unwrap();
    let simple = pipeline::to_horn(&cfg, &cells(1), false).unwrap();
    assert!(simple.clauses.len() < raw.clauses.len());
    assert_eq!(raw.queries().count(), simple.queries().count());
}

#[test]
fn emission_is_deterministic() {
    for name in ["array_fill1.arr", "selection_sort.arr", "array_reverse.arr", "real_indexed_map.arr"] {
        let a = emit_smtlib(&encode(name, &cells(2)).unwrap());
        let b = emit_smtlib(&encode(name, &cells(2)).unwrap());
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn empty_system_emits_header_only() {
    let text = emit_smtlib(&HornSystem::default());
    assert!(text.starts_with("(set-logic HORN)"));
    assert!(!text.contains("declare-fun"));
    assert!(!text.contains("assert"));
}

#[test]
fn emitted_text_is_balanced_and_declares_every_predicate() {
    let sys = encode("array_fill2.arr", &cells(1)).unwrap();
    let text = emit_smtlib(&sys);
    let mut depth = 0i64;
    for ch in text.lines().filter(|l| !l.starts_with(';')).flat_map(str::chars) {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        assert!(depth >= 0);
    }
    assert_eq!(depth, 0);
    for p in &sys.preds {
        assert!(text.contains(&format!("(declare-fun {} ", p.name)), "{} not declared", p.name);
    }
}

#[test]
fn invalid_configurations_are_rejected() {
    assert!(matches!(encode("array_fill1.arr", &cells(3)), Err(PipelineError::Encode(_))));
}
