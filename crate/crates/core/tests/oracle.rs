use std::path::PathBuf;

use cellmorph::abstraction::AbstractionConfig;
use cellmorph::frontend::Cfg;
use cellmorph::horn::{Sort, Value};
use cellmorph::oracle::alpha::{alpha_cell1, alpha_cell2, alpha_count};
use cellmorph::oracle::interp::{ArrayVal, Dim};
use cellmorph::oracle::{galois, mutate, Bounds, Oracle};
use cellmorph::pipeline;
use proptest::prelude::*;

fn corpus(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name);
    std::fs::read_to_string(p).expect("corpus file")
}

fn cfg(name: &str) -> Cfg {
    pipeline::compile(&corpus(name), None).expect("compiles").cfg
}

fn small() -> Bounds {
    Bounds { max_len: 3, lo: 0, hi: 3, ..Bounds::default() }
}

fn array(values: &[i64]) -> ArrayVal {
    ArrayVal {
        dims: vec![Dim { lo: 0, len: values.len() }],
        index_sorts: vec![Sort::Int],
        values: values.iter().map(|v| Value::Int(*v)).collect(),
    }
}

#[test]
fn one_cell_abstraction_lists_every_cell() {
    let a = array(&[7, 8, 7]);
    let got = alpha_cell1(&a);
    assert_eq!(
        got,
        vec![
            (vec![Value::Int(0)], Value::Int(7)),
            (vec![Value::Int(1)], Value::Int(8)),
            (vec![Value::Int(2)], Value::Int(7)),
        ]
    );
}

#[test]
fn count_abstraction_counts_samples() {
    let a = array(&[7, 8, 7]);
    let got = alpha_count(&a, &[Value::Int(7), Value::Int(9)]);
    assert_eq!(got, vec![(Value::Int(7), 2), (Value::Int(9), 0)]);
}

#[test]
fn galois_laws_hold_at_two_cells_over_bits() {
    let reports = galois::check_all(2, &[0, 1]).expect("small universe");
    assert!(!reports.is_empty());
    for r in reports {
        assert!(r.holds(), "{} fails: {:?}", r.name, r);
    }
}

#[test]
fn galois_refuses_huge_universes() {
    assert!(galois::check_all(6, &[0, 1, 2, 3]).is_err());
}

#[test]
fn correct_encodings_have_no_violations() {
    for name in ["array_fill1.arr", "array_fill1_even_odd.arr", "loop_ij.arr", "counterexample.arr"] {
        let cfg = cfg(name);
        let oracle = Oracle::new(&cfg, small()).unwrap();
        for cells in [0, 1, 2] {
            let conf = AbstractionConfig::with_cells(cells);
            let Ok(sys) = pipeline::to_horn(&cfg, &conf, false) else { continue };
            let rep = oracle.check(&sys, &conf).unwrap();
            assert_eq!(rep.violations(), 0, "{name} cells {cells}: {rep}");
        }
    }
}

#[test]
fn buggy_fill_is_a_property_failure_not_an_oracle_violation() {
    let cfg = cfg("array_fill1_bug.arr");
    let conf = AbstractionConfig::with_cells(1);
    let sys = pipeline::to_horn(&cfg, &conf, false).unwrap();
    let oracle = Oracle::new(&cfg, small()).unwrap();
    assert!(!oracle.property_failures.is_empty());
    let rep = oracle.check(&sys, &conf).unwrap();
    assert_eq!(rep.violations(), 0, "{rep}");
}

#[test]
fn every_mutation_of_fill_is_detected() {
    let cfg = cfg("array_fill1.arr");
    let conf = AbstractionConfig::with_cells(1);
    let sys = pipeline::to_horn(&cfg, &conf, false).unwrap();
    let oracle = Oracle::new(&cfg, small()).unwrap();
    let mut detected = 0;
    let muts = mutate::mutations(&sys);
    for m in &muts {
        let rep = oracle.check(&mutate::apply(&sys, m), &conf).unwrap();
        if rep.violations() > 0 {
            detected += 1;
        }
    }
    // Fill is small enough that every mutation changes a reachable table.
    assert_eq!(detected, muts.len());
}

#[test]
fn empty_length_bound_is_vacuous() {
    let cfg = cfg("array_fill1.arr");
    let conf = AbstractionConfig::with_cells(1);
    let sys = pipeline::to_horn(&cfg, &conf, false).unwrap();
    let rep = Oracle::new(&cfg, Bounds { max_len: 0, ..small() }).unwrap().check(&sys, &conf).unwrap();
    assert_eq!(rep.violations(), 0);
}

proptest! {
    #[test]
    fn one_cell_table_has_one_entry_per_cell(values in prop::collection::vec(-3i64..4, 0..6)) {
        let a = array(&values);
        let t = alpha_cell1(&a);
        prop_assert_eq!(t.len(), values.len());
        for (k, v) in t {
            prop_assert_eq!(a.get(&k), Some(v));
        }
    }

    #[test]
    fn ordered_pairs_are_a_triangle(values in prop::collection::vec(-3i64..4, 0..6)) {
        let n = values.len();
        let a = array(&values);
        prop_assert_eq!(alpha_cell2(&a, true).len(), n * (n + 1) / 2);
        prop_assert_eq!(alpha_cell2(&a, false).len(), n * n);
    }

    #[test]
    fn counts_sum_to_length_over_all_held_values(values in prop::collection::vec(0i64..3, 0..6)) {
        let a = array(&values);
        let samples: Vec<Value> = (0..3).map(Value::Int).collect();
        let total: i64 = alpha_count(&a, &samples).iter().map(|(_, c)| c).sum();
        prop_assert_eq!(total as usize, values.len());
    }
}
