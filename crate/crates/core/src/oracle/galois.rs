//! Exhaustive checks of the Galois laws of the cell and count abstractions
//! on small array universes.

use std::collections::BTreeSet;

use crate::horn::{Sort, Value};

use super::alpha::{alpha_cell1, alpha_cell2, alpha_count};
use super::interp::{ArrayVal, Dim};

/// Result of checking one abstraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaloisReport {
    pub name: &'static str,
    /// Concrete sets enumerated.
    pub concrete_sets: usize,
    /// Abstract sets enumerated.
    pub abstract_sets: usize,
    /// `alpha(gamma(T)) ⊆ T` for every abstract set `T`.
    pub reductive: bool,
    /// `S ⊆ gamma(alpha(S))` for every concrete set `S`.
    pub extensive: bool,
}

impl GaloisReport {
    pub fn holds(&self) -> bool {
        self.reductive && self.extensive
    }
}

#[derive(Debug, thiserror::Error)]
#[error("universe too large for exhaustive enumeration: {0} elements")]
pub struct TooLarge(pub usize);

/// All arrays of length `n` over `values`.
pub fn universe(n: usize, values: &[i64]) -> Vec<ArrayVal> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p: Vec<Value>| {
                values.iter().map(move |v| {
                    let mut p = p.clone();
                    p.push(Value::Int(*v));
                    p
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|values| ArrayVal { dims: vec![Dim { lo: 0, len: n }], index_sorts: vec![Sort::Int], values })
        .collect()
}

type Tuple = Vec<Value>;

fn subsets<T: Clone>(items: &[T]) -> impl Iterator<Item = Vec<T>> + '_ {
    (0u64..(1u64 << items.len())).map(move |mask| {
        items.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| x.clone()).collect()
    })
}

/// Checks both laws for `alpha` over the given concrete and abstract
/// universes. `alpha` maps one array to its tuples; sets are joined.
pub fn check_laws(
    name: &'static str,
    concrete: &[ArrayVal],
    abstract_universe: &[Tuple],
    alpha: &dyn Fn(&ArrayVal) -> BTreeSet<Tuple>,
) -> Result<GaloisReport, TooLarge> {
    if concrete.len() > 20 {
        return Err(TooLarge(concrete.len()));
    }
    if abstract_universe.len() > 20 {
        return Err(TooLarge(abstract_universe.len()));
    }
    let single: Vec<BTreeSet<Tuple>> = concrete.iter().map(alpha).collect();
    let alpha_set = |s: &[usize]| -> BTreeSet<Tuple> { s.iter().flat_map(|i| single[*i].iter().cloned()).collect() };
    let gamma = |t: &BTreeSet<Tuple>| -> Vec<usize> {
        (0..concrete.len()).filter(|i| single[*i].is_subset(t)).collect()
    };
    let ids: Vec<usize> = (0..concrete.len()).collect();
    let mut extensive = true;
    let mut concrete_sets = 0;
    for s in subsets(&ids) {
        concrete_sets += 1;
        let back = gamma(&alpha_set(&s));
        extensive &= s.iter().all(|i| back.contains(i));
    }
    let mut reductive = true;
    let mut abstract_sets = 0;
    for t in subsets(abstract_universe) {
        abstract_sets += 1;
        let t: BTreeSet<Tuple> = t.into_iter().collect();
        reductive &= alpha_set(&gamma(&t)).is_subset(&t);
    }
    Ok(GaloisReport { name, concrete_sets, abstract_sets, reductive, extensive })
}

/// Checks the one-cell, ordered and unordered two-cell and count
/// abstractions on arrays of length `n` over `values`.
pub fn check_all(n: usize, values: &[i64]) -> Result<Vec<GaloisReport>, TooLarge> {
    let conc = universe(n, values);
    let vals: Vec<Value> = values.iter().map(|v| Value::Int(*v)).collect();
    let idx: Vec<Value> = (0..n as i64).map(Value::Int).collect();
    let mut out = Vec::new();

    let u1: Vec<Tuple> = idx.iter().flat_map(|k| vals.iter().map(move |v| vec![*k, *v])).collect();
    out.push(check_laws("cell1", &conc, &u1, &|a| {
        alpha_cell1(a).into_iter().map(|(k, v)| vec![k[0], v]).collect()
    })?);

    for (name, ordered) in [("cell2-ordered", true), ("cell2-unordered", false)] {
        let mut u2 = Vec::new();
        for k1 in &idx {
            for k2 in &idx {
                if ordered && k1 > k2 {
                    continue;
                }
                for v1 in &vals {
                    for v2 in &vals {
                        u2.push(vec![*k1, *k2, *v1, *v2]);
                    }
                }
            }
        }
        out.push(check_laws(name, &conc, &u2, &|a| {
            alpha_cell2(a, ordered).into_iter().map(|(k1, k2, v1, v2)| vec![k1[0], k2[0], v1, v2]).collect()
        })?);
    }

    let uc: Vec<Tuple> =
        vals.iter().flat_map(|z| (0..=n as i64).map(move |c| vec![*z, Value::Int(c)])).collect();
    out.push(check_laws("count", &conc, &uc, &|a| {
        alpha_count(a, &vals).into_iter().map(|(z, c)| vec![z, Value::Int(c)]).collect()
    })?);
    Ok(out)
}
