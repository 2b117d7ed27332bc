//! Abstraction of concrete states into predicate tuples.

use std::collections::{BTreeMap, HashSet};

use crate::abstraction::Layout;
use crate::frontend::Cfg;
use crate::horn::{PredicateSig, SlotKind, Value};

use super::interp::{ArrayVal, ReachSets, State};

/// Cells of one index group chosen for a tuple.
type CellChoice = Vec<Vec<Value>>;

/// Index vectors of an array, in lexicographic order.
fn indices(a: &ArrayVal) -> Vec<Vec<Value>> {
    (0..a.size()).map(|o| a.index_at(o)).collect()
}

/// One-cell abstraction: every `(k, a[k])`.
pub fn alpha_cell1(a: &ArrayVal) -> Vec<(Vec<Value>, Value)> {
    indices(a).into_iter().map(|k| {
        let v = a.get(&k).expect("index in domain");
        (k, v)
    }).collect()
}

/// Two-cell abstraction: every `(k1, k2, a[k1], a[k2])`, restricted to
/// `k1 <= k2` when `ordered`.
pub fn alpha_cell2(a: &ArrayVal, ordered: bool) -> Vec<(Vec<Value>, Vec<Value>, Value, Value)> {
    cell_choices(a, 2, ordered)
        .into_iter()
        .map(|c| {
            let (v1, v2) = (a.get(&c[0]).expect("in domain"), a.get(&c[1]).expect("in domain"));
            (c[0].clone(), c[1].clone(), v1, v2)
        })
        .collect()
}

/// Count abstraction: `(z, #z)` for every sample in `samples`.
pub fn alpha_count(a: &ArrayVal, samples: &[Value]) -> Vec<(Value, i64)> {
    samples.iter().map(|z| (*z, a.count(z))).collect()
}

fn cell_choices(a: &ArrayVal, cells: usize, ordered: bool) -> Vec<CellChoice> {
    let idx = indices(a);
    match cells {
        0 => vec![Vec::new()],
        1 => idx.into_iter().map(|k| vec![k]).collect(),
        _ => {
            let mut out = Vec::new();
            for (i, k1) in idx.iter().enumerate() {
                for (j, k2) in idx.iter().enumerate() {
                    if !ordered || i <= j {
                        out.push(vec![k1.clone(), k2.clone()]);
                    }
                }
            }
            out
        }
    }
}

/// Samples tried for each counted array: the value range plus every value
/// held by the array in some reachable state.
pub fn count_samples(cfg: &Cfg, layout: &Layout, reach: &ReachSets, base: &[Value]) -> BTreeMap<String, Vec<Value>> {
    let mut out = BTreeMap::new();
    for c in &layout.counts {
        let ai = cfg.array_index(&c.array).expect("declared array");
        let sort = cfg.arrays[ai].sort;
        let mut vals: Vec<Value> = base.iter().filter_map(|v| v.coerce(sort)).collect();
        for set in &reach.states {
            for st in set {
                for a in st.arrays[ai].iter().chain(&st.orig[ai]) {
                    vals.extend(a.values.iter().copied());
                }
            }
        }
        vals.sort();
        vals.dedup();
        out.insert(c.array.clone(), vals);
    }
    out
}

/// Every tuple of `sig` abstracting `st`.
pub fn alpha_state(
    cfg: &Cfg,
    layout: &Layout,
    ordered: bool,
    sig: &PredicateSig,
    st: &State,
    samples: &BTreeMap<String, Vec<Value>>,
    out: &mut HashSet<Vec<Value>>,
) {
    // Groups and counts present in the signature.
    let mut groups: BTreeMap<usize, usize> = BTreeMap::new();
    let mut counted: Vec<String> = Vec::new();
    for s in &sig.slots {
        match &s.kind {
            SlotKind::CellIndex { group, cell, .. } => {
                let n = groups.entry(*group).or_insert(0);
                *n = (*n).max(cell + 1);
            }
            SlotKind::CountSample { array } => counted.push(array.clone()),
            _ => {}
        }
    }
    // Choices per component.
    let mut comps: Vec<Vec<CellChoice>> = Vec::new();
    let mut group_pos: BTreeMap<usize, usize> = BTreeMap::new();
    for (g, cells) in &groups {
        let shape = layout.groups[*g]
            .members
            .iter()
            .find_map(|m| cfg.array_index(m).and_then(|i| st.arrays[i].as_ref()));
        let Some(shape) = shape else { return };
        group_pos.insert(*g, comps.len());
        comps.push(cell_choices(shape, *cells, ordered));
    }
    let mut count_pos: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &counted {
        count_pos.insert(a, comps.len());
        comps.push(samples.get(a).map(|v| v.iter().map(|z| vec![vec![*z]]).collect()).unwrap_or_default());
    }
    if comps.iter().any(Vec::is_empty) {
        return;
    }
    let array_of = |name: &str, orig: bool| -> Option<&ArrayVal> {
        let i = cfg.array_index(name)?;
        if orig { st.orig[i].as_ref() } else { st.arrays[i].as_ref() }
    };
    let mut pos = vec![0usize; comps.len()];
    loop {
        let mut tuple = Vec::with_capacity(sig.slots.len());
        let mut ok = true;
        for s in &sig.slots {
            let v = match &s.kind {
                SlotKind::Scalar(name) => st.scalar(cfg, name),
                SlotKind::CellIndex { group, cell, dim } => {
                    let c = group_pos[group];
                    Some(comps[c][pos[c]][*cell][*dim])
                }
                SlotKind::CellValue { array, cell } => {
                    let g = layout.group_of(array).expect("array with cells");
                    let c = group_pos[&g];
                    array_of(array, false).and_then(|a| a.get(&comps[c][pos[c]][*cell]))
                }
                SlotKind::CountSample { array } => {
                    let c = count_pos[array.as_str()];
                    Some(comps[c][pos[c]][0][0])
                }
                SlotKind::Count { array } | SlotKind::OrigCount { array } => {
                    let c = count_pos[array.as_str()];
                    let z = comps[c][pos[c]][0][0];
                    let orig = matches!(s.kind, SlotKind::OrigCount { .. });
                    array_of(array, orig).map(|a| Value::Int(a.count(&z)))
                }
            };
            match v.and_then(|v| v.coerce(s.sort)) {
                Some(v) => tuple.push(v),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            out.insert(tuple);
        }
        let mut k = 0;
        loop {
            if k == pos.len() {
                return;
            }
            pos[k] += 1;
            if pos[k] < comps[k].len() {
                break;
            }
            pos[k] = 0;
            k += 1;
        }
    }
}
