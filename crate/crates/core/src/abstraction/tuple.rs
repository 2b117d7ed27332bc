//! Symbolic tuples over predicate slots and a clause builder.

use std::collections::{BTreeMap, BTreeSet};

use crate::horn::{Atom, ClauseKind, Head, HornClause, PredicateSig, Provenance, SlotKind, Sort, Term};

/// One distinguished cell: its index and the value of each member array.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: Vec<Term>,
    pub values: BTreeMap<String, Term>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountCell {
    pub z: Term,
    pub count: Term,
    pub orig: Option<Term>,
}

/// Terms for every slot of a predicate, organised by meaning.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tuple {
    pub scalars: BTreeMap<String, Term>,
    pub groups: BTreeMap<usize, Vec<Cell>>,
    pub counts: BTreeMap<String, CountCell>,
}

impl Tuple {
    pub fn cell(&self, group: usize, cell: usize) -> &Cell {
        &self.groups[&group][cell]
    }

    pub fn cell_mut(&mut self, group: usize, cell: usize) -> &mut Cell {
        &mut self.groups.get_mut(&group).expect("group present")[cell]
    }

    /// Copy with the index of one cell replaced.
    pub fn with_index(&self, group: usize, cell: usize, index: &[Term]) -> Tuple {
        let mut t = self.clone();
        t.cell_mut(group, cell).index = index.to_vec();
        t
    }

    /// Copy with one cell replaced wholesale.
    pub fn with_cell(&self, group: usize, cell: usize, c: Cell) -> Tuple {
        let mut t = self.clone();
        *t.cell_mut(group, cell) = c;
        t
    }

    pub fn with_value(&self, group: usize, cell: usize, array: &str, v: Term) -> Tuple {
        let mut t = self.clone();
        t.cell_mut(group, cell).values.insert(array.to_string(), v);
        t
    }

    pub fn atom(&self, sig: &PredicateSig) -> Atom {
        let args = sig
            .slots
            .iter()
            .map(|s| match &s.kind {
                SlotKind::Scalar(v) => self.scalars[v].clone(),
                SlotKind::CellIndex { group, cell, dim } => self.cell(*group, *cell).index[*dim].clone(),
                SlotKind::CellValue { array, cell } => {
                    self.cell(group_of_value(sig, array), *cell).values[array].clone()
                }
                SlotKind::CountSample { array } => self.counts[array].z.clone(),
                SlotKind::Count { array } => self.counts[array].count.clone(),
                SlotKind::OrigCount { array } => {
                    self.counts[array].orig.clone().expect("original count present")
                }
            })
            .collect();
        Atom::new(sig.name.clone(), args)
    }

    /// Keeps only the parts that exist in `sig`; scalars missing from `self`
    /// must be supplied by the caller beforehand.
    pub fn project(&self, sig: &PredicateSig) -> Tuple {
        let mut t = Tuple::default();
        for s in &sig.slots {
            match &s.kind {
                SlotKind::Scalar(v) => {
                    t.scalars.insert(v.clone(), self.scalars[v].clone());
                }
                SlotKind::CellIndex { group, .. } => {
                    t.groups.entry(*group).or_insert_with(|| {
                        self.groups[group]
                            .iter()
                            .map(|c| Cell { index: c.index.clone(), values: BTreeMap::new() })
                            .collect()
                    });
                }
                SlotKind::CellValue { array, cell } => {
                    let g = group_of_value(sig, array);
                    let v = self.cell(g, *cell).values[array].clone();
                    t.cell_mut(g, *cell).values.insert(array.clone(), v);
                }
                SlotKind::CountSample { array } => {
                    t.counts.insert(array.clone(), self.counts[array].clone());
                }
                SlotKind::Count { .. } | SlotKind::OrigCount { .. } => {}
            }
        }
        t
    }
}

/// Allocates clause universals with unique names.
#[derive(Debug, Clone, Default)]
pub struct ClauseBuilder {
    vars: Vec<(String, Sort)>,
    taken: BTreeSet<String>,
}

impl ClauseBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self, base: &str, sort: Sort) -> Term {
        let mut name = base.to_string();
        let mut n = 1;
        while self.taken.contains(&name) {
            n += 1;
            name = format!("{base}!{n}");
        }
        self.taken.insert(name.clone());
        self.vars.push((name.clone(), sort));
        Term::Var(name)
    }

    /// A tuple of fresh variables for every slot of `sig`.
    pub fn tuple(&mut self, sig: &PredicateSig) -> Tuple {
        let mut t = Tuple::default();
        for s in &sig.slots {
            let v = self.fresh(&s.name, s.sort);
            match &s.kind {
                SlotKind::Scalar(name) => {
                    t.scalars.insert(name.clone(), v);
                }
                SlotKind::CellIndex { group, cell, dim } => {
                    let cells = t.groups.entry(*group).or_default();
                    while cells.len() <= *cell {
                        cells.push(Cell { index: Vec::new(), values: BTreeMap::new() });
                    }
                    let idx = &mut cells[*cell].index;
                    while idx.len() <= *dim {
                        idx.push(Term::Int(0));
                    }
                    idx[*dim] = v;
                }
                SlotKind::CellValue { array, cell } => {
                    let g = group_of_value(sig, array);
                    t.groups.get_mut(&g).expect("index slots precede values")[*cell]
                        .values
                        .insert(array.clone(), v);
                }
                SlotKind::CountSample { array } => {
                    t.counts.insert(array.clone(), CountCell { z: v, count: Term::Int(0), orig: None });
                }
                SlotKind::Count { array } => {
                    t.counts.get_mut(array).expect("sample precedes count").count = v;
                }
                SlotKind::OrigCount { array } => {
                    t.counts.get_mut(array).expect("sample precedes count").orig = Some(v);
                }
            }
        }
        t
    }

    pub fn finish(
        self,
        body: Vec<Atom>,
        constraint: Term,
        head: Head,
        kind: ClauseKind,
        origin: Provenance,
    ) -> HornClause {
        let mut c = HornClause { vars: self.vars, body, constraint, head, kind, origin };
        c.prune_vars();
        c
    }
}

/// The group whose slots immediately precede the value slots of `array`.
pub fn group_of_value(sig: &PredicateSig, array: &str) -> usize {
    let mut current = None;
    for s in &sig.slots {
        match &s.kind {
            SlotKind::CellIndex { group, .. } => current = Some(*group),
            SlotKind::CellValue { array: a, .. } if a == array => {
                return current.expect("index slots precede values")
            }
            _ => {}
        }
    }
    panic!("array `{array}` has no value slot in `{}`", sig.name)
}
