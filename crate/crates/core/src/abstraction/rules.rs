//! Edge rules of the one-cell and two-cell abstractions.

use std::collections::BTreeMap;

use super::tuple::{Cell, ClauseBuilder, Tuple};
use super::{all_eq, any_ne, lex_lt, EncodeError, Encoder};
use crate::frontend::{Expr, IndexDomain};
use crate::horn::{ClauseKind, Head, HornClause, PredicateSig, Provenance, Term};

/// Which read rule to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReadCase {
    /// One cell, the read hits it.
    Same1,
    /// One cell, the read misses it.
    Other1,
    /// Ordered pair, the read misses both and lies below `k2`.
    Below2,
    /// Ordered pair, the read lies above `k2`.
    Above2,
    /// The read hits `k1` (and lies below `k2` when ordered).
    First2,
    /// The read hits `k2` (and misses `k1` when unordered).
    Second2,
    /// Unordered pair, the read misses both.
    Neither2,
}

impl ReadCase {
    fn name(self, weakened: bool) -> &'static str {
        match (self, weakened) {
            (ReadCase::Same1, _) => "read1-same",
            (ReadCase::Other1, false) => "read1-other",
            (ReadCase::Other1, true) => "read1-other-weak",
            (ReadCase::Below2, false) => "read2-below",
            (ReadCase::Below2, true) => "read2-below-weak",
            (ReadCase::Above2, false) => "read2-above",
            (ReadCase::Above2, true) => "read2-above-weak",
            (ReadCase::First2, _) => "read2-first",
            (ReadCase::Second2, _) => "read2-second",
            (ReadCase::Neither2, false) => "read2-neither",
            (ReadCase::Neither2, true) => "read2-neither-weak",
        }
    }
}

impl Encoder<'_> {
    pub(crate) fn index_terms(&self, index: &[Expr], t: &Tuple) -> Result<Vec<Term>, EncodeError> {
        index.iter().map(|i| self.scalar_term(i, t)).collect()
    }

    /// Fresh values for the members of `group` present in `t`.
    pub(crate) fn fresh_values(&self, b: &mut ClauseBuilder, t: &Tuple, group: usize) -> BTreeMap<String, Term> {
        t.cell(group, 0)
            .values
            .keys()
            .map(|m| (m.clone(), b.fresh(&format!("{m}!i"), self.array(m).sort)))
            .collect()
    }

    /// Write operands that are literals become a fresh variable bound by an
    /// equality, so that every write rule has the same shape.
    pub(crate) fn write_value(
        &self,
        b: &mut ClauseBuilder,
        array: &str,
        value: &Expr,
        t: &Tuple,
        cons: &mut Vec<Term>,
    ) -> Result<Term, EncodeError> {
        let v = self.scalar_term(value, t)?;
        if v.is_literal() {
            let x = b.fresh("v!w", self.array(array).sort);
            cons.push(Term::eq(x.clone(), v));
            Ok(x)
        } else {
            Ok(v)
        }
    }

    /// Adds bounds on the head's cells of `group` when enabled.
    fn head_bounds(&self, group: usize, h: &Tuple, cons: &mut Vec<Term>) -> Result<(), EncodeError> {
        if self.conf.include_bounds_guards && h.groups.contains_key(&group) {
            cons.push(self.bounds(group, h)?);
        }
        Ok(())
    }

    pub(crate) fn read(
        &mut self,
        id: usize,
        target: &str,
        array: &str,
        index: &[Expr],
        src: &PredicateSig,
        dst: &PredicateSig,
    ) -> Result<(), EncodeError> {
        let sort = self.array(array).sort;
        let Some(g) = self.layout.group_of(array) else {
            let mut b = ClauseBuilder::new();
            let t = b.tuple(src);
            let mut h = t.clone();
            h.scalars.insert(target.to_string(), b.fresh("v!r", sort));
            let head = h.project(dst).atom(dst);
            self.push(b, vec![t.atom(src)], Vec::new(), Head::Atom(head), ClauseKind::Rule, Self::rule_origin(id, "read0"));
            return Ok(());
        };
        let cases: &[ReadCase] = match (self.layout.groups[g].cells, self.conf.ordered) {
            (1, _) => &[ReadCase::Same1, ReadCase::Other1],
            (_, true) => &[ReadCase::Below2, ReadCase::Above2, ReadCase::First2, ReadCase::Second2],
            (_, false) => &[ReadCase::First2, ReadCase::Second2, ReadCase::Neither2],
        };
        let weak = self.conf.weakened_read;
        let ordered = self.conf.ordered;
        for &case in cases {
            let mut b = ClauseBuilder::new();
            let t = b.tuple(src);
            let i = self.index_terms(index, &t)?;
            let k = |c: usize| t.cell(g, c).index.clone();
            let mut cons = Vec::new();
            // A second copy of the invariant in which cell `c` is the read cell.
            let probe = |b: &mut ClauseBuilder, c: usize| -> (Tuple, Term) {
                let w = self.fresh_values(b, &t, g);
                let v = w[array].clone();
                (t.with_cell(g, c, Cell { index: i.clone(), values: w }), v)
            };
            let (bodies, val) = match case {
                ReadCase::Same1 | ReadCase::First2 | ReadCase::Second2 => {
                    let c = usize::from(case == ReadCase::Second2);
                    let s = t.with_index(g, c, &i);
                    match case {
                        ReadCase::First2 if ordered => cons.push(lex_lt(&i, &k(1))),
                        ReadCase::Second2 if ordered => cons.push(super::lex_le(&k(0), &i)),
                        ReadCase::Second2 => cons.push(any_ne(&k(0), &i)),
                        _ => {}
                    }
                    let v = s.cell(g, c).values[array].clone();
                    (vec![s], v)
                }
                ReadCase::Other1 | ReadCase::Below2 | ReadCase::Above2 | ReadCase::Neither2 => {
                    let c = usize::from(case == ReadCase::Above2);
                    match case {
                        ReadCase::Other1 => cons.push(any_ne(&k(0), &i)),
                        ReadCase::Below2 => {
                            cons.push(any_ne(&k(0), &i));
                            cons.push(lex_lt(&i, &k(1)));
                        }
                        ReadCase::Above2 => cons.push(lex_lt(&k(1), &i)),
                        _ => {
                            cons.push(any_ne(&k(0), &i));
                            cons.push(any_ne(&k(1), &i));
                        }
                    }
                    if weak {
                        (vec![t.clone()], b.fresh("v!r", sort))
                    } else {
                        let (s, v) = probe(&mut b, c);
                        (vec![t.clone(), s], v)
                    }
                }
            };
            let mut h = bodies[0].clone();
            h.scalars.insert(target.to_string(), val);
            let h = h.project(dst);
            self.head_bounds(g, &h, &mut cons)?;
            let body = bodies.iter().map(|x| x.atom(src)).collect();
            self.push(b, body, cons, Head::Atom(h.atom(dst)), ClauseKind::Rule, Self::rule_origin(id, case.name(weak)));
        }
        Ok(())
    }

    pub(crate) fn write(
        &mut self,
        id: usize,
        array: &str,
        index: &[Expr],
        value: &Expr,
        src: &PredicateSig,
        dst: &PredicateSig,
    ) -> Result<(), EncodeError> {
        let Some(g) = self.layout.group_of(array) else {
            let mut b = ClauseBuilder::new();
            let t = b.tuple(src);
            let head = t.project(dst).atom(dst);
            self.push(b, vec![t.atom(src)], Vec::new(), Head::Atom(head), ClauseKind::Rule, Self::rule_origin(id, "write0"));
            return Ok(());
        };
        let cells = self.layout.groups[g].cells;
        // Bit c set: the write hits cell c.
        let cases: Vec<usize> = if cells == 1 { vec![0, 1] } else { vec![0, 1, 2, 3] };
        for hits in cases {
            let mut b = ClauseBuilder::new();
            let t = b.tuple(src);
            let i = self.index_terms(index, &t)?;
            let mut cons = Vec::new();
            let v = self.write_value(&mut b, array, value, &t, &mut cons)?;
            let mut s = t.clone();
            let mut h = t.clone();
            for c in 0..cells {
                if hits & (1 << c) != 0 {
                    s = s.with_index(g, c, &i);
                    h = h.with_index(g, c, &i).with_value(g, c, array, v.clone());
                } else {
                    cons.push(any_ne(&t.cell(g, c).index, &i));
                }
            }
            let h = h.project(dst);
            self.head_bounds(g, &h, &mut cons)?;
            let name = match (cells, hits) {
                (1, 0) => "write1-other",
                (1, _) => "write1-same",
                (_, 0) => "write2-neither",
                (_, 1) => "write2-first",
                (_, 2) => "write2-second",
                _ => "write2-both",
            };
            self.push(b, vec![s.atom(src)], cons, Head::Atom(h.atom(dst)), ClauseKind::Rule, Self::rule_origin(id, name));
        }
        Ok(())
    }

    pub(crate) fn init(
        &mut self,
        id: usize,
        array: &str,
        src: &PredicateSig,
        dst: &PredicateSig,
    ) -> Result<(), EncodeError> {
        let av = self.array(array).clone();
        let group = self.layout.group_of(array);
        let mut b = ClauseBuilder::new();
        let t = b.tuple(src);
        let new_group = group.is_some_and(|g| !t.groups.contains_key(&g));
        let mut h = b.tuple(dst);
        for (k, v) in h.scalars.iter_mut() {
            *v = t.scalars[k].clone();
        }
        for (g, cells) in &t.groups {
            if let Some(hc) = h.groups.get_mut(g) {
                for (hc, tc) in hc.iter_mut().zip(cells) {
                    hc.index = tc.index.clone();
                    for (m, v) in &tc.values {
                        hc.values.insert(m.clone(), v.clone());
                    }
                }
            }
        }
        for (a, c) in &t.counts {
            h.counts.insert(a.clone(), c.clone());
        }
        let mut cons = Vec::new();
        let lit = av.init.map(|v| v.to_term());
        if let (Some(g), Some(l)) = (group, &lit) {
            for c in 0..self.layout.groups[g].cells {
                h.cell_mut(g, c).values.insert(array.to_string(), l.clone());
            }
        }
        if let Some(ct) = self.layout.count_of(array).cloned() {
            let g = group.expect("counted arrays have cells");
            let len = match &av.dims[0] {
                IndexDomain::Range(n) => self.scalar_term(n, &h)?,
                IndexDomain::Total(_) => unreachable!("counted arrays are bounded"),
            };
            let blk = h.counts[array].clone();
            let c = blk.count.clone();
            match &lit {
                Some(l) => cons.push(Term::or(vec![
                    Term::and(vec![Term::eq(blk.z.clone(), l.clone()), Term::eq(c.clone(), len)]),
                    Term::and(vec![Term::ne(blk.z.clone(), l.clone()), Term::eq(c.clone(), Term::Int(0))]),
                ])),
                None => {
                    let a = h.cell(g, 0).values[array].clone();
                    cons.push(Term::le(Term::Int(0), c.clone()));
                    cons.push(Term::le(c.clone(), len));
                    cons.push(Term::implies(
                        Term::eq(blk.z.clone(), a),
                        Term::cmp(crate::horn::CmpOp::Ge, c.clone(), Term::Int(1)),
                    ));
                }
            }
            if ct.orig {
                cons.push(Term::eq(blk.orig.clone().expect("orig slot"), c));
            }
        }
        let Some(g) = group else {
            self.push(b, vec![t.atom(src)], cons, Head::Atom(h.atom(dst)), ClauseKind::Rule, Self::rule_origin(id, "init"));
            return Ok(());
        };
        let cells = self.layout.groups[g].cells;
        if !new_group {
            if cells == 2 && lit.is_none() {
                let (c0, c1) = (h.cell(g, 0), h.cell(g, 1));
                cons.push(Term::implies(
                    all_eq(&c0.index, &c1.index),
                    Term::eq(c0.values[array].clone(), c1.values[array].clone()),
                ));
            }
            self.push(b, vec![t.atom(src)], cons, Head::Atom(h.atom(dst)), ClauseKind::Rule, Self::rule_origin(id, "init-member"));
            return Ok(());
        }
        if cells == 1 {
            cons.push(self.bounds(g, &h)?);
            self.push(b, vec![t.atom(src)], cons, Head::Atom(h.atom(dst)), ClauseKind::Rule, Self::rule_origin(id, "init1"));
            return Ok(());
        }
        // Two cells: distinct indices, then the diagonal.
        let mut pair = cons.clone();
        let (k0, k1) = (h.cell(g, 0).index.clone(), h.cell(g, 1).index.clone());
        pair.push(if self.conf.ordered { lex_lt(&k0, &k1) } else { any_ne(&k0, &k1) });
        pair.push(self.bounds(g, &h)?);
        let body = vec![t.atom(src)];
        self.push(b.clone(), body.clone(), pair, Head::Atom(h.atom(dst)), ClauseKind::Rule, Self::rule_origin(id, "init2-pair"));
        let diag = h.with_cell(g, 1, h.cell(g, 0).clone());
        cons.push(self.bounds(g, &diag)?);
        self.push(b, body, cons, Head::Atom(diag.atom(dst)), ClauseKind::Rule, Self::rule_origin(id, "init2-diagonal"));
        Ok(())
    }
}

/// Clauses deriving a two-cell predicate from a one-cell predicate for
/// `group`: pairs of distinct cells (ordered when asked) and the diagonal.
pub fn expand_1_to_2(sig1: &PredicateSig, sig2: &PredicateSig, group: usize, ordered: bool) -> Vec<HornClause> {
    let origin = |r: &str| Provenance { edges: Vec::new(), rules: vec![r.to_string()], property: None };
    let mut out = Vec::new();
    {
        let mut b = ClauseBuilder::new();
        let t1 = b.tuple(sig1);
        let values: BTreeMap<String, Term> = t1
            .cell(group, 0)
            .values
            .keys()
            .map(|m| (m.clone(), b.fresh(&format!("{m}!2"), value_sort(sig1, m))))
            .collect();
        let index: Vec<Term> =
            (0..t1.cell(group, 0).index.len()).map(|d| b.fresh(&format!("k!2.{d}"), index_sort(sig1, group, d))).collect();
        let second = Cell { index, values };
        let t2 = t1.with_cell(group, 0, second.clone());
        let mut h = t1.clone();
        h.groups.insert(group, vec![t1.cell(group, 0).clone(), second.clone()]);
        let (k0, k1) = (&t1.cell(group, 0).index, &second.index);
        let cons = if ordered { lex_lt(k0, k1) } else { any_ne(k0, k1) };
        out.push(b.finish(
            vec![t1.atom(sig1), t2.atom(sig1)],
            cons,
            Head::Atom(h.atom(sig2)),
            ClauseKind::Rule,
            origin("expand-pair"),
        ));
    }
    let mut b = ClauseBuilder::new();
    let t1 = b.tuple(sig1);
    let mut h = t1.clone();
    h.groups.insert(group, vec![t1.cell(group, 0).clone(), t1.cell(group, 0).clone()]);
    out.push(b.finish(vec![t1.atom(sig1)], Term::Bool(true), Head::Atom(h.atom(sig2)), ClauseKind::Rule, origin("expand-diagonal")));
    out
}

fn index_sort(sig: &PredicateSig, group: usize, dim: usize) -> crate::horn::Sort {
    sig.slots
        .iter()
        .find(|s| matches!(s.kind, crate::horn::SlotKind::CellIndex { group: g, dim: d, .. } if g == group && d == dim))
        .map(|s| s.sort)
        .unwrap_or(crate::horn::Sort::Int)
}

fn value_sort(sig: &PredicateSig, array: &str) -> crate::horn::Sort {
    sig.slots
        .iter()
        .find(|s| matches!(&s.kind, crate::horn::SlotKind::CellValue { array: a, .. } if a == array))
        .map(|s| s.sort)
        .unwrap_or(crate::horn::Sort::Int)
}
