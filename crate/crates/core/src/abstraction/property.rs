//! Quantified formulas over cells, wherever a program states them.
//!
//! Every distinct array term `a[e]` of a formula is mapped to a
//! distinguished cell of its group, with `e` equal to the cell index.
//! Queries keep binders as clause variables; assumes solve them from the
//! cell indices and turn into a filter on the current tuple.

use std::collections::BTreeMap;

use super::tuple::{ClauseBuilder, Tuple};
use super::{all_eq, expr_to_term, lex_le, lex_lt, EncodeError, Encoder};
use crate::frontend::{Expr, Quantified};
use crate::horn::{ClauseKind, Head, PredicateSig, Provenance, Term};

/// Distinct array terms of a formula, by group.
#[derive(Debug, Default)]
struct CellTerms {
    /// `(array, index)` in order of first appearance.
    terms: Vec<(String, Vec<Expr>)>,
    /// Per group: distinct index vectors in order of first appearance.
    groups: BTreeMap<usize, Vec<Vec<Expr>>>,
    /// `(array, orig, value)` count terms.
    counts: Vec<(String, bool, Expr)>,
}

fn collect(e: &Expr, out: &mut Vec<(String, Vec<Expr>)>, counts: &mut Vec<(String, bool, Expr)>) {
    match e {
        Expr::Select { array, index } => {
            let key = (array.clone(), index.clone());
            if !out.contains(&key) {
                out.push(key);
            }
        }
        Expr::Count { array, orig, value } => {
            let key = (array.clone(), *orig, (**value).clone());
            if !counts.contains(&key) {
                counts.push(key);
            }
        }
        _ => {}
    }
    for c in e.children() {
        collect(c, out, counts);
    }
}

/// An ordered group with two distinct indices: the group, the two index
/// vectors as written, and whether the second one took the first cell.
type Orientation = (usize, Vec<Expr>, Vec<Expr>, bool);

/// Assignment of each distinct index vector of each group to a cell, with
/// the side condition that justifies it.
#[derive(Debug, Clone)]
struct Choice {
    cell_of: BTreeMap<(usize, Vec<Expr>), usize>,
}

impl Encoder<'_> {
    fn cell_terms(&self, q: &Quantified) -> Result<CellTerms, String> {
        let mut ct = CellTerms::default();
        collect(&q.guard, &mut ct.terms, &mut ct.counts);
        collect(&q.conclusion, &mut ct.terms, &mut ct.counts);
        for (array, index) in &ct.terms {
            let g = self
                .layout
                .group_of(array)
                .ok_or_else(|| format!("array `{array}` has no distinguished cells"))?;
            let idxs = ct.groups.entry(g).or_default();
            if !idxs.contains(index) {
                idxs.push(index.clone());
            }
        }
        Ok(ct)
    }

    /// Every way to place the index vectors of each group on its cells.
    fn all_choices(&self, ct: &CellTerms) -> Vec<Choice> {
        let mut out = vec![Choice { cell_of: BTreeMap::new() }];
        for (g, idxs) in &ct.groups {
            let cells = self.layout.groups[*g].cells;
            let mut next = Vec::new();
            for ch in &out {
                let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
                for _ in idxs {
                    combos = combos
                        .into_iter()
                        .flat_map(|c| {
                            (0..cells).map(move |k| {
                                let mut c = c.clone();
                                c.push(k);
                                c
                            })
                        })
                        .collect();
                }
                for combo in combos {
                    let mut ch = ch.clone();
                    for (idx, k) in idxs.iter().zip(combo) {
                        ch.cell_of.insert((*g, idx.clone()), k);
                    }
                    next.push(ch);
                }
            }
            out = next;
        }
        out
    }

    /// Translates a formula under `choice` on tuple `t`; binders resolve
    /// through `binders`. Index equalities are produced separately by
    /// `index_equalities`.
    fn instantiate(
        &self,
        e: &Expr,
        t: &Tuple,
        choice: &Choice,
        binders: &BTreeMap<String, Term>,
    ) -> Result<Term, String> {
        let leaf = |x: &Expr| -> Result<Term, String> {
            match x {
                Expr::Var(v) => binders
                    .get(v)
                    .or_else(|| t.scalars.get(v))
                    .cloned()
                    .ok_or_else(|| format!("scalar `{v}` is not live here")),
                Expr::Select { array, index } => {
                    let g = self.layout.group_of(array).ok_or_else(|| format!("array `{array}` has no cells"))?;
                    let c = choice.cell_of[&(g, index.clone())];
                    let cells = t.groups.get(&g).ok_or_else(|| format!("array `{array}` is not initialized here"))?;
                    cells[c]
                        .values
                        .get(array)
                        .cloned()
                        .ok_or_else(|| format!("array `{array}` is not initialized here"))
                }
                Expr::Count { array, orig, .. } => {
                    let blk = t.counts.get(array).ok_or_else(|| format!("counts of `{array}` are not tracked here"))?;
                    if *orig {
                        blk.orig.clone().ok_or_else(|| format!("original counts of `{array}` are not tracked"))
                    } else {
                        Ok(blk.count.clone())
                    }
                }
                _ => unreachable!(),
            }
        };
        expr_to_term(e, &leaf)
    }

    /// Index equalities `e = k` for the array terms under `choice`.
    fn index_equalities(
        &self,
        t: &Tuple,
        choice: &Choice,
        binders: &BTreeMap<String, Term>,
    ) -> Result<Vec<Term>, String> {
        let mut eqs = Vec::new();
        for ((g, idx), c) in &choice.cell_of {
            let k = &t.groups.get(g).ok_or("array is not initialized here")?[*c].index;
            for (e, kd) in idx.iter().zip(k) {
                let et = self.instantiate(e, t, choice, binders)?;
                eqs.push(Term::eq(et, kd.clone()));
            }
        }
        Ok(eqs)
    }

    /// Sample equalities `z = e` for count terms.
    fn count_equalities(
        &self,
        ct: &CellTerms,
        t: &Tuple,
        choice: &Choice,
        binders: &BTreeMap<String, Term>,
    ) -> Result<Vec<Term>, String> {
        let mut seen: BTreeMap<&str, &Expr> = BTreeMap::new();
        let mut eqs = Vec::new();
        for (array, _, value) in &ct.counts {
            if let Some(prev) = seen.insert(array, value) {
                if prev != value {
                    return Err(format!("count terms over `{array}` sample different values"));
                }
                continue;
            }
            let blk = t.counts.get(array).ok_or_else(|| format!("counts of `{array}` are not tracked here"))?;
            eqs.push(Term::eq(blk.z.clone(), self.instantiate(value, t, choice, binders)?));
        }
        Ok(eqs)
    }

    /// Encodes property or hint `index` as one or more queries.
    pub fn encode_property(&mut self, index: usize) -> Result<(), EncodeError> {
        let prop = self.cfg.props[index].clone();
        let err = |message: String| EncodeError::Property { index, message };
        let sig = self.sigs[prop.point].clone();
        let kind = if prop.hint { ClauseKind::Hint } else { ClauseKind::Query };
        if !self.expressible(&prop.body) {
            // Too few cells to state the property: nothing is known about
            // it, so the query can only be discharged at unreachable points.
            let mut b = ClauseBuilder::new();
            let t = b.tuple(&sig);
            let origin = Provenance { edges: Vec::new(), rules: vec!["query-unknown".into()], property: Some(index) };
            self.push(b, vec![t.atom(&sig)], Vec::new(), Head::Goal(Term::Bool(false)), kind, origin);
            return Ok(());
        }
        let ct = self.cell_terms(&prop.body).map_err(err)?;

        // Each group needs a cell per distinct index; with an ordered pair
        // the two orientations become separate queries.
        let mut variants: Vec<(Choice, Vec<Orientation>)> =
            vec![(Choice { cell_of: BTreeMap::new() }, Vec::new())];
        for (g, idxs) in &ct.groups {
            let mut next = Vec::new();
            for (ch, orient) in variants {
                let orders: Vec<Vec<usize>> = if idxs.len() == 2 && self.conf.ordered {
                    vec![vec![0, 1], vec![1, 0]]
                } else {
                    vec![(0..idxs.len()).collect()]
                };
                for order in orders {
                    let mut ch = ch.clone();
                    let mut orient = orient.clone();
                    for (idx, c) in idxs.iter().zip(&order) {
                        ch.cell_of.insert((*g, idx.clone()), *c);
                    }
                    if idxs.len() == 2 && self.conf.ordered {
                        let swapped = order[0] == 1;
                        orient.push((*g, idxs[0].clone(), idxs[1].clone(), swapped));
                    }
                    next.push((ch, orient));
                }
            }
            variants = next;
        }

        for (choice, orient) in variants {
            let mut b = ClauseBuilder::new();
            let t = b.tuple(&sig);
            let binders: BTreeMap<String, Term> =
                prop.body.binders.iter().map(|(n, s)| (n.clone(), b.fresh(n, *s))).collect();
            let mut cons = self.index_equalities(&t, &choice, &binders).map_err(err)?;
            cons.extend(self.count_equalities(&ct, &t, &choice, &binders).map_err(err)?);
            for (_, e1, e2, swapped) in &orient {
                let a = self.instantiate_index(e1, &t, &choice, &binders).map_err(err)?;
                let c = self.instantiate_index(e2, &t, &choice, &binders).map_err(err)?;
                cons.push(if *swapped { lex_lt(&c, &a) } else { lex_le(&a, &c) });
            }
            if self.conf.pin_cells {
                cons.extend(self.pins(&ct, &t));
            }
            cons.push(self.instantiate(&prop.body.guard, &t, &choice, &binders).map_err(err)?);
            let goal = self.instantiate(&prop.body.conclusion, &t, &choice, &binders).map_err(err)?;
            let origin = Provenance { edges: Vec::new(), rules: vec!["query".into()], property: Some(index) };
            self.push(b, vec![t.atom(&sig)], cons, Head::Goal(goal), kind, origin);
        }
        Ok(())
    }

    /// Whether every array term of `q` fits on the cells of its group.
    fn expressible(&self, q: &Quantified) -> bool {
        let mut terms = Vec::new();
        let mut counts = Vec::new();
        collect(&q.guard, &mut terms, &mut counts);
        collect(&q.conclusion, &mut terms, &mut counts);
        let mut per_group: BTreeMap<usize, Vec<&Vec<Expr>>> = BTreeMap::new();
        for (array, index) in &terms {
            match self.layout.group_of(array) {
                Some(g) => {
                    let idxs = per_group.entry(g).or_default();
                    if !idxs.contains(&index) {
                        idxs.push(index);
                    }
                }
                None => return false,
            }
        }
        per_group.iter().all(|(g, idxs)| idxs.len() <= self.layout.groups[*g].cells)
    }

    fn instantiate_index(
        &self,
        idx: &[Expr],
        t: &Tuple,
        choice: &Choice,
        binders: &BTreeMap<String, Term>,
    ) -> Result<Vec<Term>, String> {
        idx.iter().map(|e| self.instantiate(e, t, choice, binders)).collect()
    }

    /// Fixes the cells of unbounded groups the property does not mention
    /// to the smallest literal indices the program uses.
    fn pins(&self, ct: &CellTerms, t: &Tuple) -> Vec<Term> {
        let mut out = Vec::new();
        for (g, cells) in &t.groups {
            if ct.groups.contains_key(g) || self.layout.groups[*g].is_ranged() {
                continue;
            }
            let consts = &self.constants[*g];
            if consts.is_empty() {
                continue;
            }
            for (c, cell) in cells.iter().enumerate() {
                let lit = &consts[c.min(consts.len() - 1)];
                let lit: Vec<Term> = lit.iter().map(|v| v.to_term()).collect();
                out.push(all_eq(&cell.index, &lit));
            }
        }
        out
    }

    /// `assume forall ...` as a filter on the current tuple: for every way
    /// of placing the array terms on cells, if the indices match and the
    /// guard holds then the conclusion holds.
    pub(crate) fn assume(
        &mut self,
        id: usize,
        q: &Quantified,
        src: &PredicateSig,
        dst: &PredicateSig,
    ) -> Result<(), EncodeError> {
        let unsupported = |m: String| EncodeError::Unsupported(format!("quantified assume `{q}`: {m}"));
        let mut b = ClauseBuilder::new();
        let t = b.tuple(src);
        let head = t.project(dst).atom(dst);
        let mut filter = Vec::new();
        match self.cell_terms(q) {
            // Arrays without cells carry no information to restrict.
            Err(_) => {}
            Ok(ct) => {
                if !ct.counts.is_empty() {
                    return Err(unsupported("count terms are not allowed".into()));
                }
                for choice in self.all_choices(&ct) {
                    let binders = self.solve_binders(q, &t, &choice).map_err(unsupported)?;
                    let mut lhs = self.index_equalities(&t, &choice, &binders).map_err(unsupported)?;
                    lhs.push(self.instantiate(&q.guard, &t, &choice, &binders).map_err(unsupported)?);
                    let rhs = self.instantiate(&q.conclusion, &t, &choice, &binders).map_err(unsupported)?;
                    filter.push(Term::implies(Term::and(lhs), rhs));
                }
            }
        }
        self.push(b, vec![t.atom(src)], filter, Head::Atom(head), ClauseKind::Rule, Self::rule_origin(id, "assume"));
        Ok(())
    }

    /// Each binder must occur as a whole index component of some array
    /// term; it takes the value of the matching cell index.
    fn solve_binders(
        &self,
        q: &Quantified,
        t: &Tuple,
        choice: &Choice,
    ) -> Result<BTreeMap<String, Term>, String> {
        let mut out = BTreeMap::new();
        for ((g, idx), c) in &choice.cell_of {
            let k = &t.groups.get(g).ok_or("array is not initialized here")?[*c].index;
            for (e, kd) in idx.iter().zip(k) {
                if let Expr::Var(v) = e {
                    if q.binders.iter().any(|(b, _)| b == v) && !out.contains_key(v) {
                        out.insert(v.clone(), kd.clone());
                    }
                }
            }
        }
        for (b, _) in &q.binders {
            if !out.contains_key(b) {
                return Err(format!("binder `{b}` must appear as an array index"));
            }
        }
        Ok(out)
    }
}
