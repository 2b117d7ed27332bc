//! Per-value counts and set operations on Boolean and integer maps.
//!
//! A count block `(z, c[, c0])` records how many cells of an array hold
//! the sampled value `z` (and how many did initially). A write `a[i] := v`
//! goes through two intermediate predicates: the first removes the old
//! value `a[i]` from the count, the second adds `v`.

use crate::abstraction::tuple::{Cell, ClauseBuilder, Tuple};
use crate::abstraction::{any_ne, EncodeError, Encoder};
use crate::frontend::{Expr, SetOpKind};
use crate::horn::{ClauseKind, Head, PredicateSig, Sort, Term};

fn intermediate(enc: &Encoder<'_>, src: &PredicateSig, base: String, edge: usize) -> PredicateSig {
    let taken = |n: &str| enc.sigs.iter().chain(&enc.extra).any(|s| s.name == n);
    let name = if taken(&base) { format!("{base}_e{edge}") } else { base };
    PredicateSig { name, slots: src.slots.clone(), point: None, keep: false }
}

fn with_sample(t: &Tuple, array: &str, z: Term) -> Tuple {
    let mut t = t.clone();
    t.counts.get_mut(array).expect("count block").z = z;
    t
}

fn with_count(t: &Tuple, array: &str, c: Term) -> Tuple {
    let mut t = t.clone();
    t.counts.get_mut(array).expect("count block").count = c;
    t
}

/// The six clauses of a counted write.
pub(crate) fn count_write(
    enc: &mut Encoder<'_>,
    id: usize,
    array: &str,
    index: &[Expr],
    value: &Expr,
    src: &PredicateSig,
    dst: &PredicateSig,
) -> Result<(), EncodeError> {
    let g = enc.layout.group_of(array).expect("counted arrays have cells");
    let decr = intermediate(enc, src, format!("{}__decr", dst.name), id);
    enc.extra.push(decr.clone());
    let incr = intermediate(enc, src, format!("{}__incr", dst.name), id);
    enc.extra.push(incr.clone());
    let origin = |r: &str| Encoder::rule_origin(id, r);

    // Removing the old value: it differs from the sample, or it is the sample.
    for same in [false, true] {
        let mut b = ClauseBuilder::new();
        let t = b.tuple(src);
        let i = enc.index_terms(index, &t)?;
        let w = enc.fresh_values(&mut b, &t, g);
        let old = w[array].clone();
        let mut cons = Vec::new();
        let (base, head) = if same {
            let tz = with_sample(&t, array, old.clone());
            let c = tz.counts[array].count.clone();
            let h = with_count(&tz, array, Term::sub(c, Term::Int(1)));
            (tz, h)
        } else {
            cons.push(Term::ne(old, t.counts[array].z.clone()));
            (t.clone(), t.clone())
        };
        let probe = base.with_cell(g, 0, Cell { index: i, values: w });
        let name = if same { "count-decr-same" } else { "count-decr-other" };
        enc.push(b, vec![base.atom(src), probe.atom(src)], cons, Head::Atom(head.atom(&decr)), ClauseKind::Rule, origin(name));
    }

    // Adding the new value.
    for same in [false, true] {
        let mut b = ClauseBuilder::new();
        let t = b.tuple(src);
        let i = enc.index_terms(index, &t)?;
        let mut cons = Vec::new();
        let v = enc.write_value(&mut b, array, value, &t, &mut cons)?;
        let w = enc.fresh_values(&mut b, &t, g);
        let (base, head) = if same {
            let tz = with_sample(&t, array, v.clone());
            let c = tz.counts[array].count.clone();
            let h = with_count(&tz, array, Term::add(c, Term::Int(1)));
            (tz, h)
        } else {
            cons.push(Term::ne(v, t.counts[array].z.clone()));
            (t.clone(), t.clone())
        };
        let probe = base.with_cell(g, 0, Cell { index: i, values: w });
        let name = if same { "count-incr-same" } else { "count-incr-other" };
        enc.push(b, vec![base.atom(&decr), probe.atom(&decr)], cons, Head::Atom(head.atom(&incr)), ClauseKind::Rule, origin(name));
    }

    // The write itself on the distinguished cell.
    for hit in [false, true] {
        let mut b = ClauseBuilder::new();
        let t = b.tuple(src);
        let i = enc.index_terms(index, &t)?;
        let mut cons = Vec::new();
        let v = enc.write_value(&mut b, array, value, &t, &mut cons)?;
        let (body, head) = if hit {
            let s = t.with_index(g, 0, &i);
            let h = s.with_value(g, 0, array, v);
            (s, h)
        } else {
            cons.push(any_ne(&t.cell(g, 0).index, &i));
            (t.clone(), t.clone())
        };
        let head = head.project(dst);
        if enc.conf.include_bounds_guards {
            cons.push(enc.bounds(g, &head)?);
        }
        let name = if hit { "write1-same" } else { "write1-other" };
        enc.push(b, vec![body.atom(&incr)], cons, Head::Atom(head.atom(dst)), ClauseKind::Rule, origin(name));
    }
    Ok(())
}

/// `target := union(lhs, rhs)` or `intersection`, cell by cell. The three
/// arrays must share their distinguished cells.
#[allow(clippy::too_many_arguments)]
pub(crate) fn set_op(
    enc: &mut Encoder<'_>,
    id: usize,
    kind: SetOpKind,
    target: &str,
    lhs: &str,
    rhs: &str,
    src: &PredicateSig,
    dst: &PredicateSig,
) -> Result<(), EncodeError> {
    let rule = match kind {
        SetOpKind::Union => "union",
        SetOpKind::Intersection => "intersection",
    };
    if enc.layout.count_of(target).is_some() {
        return Err(EncodeError::Unsupported(format!("{rule} into counted array `{target}`")));
    }
    let mut b = ClauseBuilder::new();
    let t = b.tuple(src);
    let mut h = t.clone();
    if let Some(g) = enc.layout.group_of(target) {
        let (gl, gr) = (enc.layout.group_of(lhs), enc.layout.group_of(rhs));
        let sort = enc.array(target).sort;
        if gl == Some(g) && gr == Some(g) {
            for c in 0..enc.layout.groups[g].cells {
                let cell = t.cell(g, c);
                let (x, y) = (cell.values[lhs].clone(), cell.values[rhs].clone());
                let v = match (kind, sort) {
                    (SetOpKind::Union, Sort::Bool) => Term::or(vec![x, y]),
                    (SetOpKind::Intersection, Sort::Bool) => Term::and(vec![x, y]),
                    (SetOpKind::Union, _) => Term::add(x, y),
                    (SetOpKind::Intersection, _) => {
                        return Err(EncodeError::Unsupported(format!(
                            "intersection of non-Boolean maps into `{target}`"
                        )))
                    }
                };
                h = h.with_value(g, c, target, v);
            }
        } else if gl.is_some() && gr.is_some() {
            return Err(EncodeError::Unsupported(format!(
                "{rule} needs `{target}`, `{lhs}` and `{rhs}` to share their index (use shared indices)"
            )));
        } else {
            for c in 0..enc.layout.groups[g].cells {
                let v = b.fresh(&format!("{target}!u"), sort);
                h = h.with_value(g, c, target, v);
            }
        }
    }
    let head = h.project(dst).atom(dst);
    enc.push(b, vec![t.atom(src)], Vec::new(), Head::Atom(head), ClauseKind::Rule, Encoder::rule_origin(id, rule));
    Ok(())
}
