//! Name resolution and sort checking. Integer literals used in real
//! contexts are rewritten to real literals.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;

use super::ast::*;
use super::FrontendError;
use crate::horn::Sort;

/// Label reserved for the entry point.
pub const ENTRY_LABEL: &str = "init";

#[derive(Clone)]
enum Ident {
    Scalar(Sort),
    Array { sort: Sort, dims: Vec<Sort> },
}

struct Env {
    names: BTreeMap<String, Ident>,
    /// Scalars that appear in array range expressions.
    range_vars: BTreeSet<String>,
}

impl Env {
    fn array(&self, name: &str, loc: Loc) -> Result<(Sort, Vec<Sort>), FrontendError> {
        match self.names.get(name) {
            Some(Ident::Array { sort, dims }) => Ok((*sort, dims.clone())),
            Some(Ident::Scalar(_)) => {
                Err(FrontendError::sort(loc, format!("`{name}` is a scalar, not an array")))
            }
            None => Err(FrontendError::undeclared(loc, name)),
        }
    }
}

/// Checks a parsed program and returns it with literals coerced.
pub fn check_program(p: &Program) -> Result<Program, FrontendError> {
    let mut env = Env { names: BTreeMap::new(), range_vars: BTreeSet::new() };
    let mut decls = Vec::new();
    for d in &p.decls {
        if env.names.contains_key(&d.name) {
            return Err(FrontendError::sort(d.loc, format!("`{}` is declared twice", d.name)));
        }
        let d = match &d.kind {
            DeclKind::Scalar => {
                env.names.insert(d.name.clone(), Ident::Scalar(d.sort));
                d.clone()
            }
            DeclKind::Array { dims, init } => {
                if dims.len() > 2 {
                    return Err(FrontendError::sort(d.loc, "arrays have at most two dimensions"));
                }
                let mut new_dims = Vec::new();
                for dim in dims {
                    match dim {
                        IndexDomain::Range(e) => {
                            if e.has_select() || e.has_count() {
                                return Err(FrontendError::sort(
                                    d.loc,
                                    "array bounds may only mention scalars",
                                ));
                            }
                            let e = check_expr(&env, e, Some(Sort::Int), d.loc, false)?;
                            let mut vs = BTreeSet::new();
                            e.scalar_vars(&mut vs);
                            env.range_vars.extend(vs);
                            new_dims.push(IndexDomain::Range(e));
                        }
                        other => new_dims.push(other.clone()),
                    }
                }
                env.names.insert(
                    d.name.clone(),
                    Ident::Array { sort: d.sort, dims: new_dims.iter().map(|x| x.sort()).collect() },
                );
                Decl {
                    kind: DeclKind::Array { dims: new_dims, init: *init },
                    ..d.clone()
                }
            }
        };
        decls.push(d);
    }
    let mut labels = BTreeSet::new();
    let body = check_block(&env, &p.body, &mut labels)?;
    let mut props = Vec::new();
    for prop in &p.props {
        props.push(check_property(&env, prop)?);
    }
    Ok(Program { decls, body, props })
}

/// Checks properties against an already checked program (used for hints).
pub fn check_properties(
    p: &Program,
    props: &[PropertySpec],
) -> Result<Vec<PropertySpec>, FrontendError> {
    let mut env = Env { names: BTreeMap::new(), range_vars: BTreeSet::new() };
    for d in &p.decls {
        let id = match &d.kind {
            DeclKind::Scalar => Ident::Scalar(d.sort),
            DeclKind::Array { dims, .. } => {
                Ident::Array { sort: d.sort, dims: dims.iter().map(|x| x.sort()).collect() }
            }
        };
        env.names.insert(d.name.clone(), id);
    }
    props.iter().map(|prop| check_property(&env, prop)).collect()
}

fn check_block(
    env: &Env,
    stmts: &[Stmt],
    labels: &mut BTreeSet<String>,
) -> Result<Vec<Stmt>, FrontendError> {
    stmts.iter().map(|s| check_stmt(env, s, labels)).collect()
}

fn check_stmt(env: &Env, s: &Stmt, labels: &mut BTreeSet<String>) -> Result<Stmt, FrontendError> {
    let loc = s.loc;
    if let Some(l) = &s.label {
        if l == ENTRY_LABEL {
            return Err(FrontendError::sort(loc, format!("label `{l}` is reserved")));
        }
        if env.names.contains_key(l) {
            return Err(FrontendError::sort(loc, format!("label `{l}` clashes with a variable")));
        }
        if !labels.insert(l.clone()) {
            return Err(FrontendError::sort(loc, format!("label `{l}` is used twice")));
        }
    }
    let kind = match &s.kind {
        StmtKind::Skip => StmtKind::Skip,
        StmtKind::Assign { target, value } => {
            let sort = match env.names.get(target) {
                Some(Ident::Scalar(sort)) => *sort,
                Some(Ident::Array { .. }) => {
                    return Err(FrontendError::sort(
                        loc,
                        format!("cannot assign to array `{target}` as a whole"),
                    ))
                }
                None => return Err(FrontendError::undeclared(loc, target)),
            };
            if env.range_vars.contains(target) {
                return Err(FrontendError::sort(
                    loc,
                    format!("`{target}` bounds an array and cannot be assigned"),
                ));
            }
            no_counts(value, loc)?;
            StmtKind::Assign { target: target.clone(), value: check_expr(env, value, Some(sort), loc, false)? }
        }
        StmtKind::Store { array, index, value } => {
            let (sort, dims) = env.array(array, loc)?;
            if dims.len() != index.len() {
                return Err(FrontendError::sort(
                    loc,
                    format!("`{array}` has {} dimensions, indexed with {}", dims.len(), index.len()),
                ));
            }
            let mut new_index = Vec::new();
            for (e, d) in index.iter().zip(&dims) {
                no_counts(e, loc)?;
                new_index.push(check_expr(env, e, Some(*d), loc, false)?);
            }
            no_counts(value, loc)?;
            StmtKind::Store {
                array: array.clone(),
                index: new_index,
                value: check_expr(env, value, Some(sort), loc, false)?,
            }
        }
        StmtKind::SetOp { kind, target, lhs, rhs } => {
            let t = env.array(target, loc)?;
            for other in [lhs, rhs] {
                if env.array(other, loc)? != t {
                    return Err(FrontendError::sort(
                        loc,
                        format!("`{target}` and `{other}` have different shapes"),
                    ));
                }
            }
            match (kind, t.0) {
                (_, Sort::Bool) | (SetOpKind::Union, Sort::Int) => {}
                (SetOpKind::Intersection, Sort::Int) => {
                    return Err(FrontendError::sort(
                        loc,
                        "intersection is only defined for sets (bool-valued maps)",
                    ))
                }
                _ => {
                    return Err(FrontendError::sort(
                        loc,
                        "set operations need bool-valued (sets) or int-valued (multisets) maps",
                    ))
                }
            }
            s.kind.clone()
        }
        StmtKind::Assume(c) => {
            no_counts(c, loc)?;
            StmtKind::Assume(check_expr(env, c, Some(Sort::Bool), loc, false)?)
        }
        StmtKind::AssumeForall(q) => {
            if q.guard.has_count() || q.conclusion.has_count() {
                return Err(FrontendError::sort(loc, "count terms are only allowed in assertions"));
            }
            StmtKind::AssumeForall(check_quantified(env, q, loc)?)
        }
        StmtKind::If { cond, then, els } => {
            no_counts(cond, loc)?;
            StmtKind::If {
                cond: check_expr(env, cond, Some(Sort::Bool), loc, false)?,
                then: check_block(env, then, labels)?,
                els: check_block(env, els, labels)?,
            }
        }
        StmtKind::While { cond, body } => {
            no_counts(cond, loc)?;
            StmtKind::While {
                cond: check_expr(env, cond, Some(Sort::Bool), loc, false)?,
                body: check_block(env, body, labels)?,
            }
        }
    };
    Ok(Stmt { label: s.label.clone(), kind, loc })
}

fn no_counts(e: &Expr, loc: Loc) -> Result<(), FrontendError> {
    if e.has_count() {
        Err(FrontendError::sort(loc, "count terms are only allowed in assertions"))
    } else {
        Ok(())
    }
}

fn check_property(env: &Env, p: &PropertySpec) -> Result<PropertySpec, FrontendError> {
    Ok(PropertySpec { at: p.at.clone(), body: check_quantified(env, &p.body, p.loc)?, loc: p.loc })
}

fn infer_binder(env: &Env, e: &Expr, binder: &str) -> Option<Sort> {
    match e {
        Expr::Select { array, index } => {
            if let Some(Ident::Array { dims, .. }) = env.names.get(array) {
                for (i, d) in index.iter().zip(dims) {
                    if matches!(i, Expr::Var(v) if v == binder) {
                        return Some(*d);
                    }
                }
            }
        }
        Expr::Count { array, value, .. } => {
            if let (Some(Ident::Array { sort, .. }), Expr::Var(v)) = (env.names.get(array), &**value) {
                if v == binder {
                    return Some(*sort);
                }
            }
        }
        _ => {}
    }
    e.children().into_iter().find_map(|c| infer_binder(env, c, binder))
}

fn check_quantified(env: &Env, q: &Quantified, loc: Loc) -> Result<Quantified, FrontendError> {
    let mut inner = Env { names: env.names.clone(), range_vars: env.range_vars.clone() };
    let mut binders = Vec::new();
    for (b, _) in &q.binders {
        if env.names.contains_key(b) {
            return Err(FrontendError::sort(loc, format!("binder `{b}` shadows a declaration")));
        }
        if binders.iter().any(|(x, _): &(String, Sort)| x == b) {
            return Err(FrontendError::sort(loc, format!("binder `{b}` bound twice")));
        }
        let sort = infer_binder(env, &q.guard, b)
            .or_else(|| infer_binder(env, &q.conclusion, b))
            .unwrap_or(Sort::Int);
        binders.push((b.clone(), sort));
    }
    for (b, s) in &binders {
        inner.names.insert(b.clone(), Ident::Scalar(*s));
    }
    Ok(Quantified {
        binders,
        guard: check_expr(&inner, &q.guard, Some(Sort::Bool), loc, true)?,
        conclusion: check_expr(&inner, &q.conclusion, Some(Sort::Bool), loc, true)?,
    })
}

fn to_real(e: Expr) -> Expr {
    match e {
        Expr::Int(i) => Expr::Real(Rational64::from_integer(i)),
        other => other,
    }
}

/// Checks `e`, coercing integer literals where a real is expected.
fn check_expr(
    env: &Env,
    e: &Expr,
    want: Option<Sort>,
    loc: Loc,
    in_prop: bool,
) -> Result<Expr, FrontendError> {
    let (e, sort) = infer(env, e, loc, in_prop)?;
    match want {
        Some(Sort::Real) if sort == Sort::Int && matches!(e, Expr::Int(_)) => Ok(to_real(e)),
        Some(w) if w != sort => {
            Err(FrontendError::sort(loc, format!("`{e}` has sort {sort}, expected {w}")))
        }
        _ => Ok(e),
    }
}

fn unify_numeric(a: (Expr, Sort), b: (Expr, Sort), loc: Loc) -> Result<(Expr, Expr, Sort), FrontendError> {
    match (a.1, b.1) {
        (x, y) if x == y => Ok((a.0, b.0, x)),
        (Sort::Int, Sort::Real) if matches!(a.0, Expr::Int(_)) => Ok((to_real(a.0), b.0, Sort::Real)),
        (Sort::Real, Sort::Int) if matches!(b.0, Expr::Int(_)) => Ok((a.0, to_real(b.0), Sort::Real)),
        (x, y) => Err(FrontendError::sort(
            loc,
            format!("cannot combine `{}` ({x}) with `{}` ({y})", a.0, b.0),
        )),
    }
}

fn infer(env: &Env, e: &Expr, loc: Loc, in_prop: bool) -> Result<(Expr, Sort), FrontendError> {
    Ok(match e {
        Expr::Int(_) => (e.clone(), Sort::Int),
        Expr::Real(_) => (e.clone(), Sort::Real),
        Expr::Bool(_) => (e.clone(), Sort::Bool),
        Expr::Var(v) => match env.names.get(v) {
            Some(Ident::Scalar(s)) => (e.clone(), *s),
            Some(Ident::Array { .. }) => {
                return Err(FrontendError::sort(loc, format!("array `{v}` used as a scalar")))
            }
            None => return Err(FrontendError::undeclared(loc, v)),
        },
        Expr::Select { array, index } => {
            let (sort, dims) = env.array(array, loc)?;
            if dims.len() != index.len() {
                return Err(FrontendError::sort(
                    loc,
                    format!("`{array}` has {} dimensions, indexed with {}", dims.len(), index.len()),
                ));
            }
            let index = index
                .iter()
                .zip(&dims)
                .map(|(i, d)| check_expr(env, i, Some(*d), loc, in_prop))
                .collect::<Result<Vec<_>, _>>()?;
            (Expr::Select { array: array.clone(), index }, sort)
        }
        Expr::Count { array, orig, value } => {
            if !in_prop {
                return Err(FrontendError::sort(loc, "count terms are only allowed in assertions"));
            }
            let (sort, dims) = env.array(array, loc)?;
            if dims.len() != 1 {
                return Err(FrontendError::sort(loc, "count terms need a one-dimensional array"));
            }
            let value = check_expr(env, value, Some(sort), loc, in_prop)?;
            (Expr::Count { array: array.clone(), orig: *orig, value: Box::new(value) }, Sort::Int)
        }
        Expr::Neg(a) => {
            let (a, s) = infer(env, a, loc, in_prop)?;
            if !s.is_numeric() {
                return Err(FrontendError::sort(loc, format!("cannot negate `{a}`")));
            }
            (Expr::Neg(Box::new(a)), s)
        }
        Expr::Not(a) => (Expr::Not(Box::new(check_expr(env, a, Some(Sort::Bool), loc, in_prop)?)), Sort::Bool),
        Expr::Bin(op, a, b) => {
            let ta = infer(env, a, loc, in_prop)?;
            let tb = infer(env, b, loc, in_prop)?;
            match op {
                BinOp::And | BinOp::Or | BinOp::Implies => {
                    if ta.1 != Sort::Bool || tb.1 != Sort::Bool {
                        return Err(FrontendError::sort(loc, format!("`{e}` combines non-boolean operands")));
                    }
                    (Expr::bin(*op, ta.0, tb.0), Sort::Bool)
                }
                BinOp::Eq | BinOp::Ne => {
                    if ta.1 == Sort::Bool || tb.1 == Sort::Bool {
                        if ta.1 != tb.1 {
                            return Err(FrontendError::sort(loc, format!("`{e}` compares bool with a number")));
                        }
                        (Expr::bin(*op, ta.0, tb.0), Sort::Bool)
                    } else {
                        let (x, y, _) = unify_numeric(ta, tb, loc)?;
                        (Expr::bin(*op, x, y), Sort::Bool)
                    }
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    if !ta.1.is_numeric() || !tb.1.is_numeric() {
                        return Err(FrontendError::sort(loc, format!("`{e}` orders non-numbers")));
                    }
                    let (x, y, _) = unify_numeric(ta, tb, loc)?;
                    (Expr::bin(*op, x, y), Sort::Bool)
                }
                BinOp::Add | BinOp::Sub => {
                    if !ta.1.is_numeric() || !tb.1.is_numeric() {
                        return Err(FrontendError::sort(loc, format!("`{e}` adds non-numbers")));
                    }
                    let (x, y, s) = unify_numeric(ta, tb, loc)?;
                    (Expr::bin(*op, x, y), s)
                }
                BinOp::Mul => {
                    if !ta.1.is_numeric() || !tb.1.is_numeric() {
                        return Err(FrontendError::sort(loc, format!("`{e}` multiplies non-numbers")));
                    }
                    if ta.0.as_literal().is_none() && tb.0.as_literal().is_none() {
                        return Err(FrontendError::sort(
                            loc,
                            format!("`{e}`: multiplication needs a constant factor"),
                        ));
                    }
                    let (x, y, s) = unify_numeric(ta, tb, loc)?;
                    (Expr::bin(*op, x, y), s)
                }
                BinOp::Mod => {
                    let ok = ta.1 == Sort::Int && matches!(tb.0.as_literal(), Some(crate::horn::Value::Int(m)) if m > 0);
                    if !ok {
                        return Err(FrontendError::sort(
                            loc,
                            format!("`{e}`: modulus needs an integer and a positive constant"),
                        ));
                    }
                    (Expr::bin(*op, ta.0, tb.0), Sort::Int)
                }
            }
        }
    })
}
