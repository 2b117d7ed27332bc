//! Predicate inlining and equality substitution.

use std::collections::{BTreeMap, BTreeSet};

use super::{Atom, ClauseKind, Head, HornClause, HornSystem, Provenance, Term};
use super::term::CmpOp;

/// Both passes: equality substitution, then inlining to a fixpoint.
pub fn simplify(s: &HornSystem) -> HornSystem {
    coalesce(&substitute_equalities(s))
}

/// Eliminates body equalities `x = e` where `x` is a universal not occurring
/// in `e`, substituting `e` for `x` in the whole clause.
pub fn substitute_equalities(s: &HornSystem) -> HornSystem {
    HornSystem { preds: s.preds.clone(), clauses: s.clauses.iter().map(subst_clause).collect() }
}

fn is_generated(v: &str) -> bool {
    v.contains('!')
}

fn subst_clause(c: &HornClause) -> HornClause {
    let mut c = c.clone();
    loop {
        let conj = c.constraint.simplify().conjuncts();
        let universals: BTreeMap<&str, usize> =
            c.vars.iter().enumerate().map(|(i, (v, _))| (v.as_str(), i)).collect();
        // (priority, conjunct index, variable, replacement)
        let mut best: Option<(u8, usize, String, Term)> = None;
        for (j, part) in conj.iter().enumerate() {
            let Term::Cmp(CmpOp::Eq, a, b) = part else { continue };
            let mut consider = |x: &Term, e: &Term| {
                let Some(name) = x.as_var() else { return };
                let Some(&pos) = universals.get(name) else { return };
                if e.mentions(name) {
                    return;
                }
                let prio = match e {
                    _ if e.is_literal() => 4,
                    Term::Var(other) => {
                        let other_pos = universals.get(other.as_str()).copied();
                        let mine_gen = is_generated(name);
                        let other_gen = is_generated(other);
                        if mine_gen && !other_gen {
                            3
                        } else if mine_gen == other_gen && other_pos.is_none_or(|op| pos > op) {
                            2
                        } else {
                            1
                        }
                    }
                    _ => 1,
                };
                if best.as_ref().is_none_or(|(bp, _, _, _)| prio > *bp) {
                    best = Some((prio, j, name.to_string(), e.clone()));
                }
            };
            consider(a, b);
            consider(b, a);
        }
        let Some((_, j, name, e)) = best else {
            c.constraint = Term::and(conj);
            break;
        };
        let rest: Vec<Term> =
            conj.into_iter().enumerate().filter(|(i, _)| *i != j).map(|(_, t)| t).collect();
        c.constraint = Term::and(rest);
        let map = BTreeMap::from([(name, e)]);
        c = c.subst(&map);
    }
    c.constraint = c.constraint.simplify();
    c.body = c.body.iter().map(simplify_atom).collect();
    if let Head::Atom(a) = &c.head {
        c.head = Head::Atom(simplify_atom(a));
    }
    if let Head::Goal(g) = &c.head {
        c.head = Head::Goal(g.simplify());
    }
    c.prune_vars();
    c
}

fn simplify_atom(a: &Atom) -> Atom {
    Atom { pred: a.pred.clone(), args: a.args.iter().map(|t| t.simplify()).collect() }
}

/// Inlines predicates used exactly once in a body when either the predicate
/// has a single linear definition, or the one user is itself linear (each
/// definition then yields one copy of the user). Predicates marked `keep`
/// and predicates occurring in a query or hint are never inlined.
pub fn coalesce(s: &HornSystem) -> HornSystem {
    let mut sys = s.clone();
    loop {
        let mut heads: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        let mut uses: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        let mut in_query: BTreeSet<&str> = BTreeSet::new();
        for (i, c) in sys.clauses.iter().enumerate() {
            if let Some(h) = c.head_pred() {
                heads.entry(h).or_default().push(i);
            }
            for a in &c.body {
                uses.entry(&a.pred).or_default().push(i);
                if c.kind != ClauseKind::Rule {
                    in_query.insert(&a.pred);
                }
            }
        }
        let candidate = sys.preds.iter().find_map(|p| {
            if p.keep || in_query.contains(p.name.as_str()) {
                return None;
            }
            let h = heads.get(p.name.as_str())?;
            let u = uses.get(p.name.as_str())?;
            if u.len() != 1 || h.contains(&u[0]) {
                return None;
            }
            let single = h.len() == 1 && sys.clauses[h[0]].body.len() <= 1;
            let linear_user = sys.clauses[u[0]].body.len() == 1 && sys.clauses[u[0]].kind == ClauseKind::Rule;
            (single || linear_user).then(|| (p.name.clone(), h.clone(), u[0]))
        });
        let Some((name, defs, user)) = candidate else { break };
        let merged: Vec<HornClause> =
            defs.iter().map(|&d| subst_clause(&inline(&sys.clauses[d], &sys.clauses[user], &name))).collect();
        let mut clauses = Vec::with_capacity(sys.clauses.len());
        for (i, c) in sys.clauses.drain(..).enumerate() {
            if i == user {
                clauses.extend(merged.iter().cloned());
            } else if !defs.contains(&i) {
                clauses.push(c);
            }
        }
        sys.clauses = clauses;
        sys.preds.retain(|p| p.name != name);
    }
    sys
}

fn inline(def: &HornClause, user: &HornClause, pred: &str) -> HornClause {
    let mut fresh_taken: BTreeSet<String> =
        user.vars.iter().chain(def.vars.iter()).map(|(v, _)| v.clone()).collect();
    let user_vars: BTreeSet<&str> = user.vars.iter().map(|(v, _)| v.as_str()).collect();
    let mut rename = BTreeMap::new();
    let mut vars = user.vars.clone();
    for (v, sort) in &def.vars {
        let mut name = v.clone();
        if user_vars.contains(v.as_str()) {
            let mut n = 1;
            loop {
                let cand = format!("{v}!{n}");
                if !fresh_taken.contains(&cand) {
                    name = cand;
                    break;
                }
                n += 1;
            }
            fresh_taken.insert(name.clone());
            rename.insert(v.clone(), Term::Var(name.clone()));
        }
        vars.push((name, *sort));
    }
    let def = def.subst(&rename);
    let Head::Atom(def_head) = &def.head else { unreachable!("definition is a rule") };
    let pos = user.body.iter().position(|a| a.pred == pred).expect("predicate is used");
    let used = &user.body[pos];
    let mut body = user.body[..pos].to_vec();
    body.extend(def.body.iter().cloned());
    body.extend(user.body[pos + 1..].iter().cloned());
    let mut constraint = vec![def.constraint.clone()];
    for (s, t) in def_head.args.iter().zip(&used.args) {
        constraint.push(Term::eq(s.clone(), t.clone()));
    }
    constraint.push(user.constraint.clone());
    let mut origin = Provenance {
        edges: def.origin.edges.clone(),
        rules: def.origin.rules.clone(),
        property: user.origin.property,
    };
    origin.edges.extend(user.origin.edges.iter().copied());
    origin.rules.extend(user.origin.rules.iter().cloned());
    HornClause {
        vars,
        body,
        constraint: Term::and(constraint),
        head: user.head.clone(),
        kind: user.kind,
        origin,
    }
}
