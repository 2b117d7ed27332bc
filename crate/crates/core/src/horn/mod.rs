//! Constrained Horn clause IR with its simplifier and SMT-LIB printer.

mod emit;
mod simplify;
mod term;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use emit::{clause_body_and_head, emit_smtlib, smt_symbol, smt_term};
pub use simplify::{coalesce, simplify, substitute_equalities};
pub use term::{CmpOp, EvalError, Sort, Term, Value};
pub(crate) use term::{fmt_real, is_negative};

/// What a predicate argument position stands for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotKind {
    /// A program scalar.
    Scalar(String),
    /// Index component `dim` of distinguished cell `cell` of an index group.
    /// A group is one array, or several arrays sharing their index.
    CellIndex { group: usize, cell: usize, dim: usize },
    /// The value of `array` at distinguished cell `cell` of its group.
    CellValue { array: String, cell: usize },
    /// The sampled value `z` of a count block.
    CountSample { array: String },
    /// Number of cells of `array` holding the sample.
    Count { array: String },
    /// Number of cells of the original contents of `array` holding the sample.
    OrigCount { array: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Slot {
    pub name: String,
    pub sort: Sort,
    pub kind: SlotKind,
}

/// A predicate and the layout of its argument vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PredicateSig {
    pub name: String,
    pub slots: Vec<Slot>,
    /// Control point this predicate stands for, if any. Intermediate
    /// predicates introduced by count tracking have none.
    pub point: Option<usize>,
    /// Protects the predicate from inlining (named control points).
    pub keep: bool,
}

impl PredicateSig {
    pub fn arity(&self) -> usize {
        self.slots.len()
    }

    pub fn sorts(&self) -> Vec<Sort> {
        self.slots.iter().map(|s| s.sort).collect()
    }

    pub fn slot_of(&self, kind: &SlotKind) -> Option<usize> {
        self.slots.iter().position(|s| &s.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Atom {
        Atom { pred: pred.into(), args }
    }

    pub fn subst(&self, map: &BTreeMap<String, Term>) -> Atom {
        Atom { pred: self.pred.clone(), args: self.args.iter().map(|a| a.subst(map)).collect() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Head {
    Atom(Atom),
    /// Query: the body must imply this formula.
    Goal(Term),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClauseKind {
    Rule,
    Query,
    Hint,
}

/// Where a clause came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Provenance {
    /// CFG edges covered, in execution order.
    pub edges: Vec<usize>,
    /// Rule names, one per merged clause.
    pub rules: Vec<String>,
    /// Property index for queries and hints.
    pub property: Option<usize>,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = self.property {
            write!(f, "property {p}")?;
            if !self.rules.is_empty() {
                f.write_str(", ")?;
            }
        }
        if !self.edges.is_empty() {
            let e: Vec<String> = self.edges.iter().map(|e| format!("e{e}")).collect();
            write!(f, "edges {}, ", e.join(" "))?;
        }
        write!(f, "{}", self.rules.join(" + "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HornClause {
    /// Universally quantified variables, in a deterministic order.
    pub vars: Vec<(String, Sort)>,
    pub body: Vec<Atom>,
    pub constraint: Term,
    pub head: Head,
    pub kind: ClauseKind,
    pub origin: Provenance,
}

impl HornClause {
    pub fn is_query(&self) -> bool {
        matches!(self.head, Head::Goal(_))
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    pub fn head_pred(&self) -> Option<&str> {
        match &self.head {
            Head::Atom(a) => Some(&a.pred),
            Head::Goal(_) => None,
        }
    }

    pub fn sort_of(&self, var: &str) -> Option<Sort> {
        self.vars.iter().find(|(v, _)| v == var).map(|(_, s)| *s)
    }

    /// Variables mentioned anywhere in the clause.
    pub fn used_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for a in &self.body {
            for t in &a.args {
                t.collect_vars(&mut out);
            }
        }
        self.constraint.collect_vars(&mut out);
        match &self.head {
            Head::Atom(a) => a.args.iter().for_each(|t| t.collect_vars(&mut out)),
            Head::Goal(g) => g.collect_vars(&mut out),
        }
        out
    }

    /// Drops universals that no longer occur.
    pub fn prune_vars(&mut self) {
        let used = self.used_vars();
        self.vars.retain(|(v, _)| used.contains(v));
    }

    pub fn subst(&self, map: &BTreeMap<String, Term>) -> HornClause {
        HornClause {
            vars: self.vars.iter().filter(|(v, _)| !map.contains_key(v)).cloned().collect(),
            body: self.body.iter().map(|a| a.subst(map)).collect(),
            constraint: self.constraint.subst(map),
            head: match &self.head {
                Head::Atom(a) => Head::Atom(a.subst(map)),
                Head::Goal(g) => Head::Goal(g.subst(map)),
            },
            kind: self.kind,
            origin: self.origin.clone(),
        }
    }
}

impl fmt::Display for HornClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.body.iter().map(|a| a.to_string()).collect();
        if !self.constraint.is_true() || parts.is_empty() {
            parts.push(self.constraint.to_string());
        }
        let head = match &self.head {
            Head::Atom(a) => a.to_string(),
            Head::Goal(g) => g.to_string(),
        };
        write!(f, "{} ==> {}", parts.join(" /\\ "), head)
    }
}

/// A Horn clause system: predicate signatures plus clauses. Rules come
/// first in edge order; queries and hints follow in property order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HornSystem {
    pub preds: Vec<PredicateSig>,
    pub clauses: Vec<HornClause>,
}

impl HornSystem {
    pub fn pred(&self, name: &str) -> Option<&PredicateSig> {
        self.preds.iter().find(|p| p.name == name)
    }

    pub fn queries(&self) -> impl Iterator<Item = &HornClause> {
        self.clauses.iter().filter(|c| c.is_query())
    }

    pub fn rules(&self) -> impl Iterator<Item = &HornClause> {
        self.clauses.iter().filter(|c| !c.is_query())
    }

    /// Checks that atoms match their declarations and that variable sorts agree.
    pub fn validate(&self) -> Result<(), String> {
        let mut names = BTreeSet::new();
        for p in &self.preds {
            if !names.insert(p.name.as_str()) {
                return Err(format!("predicate `{}` declared twice", p.name));
            }
        }
        for (i, c) in self.clauses.iter().enumerate() {
            let declared: BTreeSet<&str> = c.vars.iter().map(|(v, _)| v.as_str()).collect();
            for v in c.used_vars() {
                if !declared.contains(v.as_str()) {
                    return Err(format!("clause {i}: variable `{v}` is not quantified"));
                }
            }
            let atoms = c.body.iter().chain(match &c.head {
                Head::Atom(a) => Some(a),
                Head::Goal(_) => None,
            });
            for a in atoms {
                let sig = self
                    .pred(&a.pred)
                    .ok_or_else(|| format!("clause {i}: undeclared predicate `{}`", a.pred))?;
                if sig.arity() != a.args.len() {
                    return Err(format!(
                        "clause {i}: `{}` applied to {} arguments, expects {}",
                        a.pred,
                        a.args.len(),
                        sig.arity()
                    ));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for HornSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.clauses.iter().enumerate() {
            writeln!(f, "[{i}] {c}    ; {}", c.origin)?;
        }
        Ok(())
    }
}
