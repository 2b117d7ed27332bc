//! Deliberate clause corruptions that the oracle must detect.

use std::fmt;

use crate::horn::{Head, HornSystem, Sort, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mutation {
    /// Replace a guard clause's constraint by its negation.
    FlipGuard(usize),
    /// Add one to (or negate) head argument `arg` of a rule.
    ShiftHead { clause: usize, arg: usize },
    /// Remove a rule.
    DropClause(usize),
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mutation::FlipGuard(c) => write!(f, "flip guard of clause {c}"),
            Mutation::ShiftHead { clause, arg } => write!(f, "shift head argument {arg} of clause {clause}"),
            Mutation::DropClause(c) => write!(f, "drop clause {c}"),
        }
    }
}

/// Candidate mutations, clause by clause. Guard clauses get their guard
/// flipped. Every rule also gets a shift of its first computed head
/// argument and a drop.
pub fn mutations(sys: &HornSystem) -> Vec<Mutation> {
    let mut out = Vec::new();
    for (i, c) in sys.clauses.iter().enumerate() {
        let Head::Atom(h) = &c.head else { continue };
        if c.origin.rules.iter().any(|r| r == "guard") && !c.constraint.is_true() {
            out.push(Mutation::FlipGuard(i));
        }
        if let Some(arg) = h.args.iter().position(|a| a.as_var().is_none()) {
            out.push(Mutation::ShiftHead { clause: i, arg });
        }
        out.push(Mutation::DropClause(i));
    }
    out
}

/// Applies one mutation.
pub fn apply(sys: &HornSystem, m: &Mutation) -> HornSystem {
    let mut sys = sys.clone();
    match m {
        Mutation::FlipGuard(i) => {
            let c = &mut sys.clauses[*i];
            c.constraint = Term::not(c.constraint.clone());
        }
        Mutation::ShiftHead { clause, arg } => {
            let sort = {
                let c = &sys.clauses[*clause];
                let Head::Atom(h) = &c.head else { return sys };
                sys.pred(&h.pred).map(|p| p.slots[*arg].sort).unwrap_or(Sort::Int)
            };
            if let Head::Atom(h) = &mut sys.clauses[*clause].head {
                let a = h.args[*arg].clone();
                h.args[*arg] = match sort {
                    Sort::Bool => Term::not(a),
                    Sort::Int => Term::add(a, Term::Int(1)),
                    Sort::Real => Term::add(a, Term::Real(1.into())),
                };
            }
        }
        Mutation::DropClause(i) => {
            sys.clauses.remove(*i);
        }
    }
    sys
}
