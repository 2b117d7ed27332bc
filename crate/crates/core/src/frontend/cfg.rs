//! Control-flow graphs of transitions.

use std::collections::BTreeSet;
use std::fmt;

use super::ast::{Expr, IndexDomain, Quantified, SetOpKind};
use crate::horn::{Sort, Value};

/// Name given to the final point when the source does not label it.
pub const EXIT_LABEL: &str = "exit";

pub type PointId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScalarVar {
    pub name: String,
    pub sort: Sort,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArrayVar {
    pub name: String,
    /// Sort of the stored values.
    pub sort: Sort,
    pub dims: Vec<IndexDomain>,
    /// Known initial value of every cell.
    pub init: Option<Value>,
}

impl ArrayVar {
    /// Every dimension has a `0..n` range.
    pub fn is_ranged(&self) -> bool {
        self.dims.iter().all(|d| matches!(d, IndexDomain::Range(_)))
    }

    pub fn index_sorts(&self) -> Vec<Sort> {
        self.dims.iter().map(|d| d.sort()).collect()
    }

    pub fn range_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for d in &self.dims {
            if let IndexDomain::Range(e) = d {
                e.scalar_vars(&mut out);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ControlPoint {
    pub name: String,
    /// True for labelled points, the entry and the exit.
    pub named: bool,
    /// Scalars present at this point, in declaration order.
    pub vars: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Transition {
    /// `target := value`. Before normalization `value` may read arrays.
    Assign { target: String, value: Expr },
    /// `assume(cond)`; also the branches of `if` and `while`.
    Guard(Expr),
    /// `target := array[index]`; indices are variables or literals.
    Read { target: String, array: String, index: Vec<Expr> },
    /// `array[index] := value`; after normalization operands only.
    Write { array: String, index: Vec<Expr>, value: Expr },
    /// Forget scalar variables.
    Kill(Vec<String>),
    /// Nondeterministic (or annotated) initial contents.
    Init { array: String },
    SetOp { kind: SetOpKind, target: String, lhs: String, rhs: String },
    /// `assume forall ...`: restricts the current state.
    AssumeForall(Quantified),
}

impl Transition {
    /// Scalars read by the transition.
    pub fn uses(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        match self {
            Transition::Assign { value, .. } => value.scalar_vars(&mut out),
            Transition::Guard(c) => c.scalar_vars(&mut out),
            Transition::Read { index, .. } => index.iter().for_each(|i| i.scalar_vars(&mut out)),
            Transition::Write { index, value, .. } => {
                index.iter().for_each(|i| i.scalar_vars(&mut out));
                value.scalar_vars(&mut out);
            }
            Transition::AssumeForall(q) => {
                q.guard.scalar_vars(&mut out);
                q.conclusion.scalar_vars(&mut out);
                for (b, _) in &q.binders {
                    out.remove(b);
                }
            }
            Transition::Kill(_) | Transition::Init { .. } | Transition::SetOp { .. } => {}
        }
        out
    }

    /// Scalar written by the transition.
    pub fn def(&self) -> Option<&str> {
        match self {
            Transition::Assign { target, .. } | Transition::Read { target, .. } => Some(target),
            _ => None,
        }
    }

    /// Arrays read or written.
    pub fn arrays(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        match self {
            Transition::Assign { value, .. } => value.arrays(&mut out),
            Transition::Guard(c) => c.arrays(&mut out),
            Transition::Read { array, index, .. } => {
                out.insert(array.clone());
                index.iter().for_each(|i| i.arrays(&mut out));
            }
            Transition::Write { array, index, value } => {
                out.insert(array.clone());
                index.iter().for_each(|i| i.arrays(&mut out));
                value.arrays(&mut out);
            }
            Transition::Init { array } => {
                out.insert(array.clone());
            }
            Transition::SetOp { target, lhs, rhs, .. } => {
                out.extend([target.clone(), lhs.clone(), rhs.clone()]);
            }
            Transition::AssumeForall(q) => {
                q.guard.arrays(&mut out);
                q.conclusion.arrays(&mut out);
            }
            Transition::Kill(_) => {}
        }
        out
    }

    /// One transition in the shape the abstraction rules expect.
    pub fn is_normal(&self) -> bool {
        match self {
            Transition::Assign { value, .. } => !value.has_select(),
            Transition::Guard(c) => !c.has_select(),
            Transition::Read { index, .. } => !index.iter().any(Expr::has_select),
            Transition::Write { index, value, .. } => !index.iter().any(Expr::has_select) && !value.has_select(),
            _ => true,
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx = |index: &[Expr]| -> String { index.iter().map(|i| format!("[{i}]")).collect() };
        match self {
            Transition::Assign { target, value } => write!(f, "{target} := {value}"),
            Transition::Guard(c) => write!(f, "assume({c})"),
            Transition::Read { target, array, index } => {
                write!(f, "{target} := {array}{}", idx(index))
            }
            Transition::Write { array, index, value } => {
                write!(f, "{array}{} := {value}", idx(index))
            }
            Transition::Kill(vs) => write!(f, "kill({})", vs.join(", ")),
            Transition::Init { array } => write!(f, "init({array})"),
            Transition::SetOp { kind, target, lhs, rhs } => {
                let k = match kind {
                    SetOpKind::Union => "union",
                    SetOpKind::Intersection => "intersection",
                };
                write!(f, "{target} := {k}({lhs}, {rhs})")
            }
            Transition::AssumeForall(q) => write!(f, "assume {q}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: PointId,
    pub dst: PointId,
    pub t: Transition,
}

/// A property resolved to a control point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Property {
    pub point: PointId,
    pub body: Quantified,
    /// Hints guide the solver; they are proved like properties.
    pub hint: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cfg {
    pub scalars: Vec<ScalarVar>,
    pub arrays: Vec<ArrayVar>,
    pub points: Vec<ControlPoint>,
    pub edges: Vec<Edge>,
    pub entry: PointId,
    pub exits: Vec<PointId>,
    pub props: Vec<Property>,
}

impl Cfg {
    pub fn point_by_name(&self, name: &str) -> Option<PointId> {
        self.points.iter().position(|p| p.name == name)
    }

    pub fn out_edges(&self, p: PointId) -> impl Iterator<Item = (EdgeId, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.src == p)
    }

    pub fn in_edges(&self, p: PointId) -> impl Iterator<Item = (EdgeId, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.dst == p)
    }

    pub fn scalar(&self, name: &str) -> Option<&ScalarVar> {
        self.scalars.iter().find(|s| s.name == name)
    }

    pub fn array(&self, name: &str) -> Option<&ArrayVar> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn array_index(&self, name: &str) -> Option<usize> {
        self.arrays.iter().position(|a| a.name == name)
    }

    pub fn scalar_sort(&self, name: &str) -> Option<Sort> {
        self.scalar(name).map(|s| s.sort)
    }

    /// Scalars that bound some array; they are live everywhere.
    pub fn range_vars(&self) -> BTreeSet<String> {
        self.arrays.iter().flat_map(|a| a.range_vars()).collect()
    }

    /// Orders a set of scalars by declaration.
    pub fn ordered(&self, set: &BTreeSet<String>) -> Vec<String> {
        self.scalars.iter().filter(|s| set.contains(&s.name)).map(|s| s.name.clone()).collect()
    }

    /// Points reachable from the entry.
    pub fn reachable(&self) -> BTreeSet<PointId> {
        let mut seen = BTreeSet::from([self.entry]);
        let mut stack = vec![self.entry];
        while let Some(p) = stack.pop() {
            for (_, e) in self.out_edges(p) {
                if seen.insert(e.dst) {
                    stack.push(e.dst);
                }
            }
        }
        seen
    }

    /// Arrays initialized at each point (must-analysis over the graph).
    pub fn initialized_arrays(&self) -> Vec<BTreeSet<String>> {
        let all: BTreeSet<String> = self.arrays.iter().map(|a| a.name.clone()).collect();
        let mut state: Vec<Option<BTreeSet<String>>> = vec![None; self.points.len()];
        state[self.entry] = Some(BTreeSet::new());
        let mut changed = true;
        while changed {
            changed = false;
            for e in &self.edges {
                let Some(src) = state[e.src].clone() else { continue };
                let mut out = src;
                if let Transition::Init { array } = &e.t {
                    out.insert(array.clone());
                }
                let new = match &state[e.dst] {
                    None => out,
                    Some(old) => old.intersection(&out).cloned().collect(),
                };
                if state[e.dst].as_ref() != Some(&new) {
                    if e.dst == self.entry {
                        continue;
                    }
                    state[e.dst] = Some(new);
                    changed = true;
                }
            }
        }
        state.into_iter().map(|s| s.unwrap_or_else(|| all.clone())).collect()
    }
}

impl fmt::Display for Cfg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.points.iter().enumerate() {
            let mark = if i == self.entry { " (entry)" } else if self.exits.contains(&i) { " (exit)" } else { "" };
            writeln!(f, "{}{}: [{}]", p.name, mark, p.vars.join(", "))?;
            for (id, e) in self.out_edges(i) {
                writeln!(f, "  e{id}: {} -> {}", e.t, self.points[e.dst].name)?;
            }
        }
        Ok(())
    }
}
