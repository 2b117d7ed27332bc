//! Bounded search for derivation trees witnessing a violated query.
//!
//! The search expands the leftmost open body atom first, tries clauses in
//! order of their shortest possible derivation, and asks an incremental
//! SMT session after every step whether the partial tree is still
//! consistent.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::horn::{smt_symbol, smt_term, Head, HornSystem, Sort, Term, Value};

use super::session::{SatResult, SmtSession};
use super::sexp;
use super::SolverError;

/// One clause application. Children follow the clause's body order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub clause: usize,
    pub assignment: BTreeMap<String, Value>,
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    pub fn height(&self) -> usize {
        1 + self.children.iter().map(TreeNode::height).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(TreeNode::size).sum::<usize>()
    }
}

/// A tree unfolding of the clauses rooted at a query whose goal fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationTree {
    pub root: TreeNode,
}

impl DerivationTree {
    /// Levels including the query node.
    pub fn height(&self) -> usize {
        self.root.height()
    }

    /// Levels of atoms below the query.
    pub fn depth(&self) -> usize {
        self.root.height() - 1
    }

    pub fn display<'a>(&'a self, sys: &'a HornSystem) -> TreeDisplay<'a> {
        TreeDisplay { tree: self, sys }
    }
}

fn eval(t: &Term, a: &BTreeMap<String, Value>) -> Option<Value> {
    t.eval(&|n| a.get(n).copied()).ok()
}

fn same(a: Value, b: Value) -> bool {
    a == b || matches!((a.as_rational(), b.as_rational()), (Some(x), Some(y)) if x == y)
}

/// Instantiated head (or goal) of a node.
pub fn node_label(sys: &HornSystem, n: &TreeNode) -> String {
    let c = &sys.clauses[n.clause];
    match &c.head {
        Head::Atom(a) => {
            let args: Vec<String> = a
                .args
                .iter()
                .map(|t| eval(t, &n.assignment).map(|v| v.to_string()).unwrap_or_else(|| "?".into()))
                .collect();
            format!("{}({})", a.pred, args.join(", "))
        }
        Head::Goal(g) => format!("violates {g}"),
    }
}

pub struct TreeDisplay<'a> {
    tree: &'a DerivationTree,
    sys: &'a HornSystem,
}

impl fmt::Display for TreeDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(f: &mut fmt::Formatter<'_>, sys: &HornSystem, n: &TreeNode, depth: usize) -> fmt::Result {
            let c = &sys.clauses[n.clause];
            writeln!(f, "{:indent$}{}    [clause {}: {}]", "", node_label(sys, n), n.clause, c.origin, indent = 2 * depth)?;
            for ch in &n.children {
                go(f, sys, ch, depth + 1)?;
            }
            Ok(())
        }
        go(f, self.sys, &self.tree.root, 0)
    }
}

/// Checks a tree locally: every constraint holds under its node's
/// assignment, every child's head equals the parent's body atom, leaves
/// are facts and the root's goal is false.
pub fn validate_tree(sys: &HornSystem, tree: &DerivationTree) -> Result<(), String> {
    fn node(sys: &HornSystem, n: &TreeNode, expect: Option<(&str, Vec<Value>)>) -> Result<(), String> {
        let c = sys.clauses.get(n.clause).ok_or_else(|| format!("no clause {}", n.clause))?;
        if !matches!(eval(&c.constraint, &n.assignment), Some(Value::Bool(true))) {
            return Err(format!("clause {}: constraint does not hold", n.clause));
        }
        if let Some((pred, vals)) = expect {
            let Head::Atom(h) = &c.head else { return Err(format!("clause {} is a query below the root", n.clause)) };
            if h.pred != pred {
                return Err(format!("clause {} derives {} where {} is needed", n.clause, h.pred, pred));
            }
            for (t, v) in h.args.iter().zip(&vals) {
                match eval(t, &n.assignment) {
                    Some(x) if same(x, *v) => {}
                    _ => return Err(format!("clause {}: head {} does not match its parent", n.clause, h)),
                }
            }
        }
        if n.children.len() != c.body.len() {
            return Err(format!("clause {}: {} children for {} body atoms", n.clause, n.children.len(), c.body.len()));
        }
        for (a, ch) in c.body.iter().zip(&n.children) {
            let vals: Option<Vec<Value>> = a.args.iter().map(|t| eval(t, &n.assignment)).collect();
            let vals = vals.ok_or_else(|| format!("clause {}: body atom {} is not determined", n.clause, a))?;
            node(sys, ch, Some((&a.pred, vals)))?;
        }
        Ok(())
    }
    let root = &tree.root;
    let c = sys.clauses.get(root.clause).ok_or("root clause missing")?;
    let Head::Goal(g) = &c.head else { return Err("root is not a query".into()) };
    if !matches!(eval(g, &root.assignment), Some(Value::Bool(false))) {
        return Err("root goal is not violated".into());
    }
    node(sys, root, None)
}

/// Search limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnfoldLimits {
    /// Largest tree height tried.
    pub max_depth: usize,
    /// Largest number of satisfiability checks per search.
    pub max_checks: usize,
}

impl Default for UnfoldLimits {
    fn default() -> Self {
        UnfoldLimits { max_depth: 16, max_checks: 200_000 }
    }
}

/// Result of a bounded search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Unfolding {
    Found(DerivationTree),
    /// No tree within the depth.
    None,
    /// The check budget ran out or the SMT backend gave up.
    Incomplete,
}

struct NodeRec {
    clause: usize,
    vars: Vec<(String, String, Sort)>,
    children: Vec<Option<usize>>,
}

struct Open {
    pred: usize,
    args: Vec<String>,
    left: usize,
    parent: usize,
    slot: usize,
}

struct Search<'a> {
    sys: &'a HornSystem,
    smt: &'a mut SmtSession,
    by_head: Vec<Vec<usize>>,
    /// Shortest derivation height of each clause.
    clause_h: Vec<usize>,
    nodes: Vec<NodeRec>,
    checks: usize,
    limits: UnfoldLimits,
    gave_up: bool,
}

/// Shortest derivation height of every predicate, ignoring constraints.
fn min_heights(sys: &HornSystem, pred_idx: &HashMap<&str, usize>) -> Vec<usize> {
    let mut h = vec![usize::MAX; sys.preds.len()];
    let mut changed = true;
    while changed {
        changed = false;
        for c in sys.rules() {
            let Head::Atom(a) = &c.head else { continue };
            let mut m = 0usize;
            for b in &c.body {
                m = m.max(h[pred_idx[b.pred.as_str()]]);
            }
            if m == usize::MAX {
                continue;
            }
            let p = pred_idx[a.pred.as_str()];
            if m + 1 < h[p] {
                h[p] = m + 1;
                changed = true;
            }
        }
    }
    h
}

impl<'a> Search<'a> {
    /// Declares the variables of a new node and returns its renaming.
    fn instantiate(&mut self, ci: usize) -> Result<(usize, BTreeMap<String, Term>), SolverError> {
        let id = self.nodes.len();
        let c = &self.sys.clauses[ci];
        let mut map = BTreeMap::new();
        let mut vars = Vec::new();
        for (v, s) in &c.vars {
            let name = format!("{v}@{id}");
            self.smt.send(&format!("(declare-const {} {})", smt_symbol(&name), s.smt_name()))?;
            map.insert(v.clone(), Term::Var(name.clone()));
            vars.push((v.clone(), name, *s));
        }
        self.nodes.push(NodeRec { clause: ci, vars, children: vec![None; c.body.len()] });
        Ok((id, map))
    }

    fn check(&mut self) -> Result<bool, SolverError> {
        self.checks += 1;
        if self.checks > self.limits.max_checks {
            self.gave_up = true;
            return Ok(false);
        }
        match self.smt.check_sat()? {
            SatResult::Sat => Ok(true),
            SatResult::Unsat => Ok(false),
            SatResult::Unknown => {
                self.gave_up = true;
                Ok(false)
            }
        }
    }

    fn children_of(&self, ci: usize, id: usize, map: &BTreeMap<String, Term>, left: usize) -> Vec<Open> {
        let c = &self.sys.clauses[ci];
        c.body
            .iter()
            .enumerate()
            .rev()
            .map(|(j, a)| Open {
                pred: self.sys.preds.iter().position(|p| p.name == a.pred).expect("declared"),
                args: a.args.iter().map(|t| smt_term(&t.subst(map))).collect(),
                left: left - 1,
                parent: id,
                slot: j,
            })
            .collect()
    }

    fn dfs(&mut self, stack: &mut Vec<Open>) -> Result<bool, SolverError> {
        let Some(o) = stack.pop() else { return Ok(true) };
        let candidates = self.by_head[o.pred].clone();
        for ci in candidates {
            if self.gave_up {
                break;
            }
            if self.clause_h[ci] > o.left {
                continue;
            }
            self.smt.send("(push 1)")?;
            let (id, map) = self.instantiate(ci)?;
            let c = &self.sys.clauses[ci];
            let Head::Atom(h) = &c.head else { unreachable!("rules only") };
            let mut parts: Vec<String> = h
                .args
                .iter()
                .zip(&o.args)
                .map(|(t, a)| format!("(= {} {})", smt_term(&t.subst(&map)), a))
                .collect();
            parts.push(smt_term(&c.constraint.subst(&map)));
            self.smt.send(&format!("(assert (and {}))", parts.join(" ")))?;
            if self.check()? {
                self.nodes[o.parent].children[o.slot] = Some(id);
                let kids = self.children_of(ci, id, &map, o.left);
                let n = kids.len();
                stack.extend(kids);
                if self.dfs(stack)? {
                    return Ok(true);
                }
                stack.truncate(stack.len() - n);
                self.nodes[o.parent].children[o.slot] = None;
            }
            self.nodes.truncate(id);
            self.smt.send("(pop 1)")?;
        }
        stack.push(o);
        Ok(false)
    }

    fn build(&self, id: usize, values: &BTreeMap<String, Value>) -> TreeNode {
        let n = &self.nodes[id];
        TreeNode {
            clause: n.clause,
            assignment: n
                .vars
                .iter()
                .filter_map(|(v, name, _)| values.get(name).map(|x| (v.clone(), *x)))
                .collect(),
            children: n.children.iter().map(|c| self.build(c.expect("complete tree"), values)).collect(),
        }
    }

    fn model(&mut self) -> Result<BTreeMap<String, Value>, SolverError> {
        let names: Vec<(String, Sort)> =
            self.nodes.iter().flat_map(|n| n.vars.iter().map(|(_, s, so)| (s.clone(), *so))).collect();
        let terms: Vec<String> = names.iter().map(|(n, _)| smt_symbol(n)).collect();
        let vals = self.smt.get_value(&terms)?;
        let mut out = BTreeMap::new();
        for ((n, s), v) in names.into_iter().zip(vals) {
            let v = sexp::to_value(&v, s == Sort::Real)
                .ok_or_else(|| SolverError::Protocol(format!("cannot read value `{v}` of `{n}`")))?;
            out.insert(n, v);
        }
        Ok(out)
    }
}

/// Searches for a derivation tree whose atoms below the violated query
/// span at most `depth` levels.
pub fn find_unfolding(
    sys: &HornSystem,
    depth: usize,
    smt: &mut SmtSession,
    limits: UnfoldLimits,
) -> Result<Unfolding, SolverError> {
    let pred_idx: HashMap<&str, usize> = sys.preds.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
    let min_height = min_heights(sys, &pred_idx);
    let clause_h: Vec<usize> = sys
        .clauses
        .iter()
        .map(|c| {
            c.body
                .iter()
                .map(|b| min_height[pred_idx[b.pred.as_str()]])
                .max()
                .map(|m| m.saturating_add(1))
                .unwrap_or(1)
        })
        .collect();
    let mut by_head: Vec<Vec<usize>> = vec![Vec::new(); sys.preds.len()];
    for (i, c) in sys.clauses.iter().enumerate() {
        if let Head::Atom(a) = &c.head {
            by_head[pred_idx[a.pred.as_str()]].push(i);
        }
    }
    for cs in &mut by_head {
        cs.sort_by_key(|c| (clause_h[*c], *c));
    }
    let mut s = Search { sys, smt, by_head, clause_h, nodes: Vec::new(), checks: 0, limits, gave_up: false };
    for (qi, q) in sys.clauses.iter().enumerate() {
        let Head::Goal(goal) = &q.head else { continue };
        if s.clause_h[qi] > depth + 1 {
            continue;
        }
        s.smt.send("(push 1)")?;
        let (id, map) = s.instantiate(qi)?;
        let body = smt_term(&Term::and(vec![q.constraint.clone(), Term::not(goal.clone())]).subst(&map));
        s.smt.send(&format!("(assert {body})"))?;
        let found = if s.check()? {
            let mut stack = s.children_of(qi, id, &map, depth + 1);
            s.dfs(&mut stack)?
        } else {
            false
        };
        if found {
            let values = s.model()?;
            let tree = DerivationTree { root: s.build(id, &values) };
            // Unwind every open scope.
            let open = s.nodes.len();
            for _ in 0..open {
                s.smt.send("(pop 1)")?;
            }
            return Ok(Unfolding::Found(tree));
        }
        s.nodes.clear();
        s.smt.send("(pop 1)")?;
        if s.gave_up {
            return Ok(Unfolding::Incomplete);
        }
    }
    Ok(if s.gave_up { Unfolding::Incomplete } else { Unfolding::None })
}

/// Iterative deepening over depths 1, 2, 4, ... up to `limits.max_depth`.
pub fn find_unfolding_deepening(
    sys: &HornSystem,
    smt: &mut SmtSession,
    limits: UnfoldLimits,
) -> Result<Unfolding, SolverError> {
    let mut d = 1;
    loop {
        let d_now = d.min(limits.max_depth);
        match find_unfolding(sys, d_now, smt, limits)? {
            Unfolding::None if d_now < limits.max_depth => d *= 2,
            other => return Ok(other),
        }
    }
}
