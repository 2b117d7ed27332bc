//! Bounded concrete interpreter over CFGs.

use std::collections::{BTreeMap, HashSet, VecDeque};

use crate::abstraction::expr_to_term;
use crate::frontend::{ArrayVar, Cfg, EdgeId, Expr, IndexDomain, PointId, Property, Quantified, SetOpKind, Transition};
use crate::horn::{Sort, Term, Value};

use super::OracleError;

/// Exploration limits: scalar inputs and array contents range over
/// `[lo, hi]`, bounded arrays hold at most `max_len` cells in total and
/// unbounded maps are indexed by `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bounds {
    pub max_len: usize,
    pub lo: i64,
    pub hi: i64,
    /// Stop after this many distinct states.
    pub max_states: usize,
    /// Refuse to enumerate more initial contents than this for one array.
    pub max_contents: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { max_len: 3, lo: 0, hi: 3, max_states: 2_000_000, max_contents: 100_000 }
    }
}

impl Bounds {
    /// All values of `sort` within the bounds.
    pub fn values(&self, sort: Sort) -> Vec<Value> {
        match sort {
            Sort::Int => (self.lo..=self.hi).map(Value::Int).collect(),
            Sort::Real => (self.lo..=self.hi).map(|i| Value::Real(i.into())).collect(),
            Sort::Bool => vec![Value::Bool(false), Value::Bool(true)],
        }
    }

    /// Values tried for quantified variables and unconstrained clause
    /// variables: a margin around the value range and every array index.
    pub fn wide_values(&self, sort: Sort) -> Vec<Value> {
        let lo = self.lo.min(0) - 2;
        let hi = self.hi.max(self.max_len as i64) + 2;
        match sort {
            Sort::Int => (lo..=hi).map(Value::Int).collect(),
            Sort::Real => (lo..=hi).map(|i| Value::Real(i.into())).collect(),
            Sort::Bool => vec![Value::Bool(false), Value::Bool(true)],
        }
    }
}

/// One array dimension: indices `lo .. lo + len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dim {
    pub lo: i64,
    pub len: usize,
}

/// Concrete array contents in row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArrayVal {
    pub dims: Vec<Dim>,
    pub index_sorts: Vec<Sort>,
    pub values: Vec<Value>,
}

impl ArrayVal {
    pub fn size(&self) -> usize {
        self.dims.iter().map(|d| d.len).product()
    }

    /// Position of `index`, if inside the domain.
    pub fn offset(&self, index: &[Value]) -> Option<usize> {
        if index.len() != self.dims.len() {
            return None;
        }
        let mut off = 0usize;
        for (d, v) in self.dims.iter().zip(index) {
            let i = match v {
                Value::Int(i) => *i,
                Value::Real(r) if r.is_integer() => r.to_integer(),
                _ => return None,
            };
            let rel = i.checked_sub(d.lo)?;
            if rel < 0 || rel as usize >= d.len {
                return None;
            }
            off = off * d.len + rel as usize;
        }
        Some(off)
    }

    pub fn get(&self, index: &[Value]) -> Option<Value> {
        self.offset(index).map(|o| self.values[o])
    }

    /// The index at position `off`.
    pub fn index_at(&self, mut off: usize) -> Vec<Value> {
        let mut out = vec![Value::Int(0); self.dims.len()];
        for (k, d) in self.dims.iter().enumerate().rev() {
            let i = d.lo + (off % d.len) as i64;
            off /= d.len;
            out[k] = match self.index_sorts[k] {
                Sort::Real => Value::Real(i.into()),
                _ => Value::Int(i),
            };
        }
        out
    }

    pub fn count(&self, v: &Value) -> i64 {
        self.values.iter().filter(|x| *x == v).count() as i64
    }
}

/// A program state. Scalars outside the point's live set are `None`;
/// `orig` keeps the initial contents of every array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub scalars: Vec<Option<Value>>,
    pub arrays: Vec<Option<ArrayVal>>,
    pub orig: Vec<Option<ArrayVal>>,
}

impl State {
    pub fn scalar(&self, cfg: &Cfg, name: &str) -> Option<Value> {
        cfg.scalars.iter().position(|s| s.name == name).and_then(|i| self.scalars[i])
    }

    pub fn array(&self, cfg: &Cfg, name: &str) -> Option<&ArrayVal> {
        cfg.array_index(name).and_then(|i| self.arrays[i].as_ref())
    }

    pub fn orig_array(&self, cfg: &Cfg, name: &str) -> Option<&ArrayVal> {
        cfg.array_index(name).and_then(|i| self.orig[i].as_ref())
    }
}

/// Why an evaluation could not produce a value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stuck {
    OutOfBounds,
    Undefined(String),
}

/// Evaluates an expression; `binders` shadow scalars.
pub fn eval_expr(cfg: &Cfg, st: &State, e: &Expr, binders: &BTreeMap<String, Value>) -> Result<Value, Stuck> {
    let oob = "\u{0}oob";
    let leaf = |x: &Expr| -> Result<Term, String> {
        match x {
            Expr::Var(v) => binders
                .get(v)
                .copied()
                .or_else(|| st.scalar(cfg, v))
                .map(Value::to_term)
                .ok_or_else(|| format!("`{v}` has no value")),
            Expr::Select { array, index } => {
                let idx: Vec<Value> = index
                    .iter()
                    .map(|i| eval_expr(cfg, st, i, binders))
                    .collect::<Result<_, _>>()
                    .map_err(|s| match s {
                        Stuck::OutOfBounds => oob.to_string(),
                        Stuck::Undefined(m) => m,
                    })?;
                let a = st.array(cfg, array).ok_or_else(|| format!("`{array}` is not initialized"))?;
                a.get(&idx).map(Value::to_term).ok_or_else(|| oob.to_string())
            }
            Expr::Count { array, orig, value } => {
                let v = eval_expr(cfg, st, value, binders).map_err(|s| match s {
                    Stuck::OutOfBounds => oob.to_string(),
                    Stuck::Undefined(m) => m,
                })?;
                let a = if *orig { st.orig_array(cfg, array) } else { st.array(cfg, array) };
                let a = a.ok_or_else(|| format!("`{array}` is not initialized"))?;
                Ok(Term::Int(a.count(&v)))
            }
            _ => unreachable!(),
        }
    };
    let t = expr_to_term(e, &leaf).map_err(|m| if m == oob { Stuck::OutOfBounds } else { Stuck::Undefined(m) })?;
    let v = t.eval(&|_| None).map_err(|e| Stuck::Undefined(e.to_string()))?;
    let sort = crate::frontend::expr_sort(cfg, e);
    Ok(v.coerce(sort).unwrap_or(v))
}

/// Values tried for a quantified variable.
fn binder_values(bounds: &Bounds, sort: Sort, st: &State) -> Vec<Value> {
    let mut vals: Vec<Value> = bounds.wide_values(sort);
    if sort != Sort::Bool {
        for a in st.arrays.iter().chain(&st.orig).flatten() {
            for v in &a.values {
                if let Some(v) = v.coerce(sort) {
                    if !vals.contains(&v) {
                        vals.push(v);
                    }
                }
            }
        }
    }
    vals
}

/// Evaluates a quantified formula by enumeration. Instances whose guard or
/// conclusion reads outside an array are skipped. Returns the first
/// failing instance.
pub fn find_failure(
    cfg: &Cfg,
    st: &State,
    q: &Quantified,
    bounds: &Bounds,
) -> Result<Option<BTreeMap<String, Value>>, Stuck> {
    let domains: Vec<Vec<Value>> = q.binders.iter().map(|(_, s)| binder_values(bounds, *s, st)).collect();
    let mut pos = vec![0usize; domains.len()];
    if domains.iter().any(|d| d.is_empty()) {
        return Ok(None);
    }
    loop {
        let env: BTreeMap<String, Value> =
            q.binders.iter().zip(&pos).enumerate().map(|(k, ((n, _), p))| (n.clone(), domains[k][*p])).collect();
        match eval_expr(cfg, st, &q.guard, &env) {
            Ok(Value::Bool(true)) => match eval_expr(cfg, st, &q.conclusion, &env) {
                Ok(Value::Bool(false)) => return Ok(Some(env)),
                Ok(_) | Err(Stuck::OutOfBounds) => {}
                Err(e) => return Err(e),
            },
            Ok(_) | Err(Stuck::OutOfBounds) => {}
            Err(e) => return Err(e),
        }
        // Next assignment.
        let mut k = 0;
        loop {
            if k == pos.len() {
                return Ok(None);
            }
            pos[k] += 1;
            if pos[k] < domains[k].len() {
                break;
            }
            pos[k] = 0;
            k += 1;
        }
    }
}

/// Shape of an array in a state, or `None` when the input is skipped.
fn shape(cfg: &Cfg, st: &State, a: &ArrayVar, bounds: &Bounds) -> Result<Option<Vec<Dim>>, OracleError> {
    let mut dims = Vec::new();
    let mut bounded = 1usize;
    for d in &a.dims {
        match d {
            IndexDomain::Range(n) => {
                let len = match eval_expr(cfg, st, n, &BTreeMap::new()) {
                    Ok(Value::Int(n)) => n.max(0) as usize,
                    _ => return Ok(None),
                };
                bounded = bounded.saturating_mul(len);
                dims.push(Dim { lo: 0, len });
            }
            IndexDomain::Total(_) => dims.push(Dim { lo: bounds.lo, len: (bounds.hi - bounds.lo + 1).max(0) as usize }),
        }
    }
    if a.is_ranged() && bounded > bounds.max_len {
        return Ok(None);
    }
    Ok(Some(dims))
}

/// Every initial content of `a` in `st`, or its annotated constant.
pub fn initial_contents(cfg: &Cfg, st: &State, a: &ArrayVar, bounds: &Bounds) -> Result<Vec<ArrayVal>, OracleError> {
    let Some(dims) = shape(cfg, st, a, bounds)? else { return Ok(Vec::new()) };
    let size: usize = dims.iter().map(|d| d.len).product();
    let index_sorts = a.index_sorts();
    if let Some(v) = a.init {
        let v = v.coerce(a.sort).unwrap_or(v);
        return Ok(vec![ArrayVal { dims, index_sorts, values: vec![v; size] }]);
    }
    let vals = bounds.values(a.sort);
    let total = (vals.len() as f64).powi(size as i32);
    if total > bounds.max_contents as f64 {
        return Err(OracleError::TooLarge(format!(
            "array `{}` has {} possible initial contents",
            a.name, total
        )));
    }
    let mut out = Vec::new();
    let mut pos = vec![0usize; size];
    loop {
        out.push(ArrayVal { dims: dims.clone(), index_sorts: index_sorts.clone(), values: pos.iter().map(|p| vals[*p]).collect() });
        let mut k = 0;
        loop {
            if k == size {
                return Ok(out);
            }
            pos[k] += 1;
            if pos[k] < vals.len() {
                break;
            }
            pos[k] = 0;
            k += 1;
        }
    }
}

fn set_scalar(cfg: &Cfg, st: &mut State, name: &str, v: Value) {
    if let Some(i) = cfg.scalars.iter().position(|s| s.name == name) {
        let v = v.coerce(cfg.scalars[i].sort).unwrap_or(v);
        st.scalars[i] = Some(v);
    }
}

fn eval_index(cfg: &Cfg, st: &State, index: &[Expr]) -> Option<Vec<Value>> {
    index.iter().map(|i| eval_expr(cfg, st, i, &BTreeMap::new()).ok()).collect()
}

/// Successor states along one transition. `choice` fixes the contents
/// chosen by `Init` (used when replaying a trace).
pub fn successors(
    cfg: &Cfg,
    st: &State,
    t: &Transition,
    bounds: &Bounds,
    choice: Option<&BTreeMap<String, ArrayVal>>,
) -> Result<Vec<State>, OracleError> {
    let mut s = st.clone();
    match t {
        Transition::Assign { target, value } => match eval_expr(cfg, st, value, &BTreeMap::new()) {
            Ok(v) => set_scalar(cfg, &mut s, target, v),
            Err(_) => return Ok(Vec::new()),
        },
        Transition::Guard(c) => match eval_expr(cfg, st, c, &BTreeMap::new()) {
            Ok(Value::Bool(true)) => {}
            _ => return Ok(Vec::new()),
        },
        Transition::Read { target, array, index } => {
            let Some(idx) = eval_index(cfg, st, index) else { return Ok(Vec::new()) };
            let Some(v) = st.array(cfg, array).and_then(|a| a.get(&idx)) else { return Ok(Vec::new()) };
            set_scalar(cfg, &mut s, target, v);
        }
        Transition::Write { array, index, value } => {
            let Some(idx) = eval_index(cfg, st, index) else { return Ok(Vec::new()) };
            let Ok(v) = eval_expr(cfg, st, value, &BTreeMap::new()) else { return Ok(Vec::new()) };
            let ai = cfg.array_index(array).expect("declared array");
            let sort = cfg.arrays[ai].sort;
            let Some(a) = s.arrays[ai].as_mut() else { return Ok(Vec::new()) };
            let Some(off) = a.offset(&idx) else { return Ok(Vec::new()) };
            a.values[off] = v.coerce(sort).unwrap_or(v);
        }
        Transition::Kill(vs) => {
            for v in vs {
                if let Some(i) = cfg.scalars.iter().position(|s| &s.name == v) {
                    s.scalars[i] = None;
                }
            }
        }
        Transition::Init { array } => {
            let ai = cfg.array_index(array).expect("declared array");
            let contents = match choice.and_then(|c| c.get(array)) {
                Some(c) => vec![c.clone()],
                None => initial_contents(cfg, st, &cfg.arrays[ai], bounds)?,
            };
            return Ok(contents
                .into_iter()
                .map(|c| {
                    let mut s = st.clone();
                    s.orig[ai] = Some(c.clone());
                    s.arrays[ai] = Some(c);
                    s
                })
                .collect());
        }
        Transition::SetOp { kind, target, lhs, rhs } => {
            let (Some(l), Some(r)) = (st.array(cfg, lhs), st.array(cfg, rhs)) else { return Ok(Vec::new()) };
            if l.dims != r.dims {
                return Ok(Vec::new());
            }
            let ti = cfg.array_index(target).expect("declared array");
            let Some(tv) = st.arrays[ti].as_ref() else { return Ok(Vec::new()) };
            if tv.dims != l.dims {
                return Ok(Vec::new());
            }
            let mut out = l.clone();
            for (o, (x, y)) in out.values.iter_mut().zip(l.values.iter().zip(&r.values)) {
                *o = match (kind, x, y) {
                    (SetOpKind::Union, Value::Bool(a), Value::Bool(b)) => Value::Bool(*a || *b),
                    (SetOpKind::Intersection, Value::Bool(a), Value::Bool(b)) => Value::Bool(*a && *b),
                    (SetOpKind::Union, a, b) => {
                        match Term::add(a.to_term(), b.to_term()).eval(&|_| None) {
                            Ok(v) => v,
                            Err(_) => return Ok(Vec::new()),
                        }
                    }
                    (SetOpKind::Intersection, _, _) => return Ok(Vec::new()),
                };
            }
            s.arrays[ti] = Some(out);
        }
        Transition::AssumeForall(q) => match find_failure(cfg, st, q, bounds) {
            Ok(None) => {}
            _ => return Ok(Vec::new()),
        },
    }
    Ok(vec![s])
}

/// Drops scalars that are not live at `p`.
fn canonical(cfg: &Cfg, p: PointId, mut st: State) -> State {
    for (i, s) in cfg.scalars.iter().enumerate() {
        if !cfg.points[p].vars.contains(&s.name) {
            st.scalars[i] = None;
        }
    }
    st
}

/// Reachable states per control point.
#[derive(Debug, Clone, Default)]
pub struct ReachSets {
    pub states: Vec<HashSet<State>>,
}

impl ReachSets {
    pub fn total(&self) -> usize {
        self.states.iter().map(HashSet::len).sum()
    }
}

/// Initial states: every combination of the entry point's scalars.
pub fn initial_states(cfg: &Cfg, bounds: &Bounds) -> Vec<State> {
    let blank = State {
        scalars: vec![None; cfg.scalars.len()],
        arrays: vec![None; cfg.arrays.len()],
        orig: vec![None; cfg.arrays.len()],
    };
    let mut out = vec![blank];
    for name in &cfg.points[cfg.entry].vars {
        let i = cfg.scalars.iter().position(|s| &s.name == name).expect("declared scalar");
        let vals = bounds.values(cfg.scalars[i].sort);
        out = out
            .into_iter()
            .flat_map(|s| {
                vals.iter().map(move |v| {
                    let mut s = s.clone();
                    s.scalars[i] = Some(*v);
                    s
                })
            })
            .collect();
    }
    out
}

/// Breadth-first exploration of all reachable states within `bounds`.
pub fn explore(cfg: &Cfg, bounds: &Bounds) -> Result<ReachSets, OracleError> {
    let mut reach = ReachSets { states: vec![HashSet::new(); cfg.points.len()] };
    let mut queue = VecDeque::new();
    for s in initial_states(cfg, bounds) {
        let s = canonical(cfg, cfg.entry, s);
        if reach.states[cfg.entry].insert(s.clone()) {
            queue.push_back((cfg.entry, s));
        }
    }
    let out: Vec<Vec<(EdgeId, PointId)>> =
        (0..cfg.points.len()).map(|p| cfg.out_edges(p).map(|(id, e)| (id, e.dst)).collect()).collect();
    let mut total = reach.total();
    while let Some((p, s)) = queue.pop_front() {
        for (id, dst) in &out[p] {
            for n in successors(cfg, &s, &cfg.edges[*id].t, bounds, None)? {
                let n = canonical(cfg, *dst, n);
                if reach.states[*dst].insert(n.clone()) {
                    total += 1;
                    if total > bounds.max_states {
                        return Err(OracleError::Budget(bounds.max_states));
                    }
                    queue.push_back((*dst, n));
                }
            }
        }
    }
    Ok(reach)
}

/// A state reachable at a property's point where the property fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyFailure {
    pub property: usize,
    pub state: State,
    pub instance: BTreeMap<String, Value>,
}

/// Checks every property on the reachable states.
pub fn check_properties(cfg: &Cfg, reach: &ReachSets, bounds: &Bounds) -> Result<Vec<PropertyFailure>, OracleError> {
    let mut out = Vec::new();
    for (i, Property { point, body, .. }) in cfg.props.iter().enumerate() {
        let mut states: Vec<&State> = reach.states[*point].iter().collect();
        states.sort();
        for st in states {
            match find_failure(cfg, st, body, bounds) {
                Ok(Some(instance)) => {
                    out.push(PropertyFailure { property: i, state: st.clone(), instance });
                    break;
                }
                Ok(None) => {}
                Err(Stuck::Undefined(m)) => return Err(OracleError::Eval(m)),
                Err(Stuck::OutOfBounds) => {}
            }
        }
    }
    Ok(out)
}

/// A concrete run along a fixed edge path ending in a property failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteTrace {
    pub edges: Vec<EdgeId>,
    /// States before the first edge and after each edge.
    pub states: Vec<State>,
    pub property: usize,
    pub instance: BTreeMap<String, Value>,
}

impl ConcreteTrace {
    /// Human-readable listing of the run.
    pub fn display(&self, cfg: &Cfg) -> String {
        let mut out = String::new();
        let mut at = cfg.entry;
        out.push_str(&format!("{}: {}\n", cfg.points[at].name, show_state(cfg, &self.states[0])));
        for (e, st) in self.edges.iter().zip(&self.states[1..]) {
            let edge = &cfg.edges[*e];
            at = edge.dst;
            out.push_str(&format!("  -- {} -->\n{}: {}\n", edge.t, cfg.points[at].name, show_state(cfg, st)));
        }
        let inst: Vec<String> = self.instance.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!(
            "property `{}` fails at {}\n",
            cfg.props[self.property].body,
            if inst.is_empty() { "this state".to_string() } else { inst.join(", ") }
        ));
        out
    }
}

/// Compact rendering of the defined parts of a state.
pub fn show_state(cfg: &Cfg, st: &State) -> String {
    let mut parts = Vec::new();
    for (v, x) in cfg.scalars.iter().zip(&st.scalars) {
        if let Some(x) = x {
            parts.push(format!("{}={x}", v.name));
        }
    }
    for (a, x) in cfg.arrays.iter().zip(&st.arrays) {
        if let Some(x) = x {
            let vals: Vec<String> = x.values.iter().map(|v| v.to_string()).collect();
            parts.push(format!("{}=[{}]", a.name, vals.join(" ")));
        }
    }
    parts.join(" ")
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("edge e{edge} at step {step} is not enabled")]
    Blocked { step: usize, edge: EdgeId },
    #[error("edge e{edge} at step {step} has several successors")]
    Ambiguous { step: usize, edge: EdgeId },
    #[error("the path does not end at the property's point")]
    WrongPoint,
    #[error("property holds at the end of the replayed run")]
    PropertyHolds,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Runs `edges` from `init`, using `contents` for the initializations in
/// order, and checks that `property` fails in the final state. `instance`
/// is tried first; otherwise failing instances are searched within
/// `bounds`.
pub fn replay(
    cfg: &Cfg,
    edges: &[EdgeId],
    init: State,
    contents: &[(String, ArrayVal)],
    property: usize,
    instance: &BTreeMap<String, Value>,
    bounds: &Bounds,
) -> Result<ConcreteTrace, ReplayError> {
    let mut states = vec![init];
    let mut next_init = contents.iter();
    let mut at = cfg.entry;
    for (step, &e) in edges.iter().enumerate() {
        let edge = &cfg.edges[e];
        if edge.src != at {
            return Err(ReplayError::Blocked { step, edge: e });
        }
        let choice: Option<BTreeMap<String, ArrayVal>> = match &edge.t {
            Transition::Init { array } => match next_init.next() {
                Some((a, v)) if a == array => Some([(a.clone(), v.clone())].into()),
                _ => return Err(ReplayError::Blocked { step, edge: e }),
            },
            _ => None,
        };
        let cur = states.last().expect("nonempty");
        let mut succ = successors(cfg, cur, &edge.t, bounds, choice.as_ref())?;
        match succ.len() {
            0 => return Err(ReplayError::Blocked { step, edge: e }),
            1 => states.push(succ.pop().expect("one successor")),
            _ => return Err(ReplayError::Ambiguous { step, edge: e }),
        }
        at = edge.dst;
    }
    let prop = &cfg.props[property];
    if prop.point != at {
        return Err(ReplayError::WrongPoint);
    }
    let last = states.last().expect("nonempty");
    let fails = |env: &BTreeMap<String, Value>| {
        matches!(eval_expr(cfg, last, &prop.body.guard, env), Ok(Value::Bool(true)))
            && matches!(eval_expr(cfg, last, &prop.body.conclusion, env), Ok(Value::Bool(false)))
    };
    let instance = if fails(instance) {
        instance.clone()
    } else {
        match find_failure(cfg, last, &prop.body, bounds) {
            Ok(Some(env)) => env,
            _ => return Err(ReplayError::PropertyHolds),
        }
    };
    Ok(ConcreteTrace { edges: edges.to_vec(), states, property, instance })
}
