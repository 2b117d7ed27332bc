//! Branches of derivation trees, concrete trace formulas over arrays and
//! witnesses read back from their models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::frontend::{BinOp, Cfg, EdgeId, Expr, IndexDomain, PointId, SetOpKind, Transition};
use crate::horn::{smt_symbol, smt_term, HornSystem, Sort, Term, Value};
use crate::oracle::interp::{ArrayVal, Dim};

use super::session::{SatResult, SmtSession};
use super::sexp;
use super::unfold::{DerivationTree, TreeNode};
use super::SolverError;

/// One clause application on a branch, in execution order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub clause: usize,
    pub edges: Vec<EdgeId>,
    pub rules: Vec<String>,
    pub assignment: BTreeMap<String, Value>,
}

/// A root-to-leaf branch reversed into execution order; the last step is
/// the violated query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    pub property: Option<usize>,
}

impl Trace {
    /// CFG edges along the trace.
    pub fn edges(&self) -> Vec<EdgeId> {
        self.steps.iter().flat_map(|s| s.edges.iter().copied()).collect()
    }

    /// Checks that the edges form a path from the entry to `end`.
    pub fn check_path(&self, cfg: &Cfg, end: PointId) -> Result<(), String> {
        let mut at = cfg.entry;
        for e in self.edges() {
            let edge = cfg.edges.get(e).ok_or_else(|| format!("no edge {e}"))?;
            if edge.src != at {
                return Err(format!("edge e{e} leaves {} but the trace is at {}", cfg.points[edge.src].name, cfg.points[at].name));
            }
            at = edge.dst;
        }
        if at != end {
            return Err(format!("trace ends at {} instead of {}", cfg.points[at].name, cfg.points[end].name));
        }
        Ok(())
    }
}

/// The leftmost branch of a tree, leaf first.
pub fn extract_branch(sys: &HornSystem, tree: &DerivationTree) -> Trace {
    let mut nodes: Vec<&TreeNode> = vec![&tree.root];
    while let Some(first) = nodes.last().and_then(|n| n.children.first()) {
        nodes.push(first);
    }
    let steps = nodes
        .into_iter()
        .rev()
        .map(|n| {
            let c = &sys.clauses[n.clause];
            TraceStep {
                clause: n.clause,
                edges: c.origin.edges.clone(),
                rules: c.origin.rules.clone(),
                assignment: n.assignment.clone(),
            }
        })
        .collect();
    Trace { steps, property: sys.clauses[tree.root.clause].origin.property }
}

/// An initialization along the trace whose contents the witness reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitRecord {
    pub array: String,
    pub symbol: String,
    /// Length expressions of bounded dimensions, `None` for total ones.
    pub lens: Vec<Option<String>>,
    pub index_sorts: Vec<Sort>,
    pub elem: Sort,
}

/// A named part of the trace formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedPart {
    pub name: String,
    /// Edge position in the trace, or `None` for the negated property.
    pub position: Option<usize>,
    pub arrays: BTreeSet<String>,
}

/// SSA encoding of a trace with concrete array semantics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceFormula {
    pub logic: &'static str,
    /// Declarations and named assertions, without `check-sat`.
    pub text: String,
    pub parts: Vec<NamedPart>,
    pub inits: Vec<InitRecord>,
    /// Entry scalars: name, symbol, sort.
    pub entry_scalars: Vec<(String, String, Sort)>,
    /// Integer constants, used to size unbounded maps in witnesses.
    pub int_symbols: Vec<String>,
    /// Quantified variables of the property: name, symbol, sort.
    pub binders: Vec<(String, String, Sort)>,
}

impl TraceFormula {
    /// A self-contained script.
    pub fn script(&self) -> String {
        format!(
            "(set-option :produce-unsat-cores true)\n(set-logic {})\n{}(check-sat)\n(get-unsat-core)\n",
            self.logic, self.text
        )
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace formula cannot express {0}")]
    Unsupported(String),
    #[error("trace is not a path: {0}")]
    NotAPath(String),
}

struct Ssa<'c> {
    cfg: &'c Cfg,
    scalars: BTreeMap<String, usize>,
    arrays: BTreeMap<String, usize>,
    decls: String,
    ints: Vec<String>,
    real: bool,
    quantified: bool,
}

impl<'c> Ssa<'c> {
    fn declare(&mut self, name: &str, sort: &str) {
        let _ = writeln!(self.decls, "(declare-const {} {})", smt_symbol(name), sort);
    }

    fn scalar(&mut self, x: &str) -> String {
        let v = *self.scalars.entry(x.to_string()).or_insert_with(|| usize::MAX);
        if v == usize::MAX {
            self.scalars.insert(x.to_string(), 0);
            return self.new_scalar_version(x, 0);
        }
        format!("{x}@{v}")
    }

    fn new_scalar_version(&mut self, x: &str, v: usize) -> String {
        let name = format!("{x}@{v}");
        let sort = self.cfg.scalar_sort(x).unwrap_or(Sort::Int);
        self.declare(&name, sort.smt_name());
        if sort == Sort::Int {
            self.ints.push(smt_symbol(&name));
        }
        self.real |= sort == Sort::Real;
        name
    }

    fn bump_scalar(&mut self, x: &str) -> String {
        let v = self.scalars.get(x).map(|v| v + 1).unwrap_or(0);
        self.scalars.insert(x.to_string(), v);
        self.new_scalar_version(x, v)
    }

    fn array_sort(&self, a: &str) -> String {
        let arr = self.cfg.array(a).expect("declared array");
        let idx: Vec<&str> = arr.index_sorts().iter().map(|s| s.smt_name()).collect();
        format!("(Array {} {})", idx.join(" "), arr.sort.smt_name())
    }

    fn array(&mut self, a: &str) -> String {
        match self.arrays.get(a) {
            Some(v) => format!("{a}@{v}"),
            None => self.bump_array(a),
        }
    }

    fn bump_array(&mut self, a: &str) -> String {
        let v = self.arrays.get(a).map(|v| v + 1).unwrap_or(0);
        self.arrays.insert(a.to_string(), v);
        let name = format!("{a}@{v}");
        let sort = self.array_sort(a);
        self.real |= sort.contains("Real");
        self.declare(&name, &sort);
        name
    }

    fn var(&mut self, x: &str, binders: &BTreeMap<String, String>) -> String {
        match binders.get(x) {
            Some(b) => smt_symbol(b),
            None => smt_symbol(&self.scalar(x)),
        }
    }

    /// In-range conditions of an access to `a` at `idx`.
    fn in_range(&mut self, a: &str, idx: &[String], binders: &BTreeMap<String, String>) -> Result<Vec<String>, TraceError> {
        let arr = self.cfg.array(a).expect("declared array").clone();
        let mut out = Vec::new();
        for (d, i) in arr.dims.iter().zip(idx) {
            if let IndexDomain::Range(n) = d {
                let n = self.expr(n, binders, &mut Vec::new(), &mut BTreeSet::new())?;
                out.push(format!("(<= 0 {i})"));
                out.push(format!("(< {i} {n})"));
            }
        }
        Ok(out)
    }

    /// Renders an expression; reads add their in-range conditions to
    /// `guards` and their arrays to `used`.
    fn expr(
        &mut self,
        e: &Expr,
        binders: &BTreeMap<String, String>,
        guards: &mut Vec<String>,
        used: &mut BTreeSet<String>,
    ) -> Result<String, TraceError> {
        Ok(match e {
            Expr::Int(i) => smt_term(&Term::Int(*i)),
            Expr::Real(q) => {
                self.real = true;
                smt_term(&Term::Real(*q))
            }
            Expr::Bool(b) => b.to_string(),
            Expr::Var(x) => self.var(x, binders),
            Expr::Select { array, index } => {
                let idx: Vec<String> =
                    index.iter().map(|i| self.expr(i, binders, guards, used)).collect::<Result<_, _>>()?;
                guards.extend(self.in_range(array, &idx, binders)?);
                used.insert(array.clone());
                let a = self.array(array);
                format!("(select {} {})", smt_symbol(&a), idx.join(" "))
            }
            Expr::Count { .. } => return Err(TraceError::Unsupported(format!("count term `{e}`"))),
            Expr::Neg(a) => format!("(- {})", self.expr(a, binders, guards, used)?),
            Expr::Not(a) => format!("(not {})", self.expr(a, binders, guards, used)?),
            Expr::Bin(op, a, b) => {
                let (x, y) = (self.expr(a, binders, guards, used)?, self.expr(b, binders, guards, used)?);
                match op {
                    BinOp::Ne => format!("(not (= {x} {y}))"),
                    BinOp::Gt => format!("(> {x} {y})"),
                    BinOp::Ge => format!("(>= {x} {y})"),
                    _ => {
                        let sym = match op {
                            BinOp::Add => "+",
                            BinOp::Sub => "-",
                            BinOp::Mul => "*",
                            BinOp::Mod => "mod",
                            BinOp::Eq => "=",
                            BinOp::Lt => "<",
                            BinOp::Le => "<=",
                            BinOp::And => "and",
                            BinOp::Or => "or",
                            BinOp::Implies => "=>",
                            BinOp::Ne | BinOp::Gt | BinOp::Ge => unreachable!(),
                        };
                        format!("({sym} {x} {y})")
                    }
                }
            }
        })
    }

    fn conj(parts: Vec<String>) -> String {
        match parts.len() {
            0 => "true".into(),
            1 => parts.into_iter().next().expect("one part"),
            _ => format!("(and {})", parts.join(" ")),
        }
    }

    fn binders(&mut self, bs: &[(String, Sort)], prefix: &str) -> BTreeMap<String, String> {
        bs.iter().map(|(b, _)| (b.clone(), format!("{prefix}{b}"))).collect()
    }
}

/// SSA conjunction of the concrete transitions along `edges`, followed by
/// the negation of `property` at the end point. Abstract assignments of the
/// trace steps are added as comments.
pub fn trace_to_concrete_formula(cfg: &Cfg, trace: &Trace) -> Result<TraceFormula, TraceError> {
    let prop = trace.property.and_then(|p| cfg.props.get(p));
    if let Some(p) = prop {
        trace.check_path(cfg, p.point).map_err(TraceError::NotAPath)?;
    }
    let mut ssa = Ssa {
        cfg,
        scalars: BTreeMap::new(),
        arrays: BTreeMap::new(),
        decls: String::new(),
        ints: Vec::new(),
        real: false,
        quantified: false,
    };
    let mut asserts = String::new();
    for (i, s) in trace.steps.iter().enumerate() {
        let vals: Vec<String> = s.assignment.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(asserts, "; hint: step {i}, clause {} ({}): {}", s.clause, s.rules.join(" + "), vals.join(", "));
    }
    // Entry scalars get version 0.
    let mut entry_scalars = Vec::new();
    for x in &cfg.points[cfg.entry].vars {
        let sym = ssa.scalar(x);
        entry_scalars.push((x.clone(), sym, cfg.scalar_sort(x).unwrap_or(Sort::Int)));
    }
    let mut parts = Vec::new();
    let mut inits = Vec::new();
    let none = BTreeMap::new();
    for (pos, e) in trace.edges().into_iter().enumerate() {
        let t = &cfg.edges[e].t;
        let mut used = BTreeSet::new();
        let mut g = Vec::new();
        let formula = match t {
            Transition::Assign { target, value } => {
                let v = ssa.expr(value, &none, &mut g, &mut used)?;
                let x = ssa.bump_scalar(target);
                g.push(format!("(= {} {v})", smt_symbol(&x)));
                Ssa::conj(g)
            }
            Transition::Guard(c) => {
                let c = ssa.expr(c, &none, &mut g, &mut used)?;
                g.push(c);
                Ssa::conj(g)
            }
            Transition::Read { target, array, index } => {
                let sel = ssa.expr(&Expr::Select { array: array.clone(), index: index.clone() }, &none, &mut g, &mut used)?;
                let x = ssa.bump_scalar(target);
                g.push(format!("(= {} {sel})", smt_symbol(&x)));
                Ssa::conj(g)
            }
            Transition::Write { array, index, value } => {
                let idx: Vec<String> =
                    index.iter().map(|i| ssa.expr(i, &none, &mut g, &mut used)).collect::<Result<_, _>>()?;
                let v = ssa.expr(value, &none, &mut g, &mut used)?;
                g.extend(ssa.in_range(array, &idx, &none)?);
                let old = ssa.array(array);
                let new = ssa.bump_array(array);
                used.insert(array.clone());
                g.push(format!("(= {} (store {} {} {v}))", smt_symbol(&new), smt_symbol(&old), idx.join(" ")));
                Ssa::conj(g)
            }
            Transition::Kill(_) => "true".into(),
            Transition::Init { array } => {
                let arr = cfg.array(array).expect("declared array").clone();
                let mut lens = Vec::new();
                for d in &arr.dims {
                    lens.push(match d {
                        IndexDomain::Range(n) => Some(ssa.expr(n, &none, &mut g, &mut used)?),
                        IndexDomain::Total(_) => None,
                    });
                }
                let sym = ssa.bump_array(array);
                used.insert(array.clone());
                if let Some(v) = arr.init {
                    let v = v.coerce(arr.sort).unwrap_or(v);
                    g.push(format!(
                        "(= {} ((as const {}) {}))",
                        smt_symbol(&sym),
                        ssa.array_sort(array),
                        smt_term(&v.to_term())
                    ));
                }
                inits.push(InitRecord { array: array.clone(), symbol: sym, lens, index_sorts: arr.index_sorts(), elem: arr.sort });
                Ssa::conj(g)
            }
            Transition::SetOp { kind, target, lhs, rhs } => {
                let sort = cfg.array(target).expect("declared array").sort;
                let op = match (kind, sort) {
                    (SetOpKind::Union, Sort::Bool) => "or".to_string(),
                    (SetOpKind::Intersection, Sort::Bool) => "and".to_string(),
                    (SetOpKind::Union, s) => format!("(+ ({0} {0}) {0})", s.smt_name()),
                    (SetOpKind::Intersection, _) => {
                        return Err(TraceError::Unsupported("intersection of non-Boolean maps".into()))
                    }
                };
                let (l, r) = (ssa.array(lhs), ssa.array(rhs));
                let new = ssa.bump_array(target);
                used.extend([target.clone(), lhs.clone(), rhs.clone()]);
                format!("(= {} ((_ map {op}) {} {}))", smt_symbol(&new), smt_symbol(&l), smt_symbol(&r))
            }
            Transition::AssumeForall(q) => {
                ssa.quantified = true;
                let b = ssa.binders(&q.binders, &format!("{pos}!"));
                let mut inner = Vec::new();
                let guard = ssa.expr(&q.guard, &b, &mut inner, &mut used)?;
                let concl = ssa.expr(&q.conclusion, &b, &mut inner, &mut used)?;
                inner.push(guard);
                let decl: Vec<String> =
                    q.binders.iter().map(|(n, s)| format!("({} {})", smt_symbol(&b[n]), s.smt_name())).collect();
                format!("(forall ({}) (=> {} {concl}))", decl.join(" "), Ssa::conj(inner))
            }
        };
        let name = format!("e{pos}");
        let _ = writeln!(asserts, "; e{e}: {t}");
        let _ = writeln!(asserts, "(assert (! {formula} :named {name}))");
        parts.push(NamedPart { name, position: Some(pos), arrays: used });
    }
    let mut binders = Vec::new();
    if let Some(p) = prop {
        let b = ssa.binders(&p.body.binders, "prop!");
        for (n, s) in &p.body.binders {
            ssa.declare(&b[n], s.smt_name());
            if *s == Sort::Int {
                ssa.ints.push(smt_symbol(&b[n]));
            }
            binders.push((n.clone(), b[n].clone(), *s));
        }
        let mut used = BTreeSet::new();
        let mut g = Vec::new();
        let guard = ssa.expr(&p.body.guard, &b, &mut g, &mut used)?;
        let concl = ssa.expr(&p.body.conclusion, &b, &mut g, &mut used)?;
        g.push(guard);
        g.push(format!("(not {concl})"));
        let _ = writeln!(asserts, "; negated property");
        let _ = writeln!(asserts, "(assert (! {} :named goal))", Ssa::conj(g));
        parts.push(NamedPart { name: "goal".into(), position: None, arrays: used });
    }
    let logic = match (ssa.quantified, ssa.real) {
        (false, false) => "QF_AUFLIA",
        (false, true) => "QF_AUFLIRA",
        (true, false) => "AUFLIA",
        (true, true) => "AUFLIRA",
    };
    Ok(TraceFormula {
        logic,
        text: format!("{}{}", ssa.decls, asserts),
        parts,
        inits,
        entry_scalars,
        int_symbols: ssa.ints,
        binders,
    })
}

/// Concrete inputs read from a model of a trace formula.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Witness {
    pub scalars: BTreeMap<String, Value>,
    /// Contents of each initialization along the trace, in order.
    pub inits: Vec<(String, ArrayVal)>,
    pub binders: BTreeMap<String, Value>,
}

/// Outcome of checking a trace formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceCheck {
    /// The trace is feasible with these inputs.
    Feasible(Witness),
    /// Infeasible; the arrays in the unsat core.
    Infeasible { core: Vec<String>, arrays: BTreeSet<String> },
    Unknown,
}

/// Largest unbounded-map window read back into a witness.
const MAX_WINDOW: i64 = 64;

/// Decides a trace formula with z3 and reads back a witness or a core.
pub fn check_trace(f: &TraceFormula, smt: &mut SmtSession) -> Result<TraceCheck, SolverError> {
    smt.send("(set-option :produce-unsat-cores true)")?;
    smt.send("(set-option :produce-models true)")?;
    smt.send(&format!("(set-logic {})", f.logic))?;
    for line in f.text.lines().filter(|l| !l.starts_with(';')) {
        smt.send(line)?;
    }
    match smt.check_sat()? {
        SatResult::Unknown => Ok(TraceCheck::Unknown),
        SatResult::Unsat => {
            let core = smt.unsat_core()?;
            let mut arrays: BTreeSet<String> = BTreeSet::new();
            for p in &f.parts {
                if core.contains(&p.name) {
                    arrays.extend(p.arrays.iter().cloned());
                }
            }
            Ok(TraceCheck::Infeasible { core, arrays })
        }
        SatResult::Sat => witness(f, smt).map(TraceCheck::Feasible),
    }
}

fn read(v: &sexp::Sexp, sort: Sort) -> Result<Value, SolverError> {
    sexp::to_value(v, sort == Sort::Real).ok_or_else(|| SolverError::Protocol(format!("cannot read value `{v}`")))
}

fn witness(f: &TraceFormula, smt: &mut SmtSession) -> Result<Witness, SolverError> {
    let mut w = Witness::default();
    let syms: Vec<String> = f.entry_scalars.iter().map(|(_, s, _)| smt_symbol(s)).collect();
    for ((x, _, sort), v) in f.entry_scalars.iter().zip(smt.get_value(&syms)?) {
        w.scalars.insert(x.clone(), read(&v, *sort)?);
    }
    let syms: Vec<String> = f.binders.iter().map(|(_, s, _)| smt_symbol(s)).collect();
    for ((x, _, sort), v) in f.binders.iter().zip(smt.get_value(&syms)?) {
        w.binders.insert(x.clone(), read(&v, *sort)?);
    }
    // Window for unbounded maps: every integer in the model, and zero.
    let ints = smt.get_value(&f.int_symbols)?;
    let mut lo = 0i64;
    let mut hi = 0i64;
    for v in &ints {
        if let Some(Value::Int(i)) = sexp::to_value(v, false) {
            lo = lo.min(i);
            hi = hi.max(i);
        }
    }
    if hi - lo + 1 > MAX_WINDOW {
        return Err(SolverError::Protocol(format!("witness indices span {lo}..{hi}, too wide to read back")));
    }
    for init in &f.inits {
        let mut dims = Vec::new();
        for len in &init.lens {
            dims.push(match len {
                Some(l) => {
                    let n = match smt.get_value(std::slice::from_ref(l))?.pop().and_then(|v| sexp::to_value(&v, false)) {
                        Some(Value::Int(n)) => n.max(0),
                        _ => return Err(SolverError::Protocol(format!("cannot read length `{l}`"))),
                    };
                    if n > MAX_WINDOW * MAX_WINDOW {
                        return Err(SolverError::Protocol(format!("witness array of length {n} is too long")));
                    }
                    Dim { lo: 0, len: n as usize }
                }
                None => Dim { lo, len: (hi - lo + 1) as usize },
            });
        }
        let shape = ArrayVal { dims: dims.clone(), index_sorts: init.index_sorts.clone(), values: Vec::new() };
        let size = shape.size();
        let idx: Vec<Vec<Value>> = (0..size).map(|o| shape.index_at(o)).collect();
        let terms: Vec<String> = idx
            .iter()
            .map(|k| {
                let ks: Vec<String> = k.iter().map(|v| smt_term(&v.to_term())).collect();
                format!("(select {} {})", smt_symbol(&init.symbol), ks.join(" "))
            })
            .collect();
        let vals = smt.get_value(&terms)?;
        let values: Vec<Value> = vals.iter().map(|v| read(v, init.elem)).collect::<Result<_, _>>()?;
        w.inits.push((init.array.clone(), ArrayVal { values, ..shape }));
    }
    Ok(w)
}
