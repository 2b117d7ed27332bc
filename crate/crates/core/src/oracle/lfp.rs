//! Least-fixpoint evaluation of Horn clauses restricted to finite tables.
//!
//! Every predicate standing for a control point gets a table: the
//! abstraction of the states reachable there. Starting from nothing, rules
//! fire only when their head tuple lies in the table; intermediate
//! predicates are unrestricted. A table tuple that is never derived means
//! the clauses miss a concrete behavior.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::horn::{CmpOp, Head, HornClause, HornSystem, Sort, Term, Value};

/// A finite relation with lazily built hash indices.
#[derive(Debug, Clone, Default)]
pub struct Relation {
    tuples: Vec<Vec<Value>>,
    set: HashSet<Vec<Value>>,
    indices: HashMap<Vec<usize>, HashMap<Vec<Value>, Vec<u32>>>,
}

impl Relation {
    pub fn from_set(set: HashSet<Vec<Value>>) -> Relation {
        let mut tuples: Vec<Vec<Value>> = set.iter().cloned().collect();
        tuples.sort();
        Relation { tuples, set, indices: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, t: &[Value]) -> bool {
        self.set.contains(t)
    }

    pub fn tuples(&self) -> &[Vec<Value>] {
        &self.tuples
    }

    pub fn insert(&mut self, t: Vec<Value>) -> bool {
        if self.set.contains(&t) {
            return false;
        }
        let id = self.tuples.len() as u32;
        for (pos, idx) in self.indices.iter_mut() {
            let key: Vec<Value> = pos.iter().map(|p| t[*p]).collect();
            idx.entry(key).or_default().push(id);
        }
        self.set.insert(t.clone());
        self.tuples.push(t);
        true
    }

    fn ensure_index(&mut self, pos: &[usize]) {
        if pos.is_empty() || self.indices.contains_key(pos) {
            return;
        }
        let mut idx: HashMap<Vec<Value>, Vec<u32>> = HashMap::new();
        for (id, t) in self.tuples.iter().enumerate() {
            idx.entry(pos.iter().map(|p| t[*p]).collect()).or_default().push(id as u32);
        }
        self.indices.insert(pos.to_vec(), idx);
    }

    fn lookup(&self, pos: &[usize], key: &[Value]) -> &[u32] {
        self.indices.get(pos).and_then(|i| i.get(key)).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    /// Derived tuples, all of them.
    Full,
    /// Derived tuples added in the previous round.
    Delta,
    /// The table of the predicate.
    Table,
}

#[derive(Debug, Clone)]
struct Step {
    pred: usize,
    args: Vec<Term>,
    source: Source,
    /// Argument positions fully determined before the step.
    key: Vec<usize>,
}

struct Compiled<'c> {
    clause: &'c HornClause,
    var_idx: HashMap<String, usize>,
    sorts: Vec<Sort>,
    body: Vec<(usize, Vec<Term>)>,
    head: Option<(usize, Vec<Term>)>,
    conjuncts: Vec<Term>,
}

/// A query instance whose goal fails on the tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryFailure {
    pub clause: usize,
    pub binding: Vec<(String, Value)>,
}

/// Outcome of the restricted fixpoint.
#[derive(Debug, Clone, Default)]
pub struct Fixpoint {
    /// Derived tuples per predicate, in system order.
    pub derived: Vec<Relation>,
    /// Table tuples never derived, per predicate.
    pub missing: Vec<Vec<Vec<Value>>>,
    pub rounds: usize,
}

/// Evaluates clauses against tables.
pub struct Evaluator<'s> {
    sys: &'s HornSystem,
    pred_idx: HashMap<&'s str, usize>,
    tables: Vec<Option<Relation>>,
    /// Values tried for variables nothing else determines.
    domains: HashMap<Sort, Vec<Value>>,
}

fn vars_of(t: &Term) -> BTreeSet<String> {
    t.vars()
}

impl<'s> Evaluator<'s> {
    /// `tables[i]` restricts predicate `i`; `None` leaves it free.
    pub fn new(sys: &'s HornSystem, tables: Vec<Option<HashSet<Vec<Value>>>>, domains: HashMap<Sort, Vec<Value>>) -> Self {
        let pred_idx = sys.preds.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
        Evaluator {
            sys,
            pred_idx,
            tables: tables.into_iter().map(|t| t.map(Relation::from_set)).collect(),
            domains,
        }
    }

    pub fn table(&self, pred: usize) -> Option<&Relation> {
        self.tables[pred].as_ref()
    }

    fn compile<'c>(&self, clause: &'c HornClause) -> Compiled<'c> {
        let var_idx: HashMap<String, usize> =
            clause.vars.iter().enumerate().map(|(i, (v, _))| (v.clone(), i)).collect();
        let sorts = clause.vars.iter().map(|(_, s)| *s).collect();
        let body = clause.body.iter().map(|a| (self.pred_idx[a.pred.as_str()], a.args.clone())).collect();
        let head = match &clause.head {
            Head::Atom(a) => Some((self.pred_idx[a.pred.as_str()], a.args.clone())),
            Head::Goal(_) => None,
        };
        Compiled { clause, var_idx, sorts, body, head, conjuncts: clause.constraint.conjuncts() }
    }

    /// Join order: the delta atom first, then the atom with the most
    /// determined arguments, then a restricted head.
    fn plan(&self, c: &Compiled<'_>, delta: Option<usize>, body_source: Source) -> Vec<Step> {
        let mut bound: BTreeSet<String> = BTreeSet::new();
        let mut steps = Vec::new();
        let mut pending: Vec<usize> = (0..c.body.len()).collect();
        let add = |pred: usize, args: &Vec<Term>, source: Source, bound: &mut BTreeSet<String>| {
            let key: Vec<usize> =
                (0..args.len()).filter(|i| vars_of(&args[*i]).iter().all(|v| bound.contains(v))).collect();
            for a in args {
                if let Some(v) = a.as_var() {
                    bound.insert(v.to_string());
                }
            }
            Step { pred, args: args.clone(), source, key }
        };
        if let Some(d) = delta {
            pending.retain(|i| *i != d);
            let (p, args) = &c.body[d];
            steps.push(add(*p, args, Source::Delta, &mut bound));
        }
        while !pending.is_empty() {
            let score = |i: &usize| {
                c.body[*i].1.iter().filter(|a| vars_of(a).iter().all(|v| bound.contains(v))).count()
            };
            let best = *pending.iter().max_by_key(|i| (score(i), std::cmp::Reverse(**i))).expect("nonempty");
            pending.retain(|i| *i != best);
            let (p, args) = &c.body[best];
            steps.push(add(*p, args, body_source, &mut bound));
        }
        if let Some((p, args)) = &c.head {
            if self.tables[*p].is_some() {
                steps.push(add(*p, args, Source::Table, &mut bound));
            }
        }
        steps
    }

    fn ensure_indices(&mut self, derived: &mut [Relation], steps: &[Step]) {
        for s in steps {
            match s.source {
                Source::Table => self.tables[s.pred].as_mut().expect("table").ensure_index(&s.key),
                _ => derived[s.pred].ensure_index(&s.key),
            }
        }
    }

    /// Enumerates the solutions of a plan and passes each complete
    /// assignment to `emit`.
    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        c: &Compiled<'_>,
        steps: &[Step],
        derived: &[Relation],
        delta: &[(usize, usize)],
        env: &mut Vec<Option<Value>>,
        deferred: &mut Vec<(Term, Value)>,
        emit: &mut dyn FnMut(&[Option<Value>]),
    ) {
        let Some((step, rest)) = steps.split_first() else {
            self.finish(c, env, deferred, emit);
            return;
        };
        let rel = match step.source {
            Source::Table => self.tables[step.pred].as_ref().expect("table"),
            _ => &derived[step.pred],
        };
        let (lo, hi) = match step.source {
            Source::Delta => delta[step.pred],
            _ => (0, rel.len()),
        };
        let ev = |t: &Term, env: &Vec<Option<Value>>| t.eval(&|n| c.var_idx.get(n).and_then(|i| env[*i]));
        let mut key = Vec::with_capacity(step.key.len());
        for p in &step.key {
            match ev(&step.args[*p], env) {
                Ok(v) => key.push(v),
                Err(_) => return,
            }
        }
        let all: Vec<u32>;
        let ids: &[u32] = if step.key.is_empty() {
            all = (lo as u32..hi as u32).collect();
            &all
        } else {
            rel.lookup(&step.key, &key)
        };
        for id in ids {
            let id = *id as usize;
            if id < lo || id >= hi {
                continue;
            }
            let t = &rel.tuples[id];
            let mut newly: Vec<usize> = Vec::new();
            let mark = deferred.len();
            let mut ok = true;
            for (i, arg) in step.args.iter().enumerate() {
                if step.key.contains(&i) {
                    continue;
                }
                if let Some(v) = arg.as_var() {
                    let vi = c.var_idx[v];
                    match env[vi] {
                        None => {
                            env[vi] = Some(t[i]);
                            newly.push(vi);
                            continue;
                        }
                        Some(x) => {
                            if !same(x, t[i]) {
                                ok = false;
                                break;
                            }
                            continue;
                        }
                    }
                }
                match ev(arg, env) {
                    Ok(x) => {
                        if !same(x, t[i]) {
                            ok = false;
                            break;
                        }
                    }
                    Err(_) => deferred.push((arg.clone(), t[i])),
                }
            }
            if ok {
                self.solve(c, rest, derived, delta, env, deferred, emit);
            }
            for vi in newly {
                env[vi] = None;
            }
            deferred.truncate(mark);
        }
    }

    /// Binds what equalities determine, enumerates the rest, then checks
    /// deferred arguments and the constraint.
    fn finish(
        &self,
        c: &Compiled<'_>,
        env: &mut Vec<Option<Value>>,
        deferred: &mut [(Term, Value)],
        emit: &mut dyn FnMut(&[Option<Value>]),
    ) {
        let ev = |t: &Term, env: &Vec<Option<Value>>| t.eval(&|n| c.var_idx.get(n).and_then(|i| env[*i]));
        let mut newly = Vec::new();
        let mut changed = true;
        while changed {
            changed = false;
            for conj in &c.conjuncts {
                if let Term::Cmp(CmpOp::Eq, a, b) = conj {
                    for (x, y) in [(a, b), (b, a)] {
                        if let Some(v) = x.as_var() {
                            let vi = c.var_idx[v];
                            if env[vi].is_none() {
                                if let Ok(val) = ev(y, env) {
                                    env[vi] = val.coerce(c.sorts[vi]).or(Some(val));
                                    newly.push(vi);
                                    changed = true;
                                }
                            }
                        }
                    }
                }
            }
        }
        let free: Vec<usize> = (0..env.len()).filter(|i| env[*i].is_none()).collect();
        self.enumerate(c, &free, env, deferred, emit);
        for vi in newly {
            env[vi] = None;
        }
    }

    fn enumerate(
        &self,
        c: &Compiled<'_>,
        free: &[usize],
        env: &mut Vec<Option<Value>>,
        deferred: &[(Term, Value)],
        emit: &mut dyn FnMut(&[Option<Value>]),
    ) {
        if let Some((vi, rest)) = free.split_first() {
            let dom = self.domains.get(&c.sorts[*vi]).cloned().unwrap_or_default();
            for v in dom {
                env[*vi] = Some(v);
                self.enumerate(c, rest, env, deferred, emit);
            }
            env[*vi] = None;
            return;
        }
        let ev = |t: &Term| t.eval(&|n| c.var_idx.get(n).and_then(|i| env[*i]));
        for (t, v) in deferred {
            match ev(t) {
                Ok(x) if same(x, *v) => {}
                _ => return,
            }
        }
        if matches!(ev(&c.clause.constraint), Ok(Value::Bool(true))) {
            emit(env);
        }
    }

    /// Runs the restricted fixpoint over all rules.
    pub fn fixpoint(&mut self) -> Fixpoint {
        let n = self.sys.preds.len();
        let mut derived: Vec<Relation> = vec![Relation::default(); n];
        let rules: Vec<&HornClause> = self.sys.clauses.iter().filter(|c| !c.is_query()).collect();
        let compiled: Vec<Compiled<'_>> = rules.iter().map(|c| self.compile(c)).collect();
        // Plans: facts once, other rules once per delta position.
        let mut plans: Vec<(usize, Option<usize>, Vec<Step>)> = Vec::new();
        for (ci, c) in compiled.iter().enumerate() {
            if c.body.is_empty() {
                plans.push((ci, None, self.plan(c, None, Source::Full)));
            } else {
                for d in 0..c.body.len() {
                    plans.push((ci, Some(d), self.plan(c, Some(d), Source::Full)));
                }
            }
        }
        for (_, _, steps) in &plans {
            self.ensure_indices(&mut derived, steps);
        }
        let mut delta: Vec<(usize, usize)> = vec![(0, 0); n];
        let mut first = true;
        let mut rounds = 0;
        loop {
            rounds += 1;
            let mut fresh: Vec<(usize, Vec<Value>)> = Vec::new();
            for (ci, d, steps) in &plans {
                let c = &compiled[*ci];
                match d {
                    None if !first => continue,
                    Some(d) => {
                        let (lo, hi) = delta[c.body[*d].0];
                        if lo == hi {
                            continue;
                        }
                    }
                    None => {}
                }
                let (hp, hargs) = c.head.as_ref().expect("rule head");
                let mut env = vec![None; c.sorts.len()];
                let mut deferred = Vec::new();
                let mut emit = |env: &[Option<Value>]| {
                    let t: Option<Vec<Value>> = hargs
                        .iter()
                        .zip(&self.sys.preds[*hp].slots)
                        .map(|(a, s)| {
                            a.eval(&|n| c.var_idx.get(n).and_then(|i| env[*i])).ok().map(|v| v.coerce(s.sort).unwrap_or(v))
                        })
                        .collect();
                    if let Some(t) = t {
                        fresh.push((*hp, t));
                    }
                };
                self.solve(c, steps, &derived, &delta, &mut env, &mut deferred, &mut emit);
            }
            first = false;
            let before: Vec<usize> = derived.iter().map(Relation::len).collect();
            for (p, t) in fresh {
                if self.tables[p].as_ref().is_none_or(|tab| tab.contains(&t)) {
                    derived[p].insert(t);
                }
            }
            let mut any = false;
            for p in 0..n {
                delta[p] = (before[p], derived[p].len());
                any |= before[p] < derived[p].len();
            }
            if !any {
                break;
            }
        }
        let missing = (0..n)
            .map(|p| match &self.tables[p] {
                Some(tab) => tab.tuples.iter().filter(|t| !derived[p].contains(t)).cloned().collect(),
                None => Vec::new(),
            })
            .collect();
        Fixpoint { derived, missing, rounds }
    }

    /// Query and hint instances over the tables whose goal is false.
    pub fn query_failures(&mut self) -> Vec<QueryFailure> {
        let mut out = Vec::new();
        let mut scratch: Vec<Relation> = vec![Relation::default(); self.sys.preds.len()];
        for (ci, clause) in self.sys.clauses.iter().enumerate() {
            let Head::Goal(goal) = &clause.head else { continue };
            let c = self.compile(clause);
            if c.body.iter().any(|(p, _)| self.tables[*p].is_none()) {
                continue;
            }
            let mut steps = self.plan(&c, None, Source::Table);
            for s in &mut steps {
                s.source = Source::Table;
            }
            self.ensure_indices(&mut scratch, &steps);
            let mut env = vec![None; c.sorts.len()];
            let mut deferred = Vec::new();
            let mut found: Option<Vec<(String, Value)>> = None;
            let mut emit = |env: &[Option<Value>]| {
                if found.is_some() {
                    return;
                }
                let g = goal.eval(&|n| c.var_idx.get(n).and_then(|i| env[*i]));
                if !matches!(g, Ok(Value::Bool(true))) {
                    found = Some(
                        clause.vars.iter().zip(env).filter_map(|((v, _), x)| x.map(|x| (v.clone(), x))).collect(),
                    );
                }
            };
            self.solve(&c, &steps, &scratch, &[], &mut env, &mut deferred, &mut emit);
            if let Some(binding) = found {
                out.push(QueryFailure { clause: ci, binding });
            }
        }
        out
    }
}

/// Equality across `Int` and integral `Real` values.
fn same(a: Value, b: Value) -> bool {
    a == b || matches!((a.as_rational(), b.as_rational()), (Some(x), Some(y)) if x == y)
}
