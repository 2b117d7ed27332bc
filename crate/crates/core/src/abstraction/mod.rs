//! Distinguished-cell abstraction of a CFG into Horn clauses.
//!
//! Every control point becomes a predicate over its live scalars, the
//! index and value of a few distinguished cells per array (or per group of
//! arrays sharing their index), and optionally a count block `(z, #z)`.
//! Each CFG edge yields one or more clauses; properties become queries.

mod property;
mod rules;
pub mod tuple;

use std::collections::{BTreeMap, BTreeSet};

use crate::frontend::{ArrayVar, BinOp, Cfg, Expr, IndexDomain, Transition};
use crate::horn::{
    Atom, ClauseKind, Head, HornClause, HornSystem, PredicateSig, Provenance, Slot, SlotKind, Sort, Term,
};
use tuple::{ClauseBuilder, Tuple};

pub use rules::expand_1_to_2;

/// Whether and how per-value counts are tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultisetMode {
    /// Counts only for arrays mentioned by count terms, which then fail.
    #[default]
    Off,
    /// Track `#z` for every 1-D ranged single-cell array.
    Track,
    /// Also keep the count in the original contents.
    TrackOrig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractionConfig {
    /// Cells for arrays not listed in `cells`.
    pub default_cells: usize,
    /// Per-array cell counts.
    pub cells: BTreeMap<String, usize>,
    /// Two-cell tuples keep `k1 <= k2`; otherwise all pairs are kept.
    pub ordered: bool,
    /// Reads off the distinguished cells return an unconstrained value
    /// instead of consulting a second copy of the invariant.
    pub weakened_read: bool,
    /// Arrays with identical index domains share their distinguished cells.
    pub shared_index: bool,
    /// Bounds guards `0 <= k < n` on the cells produced by reads and writes.
    pub include_bounds_guards: bool,
    pub multiset: MultisetMode,
    /// Queries fix unconstrained cells of unbounded maps to the smallest
    /// constant indices the program uses.
    pub pin_cells: bool,
}

impl Default for AbstractionConfig {
    fn default() -> Self {
        AbstractionConfig {
            default_cells: 1,
            cells: BTreeMap::new(),
            ordered: true,
            weakened_read: false,
            shared_index: false,
            include_bounds_guards: true,
            multiset: MultisetMode::Off,
            pin_cells: true,
        }
    }
}

impl AbstractionConfig {
    pub fn with_cells(cells: usize) -> Self {
        AbstractionConfig { default_cells: cells, ..Default::default() }
    }

    pub fn cells_of(&self, array: &str) -> usize {
        self.cells.get(array).copied().unwrap_or(self.default_cells)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("invalid abstraction configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("property {index}: {message}")]
    Property { index: usize, message: String },
}

/// Arrays sharing one set of distinguished cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexGroup {
    pub name: String,
    pub members: Vec<String>,
    pub cells: usize,
    pub dims: Vec<IndexDomain>,
}

impl IndexGroup {
    pub fn is_ranged(&self) -> bool {
        self.dims.iter().all(|d| matches!(d, IndexDomain::Range(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTrack {
    pub array: String,
    pub orig: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Layout {
    pub groups: Vec<IndexGroup>,
    pub counts: Vec<CountTrack>,
}

impl Layout {
    pub fn group_of(&self, array: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.members.iter().any(|m| m == array))
    }

    pub fn count_of(&self, array: &str) -> Option<&CountTrack> {
        self.counts.iter().find(|c| c.array == array)
    }

    /// Groups arrays and decides which ones carry counts.
    pub fn new(cfg: &Cfg, conf: &AbstractionConfig) -> Result<Layout, EncodeError> {
        let mut groups: Vec<IndexGroup> = Vec::new();
        for a in &cfg.arrays {
            let cells = conf.cells_of(&a.name);
            if cells > 2 {
                return Err(EncodeError::Config(format!(
                    "array `{}`: at most two distinguished cells are supported, got {cells}",
                    a.name
                )));
            }
            if cells == 0 {
                continue;
            }
            let shared = conf
                .shared_index
                .then(|| groups.iter_mut().find(|g| g.dims == a.dims))
                .flatten();
            match shared {
                Some(g) => {
                    if g.cells != cells {
                        return Err(EncodeError::Config(format!(
                            "arrays `{}` and `{}` share an index but ask for {} and {cells} cells",
                            g.members[0], a.name, g.cells
                        )));
                    }
                    g.members.push(a.name.clone());
                    g.name = g.members.join("_");
                }
                None => groups.push(IndexGroup {
                    name: a.name.clone(),
                    members: vec![a.name.clone()],
                    cells,
                    dims: a.dims.clone(),
                }),
            }
        }
        let mut layout = Layout { groups, counts: Vec::new() };

        let mut mentioned: BTreeMap<String, bool> = BTreeMap::new();
        let mut visit = |e: &Expr| count_terms(e, &mut mentioned);
        for p in &cfg.props {
            visit(&p.body.guard);
            visit(&p.body.conclusion);
        }
        if !mentioned.is_empty() && conf.multiset == MultisetMode::Off {
            let names: Vec<&str> = mentioned.keys().map(String::as_str).collect();
            return Err(EncodeError::Config(format!(
                "count terms over `{}` need multiset tracking",
                names.join("`, `")
            )));
        }
        for a in &cfg.arrays {
            let eligible = a.dims.len() == 1 && a.is_ranged() && conf.cells_of(&a.name) == 1;
            let wanted = mentioned.contains_key(&a.name) || conf.multiset != MultisetMode::Off;
            if !wanted {
                continue;
            }
            if !eligible {
                if mentioned.contains_key(&a.name) {
                    return Err(EncodeError::Config(format!(
                        "counts over `{}` need a one-dimensional bounded array with one cell",
                        a.name
                    )));
                }
                continue;
            }
            let orig = conf.multiset == MultisetMode::TrackOrig || mentioned.get(&a.name) == Some(&true);
            layout.counts.push(CountTrack { array: a.name.clone(), orig });
        }
        Ok(layout)
    }
}

/// Arrays under count terms; the flag records whether `.orig` is used.
fn count_terms(e: &Expr, out: &mut BTreeMap<String, bool>) {
    if let Expr::Count { array, orig, .. } = e {
        *out.entry(array.clone()).or_insert(false) |= *orig;
    }
    for c in e.children() {
        count_terms(c, out);
    }
}

/// Lexicographic `a < b`.
pub fn lex_lt(a: &[Term], b: &[Term]) -> Term {
    match (a, b) {
        ([x], [y]) => Term::lt(x.clone(), y.clone()),
        ([x, xs @ ..], [y, ys @ ..]) => Term::or(vec![
            Term::lt(x.clone(), y.clone()),
            Term::and(vec![Term::eq(x.clone(), y.clone()), lex_lt(xs, ys)]),
        ]),
        _ => Term::Bool(false),
    }
}

/// Lexicographic `a <= b`.
pub fn lex_le(a: &[Term], b: &[Term]) -> Term {
    Term::or(vec![lex_lt(a, b), all_eq(a, b)])
}

pub fn all_eq(a: &[Term], b: &[Term]) -> Term {
    Term::and(a.iter().zip(b).map(|(x, y)| Term::eq(x.clone(), y.clone())).collect())
}

pub fn any_ne(a: &[Term], b: &[Term]) -> Term {
    Term::or(a.iter().zip(b).map(|(x, y)| Term::ne(x.clone(), y.clone())).collect())
}

/// Translates an expression, resolving variables, array reads and count
/// terms through `leaf`.
pub(crate) fn expr_to_term(e: &Expr, leaf: &dyn Fn(&Expr) -> Result<Term, String>) -> Result<Term, String> {
    let r = |x: &Expr| expr_to_term(x, leaf);
    Ok(match e {
        Expr::Int(i) => Term::Int(*i),
        Expr::Real(q) => Term::Real(*q),
        Expr::Bool(b) => Term::Bool(*b),
        Expr::Var(_) | Expr::Select { .. } | Expr::Count { .. } => leaf(e)?,
        Expr::Neg(a) => match r(a)? {
            Term::Int(i) => Term::Int(-i),
            t => Term::Neg(Box::new(t)),
        },
        Expr::Not(a) => Term::not(r(a)?),
        Expr::Bin(op, a, b) => {
            let (x, y) = (r(a)?, r(b)?);
            use crate::horn::CmpOp;
            match op {
                BinOp::Add => Term::Add(vec![x, y]),
                BinOp::Sub => Term::sub(x, y),
                BinOp::Mul => Term::Mul(Box::new(x), Box::new(y)),
                BinOp::Mod => match y {
                    Term::Int(m) if m > 0 => Term::Mod(Box::new(x), m),
                    _ => return Err(format!("modulus must be a positive literal in `{e}`")),
                },
                BinOp::Eq => Term::cmp(CmpOp::Eq, x, y),
                BinOp::Ne => Term::cmp(CmpOp::Ne, x, y),
                BinOp::Lt => Term::cmp(CmpOp::Lt, x, y),
                BinOp::Le => Term::cmp(CmpOp::Le, x, y),
                BinOp::Gt => Term::cmp(CmpOp::Gt, x, y),
                BinOp::Ge => Term::cmp(CmpOp::Ge, x, y),
                BinOp::And => Term::and(vec![x, y]),
                BinOp::Or => Term::or(vec![x, y]),
                BinOp::Implies => Term::implies(x, y),
            }
        }
    })
}

/// Slot name of index component `dim` of `cell` in `group`.
fn index_slot_name(g: &IndexGroup, cell: usize, dim: usize) -> String {
    let k = if g.cells == 1 { "k".to_string() } else { format!("k{}", cell + 1) };
    if g.dims.len() == 1 {
        format!("{k}!{}", g.name)
    } else {
        format!("{k}!{}.{dim}", g.name)
    }
}

fn value_slot_name(g: &IndexGroup, array: &str, cell: usize) -> String {
    if g.cells == 1 {
        format!("{array}!k")
    } else {
        format!("{array}!k{}", cell + 1)
    }
}

/// Translates a CFG into a Horn system under a cell abstraction.
pub struct Encoder<'a> {
    pub cfg: &'a Cfg,
    pub conf: AbstractionConfig,
    pub layout: Layout,
    /// Arrays initialized at each point.
    pub inits: Vec<BTreeSet<String>>,
    /// One predicate per control point, indexed by point.
    pub sigs: Vec<PredicateSig>,
    /// Intermediate predicates (count updates).
    pub extra: Vec<PredicateSig>,
    pub clauses: Vec<HornClause>,
    /// Sorted literal indices used per group, for query pinning.
    pub(crate) constants: Vec<Vec<Vec<crate::horn::Value>>>,
}

impl<'a> Encoder<'a> {
    pub fn new(cfg: &'a Cfg, conf: &AbstractionConfig) -> Result<Encoder<'a>, EncodeError> {
        for e in &cfg.edges {
            if !e.t.is_normal() {
                return Err(EncodeError::Unsupported(format!("transition `{}` is not normalized", e.t)));
            }
        }
        let layout = Layout::new(cfg, conf)?;
        let inits = cfg.initialized_arrays();
        let mut enc = Encoder {
            cfg,
            conf: conf.clone(),
            layout,
            inits,
            sigs: Vec::new(),
            extra: Vec::new(),
            clauses: Vec::new(),
            constants: Vec::new(),
        };
        enc.sigs = (0..cfg.points.len()).map(|p| enc.point_sig(p)).collect();
        enc.constants = enc.collect_constants();
        Ok(enc)
    }

    fn collect_constants(&self) -> Vec<Vec<Vec<crate::horn::Value>>> {
        let mut out = vec![BTreeSet::new(); self.layout.groups.len()];
        for e in &self.cfg.edges {
            let (array, index) = match &e.t {
                Transition::Read { array, index, .. } | Transition::Write { array, index, .. } => {
                    (array, index)
                }
                _ => continue,
            };
            let Some(g) = self.layout.group_of(array) else { continue };
            let lits: Option<Vec<_>> = index.iter().map(Expr::as_literal).collect();
            if let Some(l) = lits {
                out[g].insert(l);
            }
        }
        out.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    pub fn array(&self, name: &str) -> &ArrayVar {
        self.cfg.array(name).expect("declared array")
    }

    /// Groups with at least one member initialized at `point`.
    pub fn groups_at(&self, point: usize) -> Vec<usize> {
        (0..self.layout.groups.len())
            .filter(|g| self.layout.groups[*g].members.iter().any(|m| self.inits[point].contains(m)))
            .collect()
    }

    fn point_sig(&self, p: usize) -> PredicateSig {
        let pt = &self.cfg.points[p];
        let mut slots: Vec<Slot> = pt
            .vars
            .iter()
            .map(|v| Slot {
                name: v.clone(),
                sort: self.cfg.scalar_sort(v).unwrap_or(Sort::Int),
                kind: SlotKind::Scalar(v.clone()),
            })
            .collect();
        for gi in self.groups_at(p) {
            let g = &self.layout.groups[gi];
            let present: Vec<&String> = g.members.iter().filter(|m| self.inits[p].contains(*m)).collect();
            for cell in 0..g.cells {
                for (dim, d) in g.dims.iter().enumerate() {
                    slots.push(Slot {
                        name: index_slot_name(g, cell, dim),
                        sort: d.sort(),
                        kind: SlotKind::CellIndex { group: gi, cell, dim },
                    });
                }
                for m in &present {
                    slots.push(Slot {
                        name: value_slot_name(g, m, cell),
                        sort: self.array(m).sort,
                        kind: SlotKind::CellValue { array: (*m).clone(), cell },
                    });
                }
            }
        }
        for c in &self.layout.counts {
            if !self.inits[p].contains(&c.array) {
                continue;
            }
            let sort = self.array(&c.array).sort;
            slots.push(Slot {
                name: format!("z!{}", c.array),
                sort,
                kind: SlotKind::CountSample { array: c.array.clone() },
            });
            slots.push(Slot {
                name: format!("{}!cnt", c.array),
                sort: Sort::Int,
                kind: SlotKind::Count { array: c.array.clone() },
            });
            if c.orig {
                slots.push(Slot {
                    name: format!("{}!cnt0", c.array),
                    sort: Sort::Int,
                    kind: SlotKind::OrigCount { array: c.array.clone() },
                });
            }
        }
        PredicateSig { name: pt.name.clone(), slots, point: Some(p), keep: pt.named && p != self.cfg.entry }
    }

    /// Translates a scalar expression over the scalars of `t`.
    pub(crate) fn scalar_term(&self, e: &Expr, t: &Tuple) -> Result<Term, EncodeError> {
        expr_to_term(e, &|leaf| match leaf {
            Expr::Var(v) => t.scalars.get(v).cloned().ok_or_else(|| format!("scalar `{v}` is not live here")),
            other => Err(format!("unexpected array term `{other}`")),
        })
        .map_err(EncodeError::Unsupported)
    }

    /// `0 <= k < n` for every bounded dimension of every cell of `group`.
    pub(crate) fn bounds(&self, group: usize, t: &Tuple) -> Result<Term, EncodeError> {
        let g = &self.layout.groups[group];
        let mut parts = Vec::new();
        for cell in &t.groups[&group] {
            for (d, idx) in g.dims.iter().zip(&cell.index) {
                if let IndexDomain::Range(n) = d {
                    parts.push(Term::le(Term::Int(0), idx.clone()));
                    parts.push(Term::lt(idx.clone(), self.scalar_term(n, t)?));
                }
            }
        }
        Ok(Term::and(parts))
    }

    pub(crate) fn push(
        &mut self,
        b: ClauseBuilder,
        body: Vec<Atom>,
        constraint: Vec<Term>,
        head: Head,
        kind: ClauseKind,
        origin: Provenance,
    ) {
        self.clauses.push(b.finish(body, Term::and(constraint), head, kind, origin));
    }

    pub(crate) fn rule_origin(edge: usize, rule: &str) -> Provenance {
        Provenance { edges: vec![edge], rules: vec![rule.to_string()], property: None }
    }

    /// `true ==> entry(x)`.
    fn entry_fact(&mut self) {
        let mut b = ClauseBuilder::new();
        let sig = self.sigs[self.cfg.entry].clone();
        let t = b.tuple(&sig);
        let origin = Provenance { edges: Vec::new(), rules: vec!["entry".into()], property: None };
        self.push(b, Vec::new(), Vec::new(), Head::Atom(t.atom(&sig)), ClauseKind::Rule, origin);
    }

    /// Clauses for one CFG edge.
    pub fn encode_edge(&mut self, id: usize) -> Result<Vec<HornClause>, EncodeError> {
        let start = self.clauses.len();
        let e = self.cfg.edges[id].clone();
        let src = self.sigs[e.src].clone();
        let dst = self.sigs[e.dst].clone();
        match &e.t {
            Transition::Assign { target, value } => {
                let mut b = ClauseBuilder::new();
                let t = b.tuple(&src);
                let v = self.scalar_term(value, &t)?;
                let mut h = t.clone();
                h.scalars.insert(target.clone(), v);
                let head = h.project(&dst).atom(&dst);
                self.push(b, vec![t.atom(&src)], Vec::new(), Head::Atom(head), ClauseKind::Rule, Self::rule_origin(id, "assign"));
            }
            Transition::Guard(c) => {
                let mut b = ClauseBuilder::new();
                let t = b.tuple(&src);
                let g = self.scalar_term(c, &t)?;
                let head = t.project(&dst).atom(&dst);
                self.push(b, vec![t.atom(&src)], vec![g], Head::Atom(head), ClauseKind::Rule, Self::rule_origin(id, "guard"));
            }
            Transition::Kill(_) => {
                let mut b = ClauseBuilder::new();
                let t = b.tuple(&src);
                let head = t.project(&dst).atom(&dst);
                self.push(b, vec![t.atom(&src)], Vec::new(), Head::Atom(head), ClauseKind::Rule, Self::rule_origin(id, "kill"));
            }
            Transition::Read { target, array, index } => self.read(id, target, array, index, &src, &dst)?,
            Transition::Write { array, index, value } => {
                if self.layout.count_of(array).is_some() {
                    crate::multiset::count_write(self, id, array, index, value, &src, &dst)?
                } else {
                    self.write(id, array, index, value, &src, &dst)?
                }
            }
            Transition::Init { array } => self.init(id, array, &src, &dst)?,
            Transition::SetOp { kind, target, lhs, rhs } => {
                crate::multiset::set_op(self, id, *kind, target, lhs, rhs, &src, &dst)?
            }
            Transition::AssumeForall(q) => self.assume(id, q, &src, &dst)?,
        }
        Ok(self.clauses[start..].to_vec())
    }

    /// Every predicate, points first.
    pub fn predicates(&self) -> Vec<PredicateSig> {
        self.sigs.iter().chain(&self.extra).cloned().collect()
    }

    pub fn into_system(self) -> HornSystem {
        HornSystem { preds: self.predicates(), clauses: self.clauses }
    }
}

/// Encodes the whole CFG: entry fact, edge rules in edge order, then one
/// or more queries per property and hint.
pub fn encode(cfg: &Cfg, conf: &AbstractionConfig) -> Result<HornSystem, EncodeError> {
    let mut enc = Encoder::new(cfg, conf)?;
    enc.entry_fact();
    for id in 0..cfg.edges.len() {
        enc.encode_edge(id)?;
    }
    for i in 0..cfg.props.len() {
        enc.encode_property(i)?;
    }
    Ok(enc.into_system())
}
