//! Structured statements to a control-flow graph.

use std::collections::BTreeSet;

use super::ast::*;
use super::cfg::*;
use super::check::ENTRY_LABEL;
use super::FrontendError;

struct Lowerer {
    cfg: Cfg,
    dead: BTreeSet<PointId>,
    labels: BTreeSet<String>,
    counter: usize,
}

fn collect_labels(stmts: &[Stmt], out: &mut BTreeSet<String>) {
    for s in stmts {
        if let Some(l) = &s.label {
            out.insert(l.clone());
        }
        match &s.kind {
            StmtKind::If { then, els, .. } => {
                collect_labels(then, out);
                collect_labels(els, out);
            }
            StmtKind::While { body, .. } => collect_labels(body, out),
            _ => {}
        }
    }
}

impl Lowerer {
    fn fresh_point(&mut self) -> PointId {
        let name = loop {
            self.counter += 1;
            let n = format!("p{}", self.counter);
            if !self.labels.contains(&n) {
                break n;
            }
        };
        self.cfg.points.push(ControlPoint { name, named: false, vars: Vec::new() });
        self.cfg.points.len() - 1
    }

    fn edge(&mut self, src: PointId, t: Transition) -> PointId {
        let dst = self.fresh_point();
        self.cfg.edges.push(Edge { src, dst, t });
        dst
    }

    /// Gives `p` a label, or moves on to a fresh labelled point.
    fn name_point(&mut self, p: PointId, label: &str) -> PointId {
        if !self.cfg.points[p].named {
            self.cfg.points[p].name = label.to_string();
            self.cfg.points[p].named = true;
            return p;
        }
        let q = self.edge(p, Transition::Guard(Expr::Bool(true)));
        self.cfg.points[q].name = label.to_string();
        self.cfg.points[q].named = true;
        q
    }

    /// Identifies two points, keeping the named one when possible.
    fn merge(&mut self, a: PointId, b: PointId) -> PointId {
        if a == b {
            return a;
        }
        let (keep, gone) = match (self.cfg.points[a].named, self.cfg.points[b].named) {
            (true, true) => {
                self.cfg.edges.push(Edge { src: b, dst: a, t: Transition::Guard(Expr::Bool(true)) });
                return a;
            }
            (_, false) => (a, b),
            (false, true) => (b, a),
        };
        for e in &mut self.cfg.edges {
            if e.src == gone {
                e.src = keep;
            }
            if e.dst == gone {
                e.dst = keep;
            }
        }
        if self.cfg.entry == gone {
            self.cfg.entry = keep;
        }
        self.dead.insert(gone);
        keep
    }

    fn block(&mut self, stmts: &[Stmt], mut cur: PointId) -> PointId {
        for s in stmts {
            if let Some(l) = &s.label {
                cur = self.name_point(cur, l);
            }
            cur = self.stmt(&s.kind, cur);
        }
        cur
    }

    fn stmt(&mut self, s: &StmtKind, cur: PointId) -> PointId {
        match s {
            StmtKind::Skip => cur,
            StmtKind::Assign { target, value } => {
                self.edge(cur, Transition::Assign { target: target.clone(), value: value.clone() })
            }
            StmtKind::Store { array, index, value } => self.edge(
                cur,
                Transition::Write { array: array.clone(), index: index.clone(), value: value.clone() },
            ),
            StmtKind::SetOp { kind, target, lhs, rhs } => self.edge(
                cur,
                Transition::SetOp {
                    kind: *kind,
                    target: target.clone(),
                    lhs: lhs.clone(),
                    rhs: rhs.clone(),
                },
            ),
            StmtKind::Assume(c) => self.edge(cur, Transition::Guard(c.clone())),
            StmtKind::AssumeForall(q) => self.edge(cur, Transition::AssumeForall(q.clone())),
            StmtKind::If { cond, then, els } => {
                let t0 = self.edge(cur, Transition::Guard(cond.clone()));
                let t_end = self.block(then, t0);
                let e0 = self.edge(cur, Transition::Guard(Expr::not(cond.clone())));
                let e_end = self.block(els, e0);
                self.merge(t_end, e_end)
            }
            StmtKind::While { cond, body } => {
                let head = cur;
                let b0 = self.edge(head, Transition::Guard(cond.clone()));
                let b_end = self.block(body, b0);
                let head = self.merge(head, b_end);
                self.edge(head, Transition::Guard(Expr::not(cond.clone())))
            }
        }
    }
}

/// Lowers a checked program. Every statement becomes one edge; `if` and
/// `while` become pairs of guard edges. Array initializations run first,
/// from the entry point `init`. The final point is named `exit` unless the
/// source labels it.
pub fn lower_to_cfg(p: &Program) -> Result<Cfg, FrontendError> {
    let mut labels = BTreeSet::new();
    collect_labels(&p.body, &mut labels);
    let scalars: Vec<ScalarVar> =
        p.scalars().map(|d| ScalarVar { name: d.name.clone(), sort: d.sort }).collect();
    let arrays: Vec<ArrayVar> = p
        .arrays()
        .map(|d| match &d.kind {
            DeclKind::Array { dims, init } => {
                ArrayVar { name: d.name.clone(), sort: d.sort, dims: dims.clone(), init: *init }
            }
            DeclKind::Scalar => unreachable!(),
        })
        .collect();
    let all_vars: Vec<String> = scalars.iter().map(|s| s.name.clone()).collect();
    let mut lw = Lowerer {
        cfg: Cfg {
            scalars,
            arrays: arrays.clone(),
            points: vec![ControlPoint { name: ENTRY_LABEL.to_string(), named: true, vars: Vec::new() }],
            edges: Vec::new(),
            entry: 0,
            exits: Vec::new(),
            props: Vec::new(),
        },
        dead: BTreeSet::new(),
        labels,
        counter: 0,
    };
    let mut cur = 0;
    for a in &arrays {
        cur = lw.edge(cur, Transition::Init { array: a.name.clone() });
    }
    let end = lw.block(&p.body, cur);
    if !lw.cfg.points[end].named {
        lw.cfg.points[end].name = EXIT_LABEL.to_string();
        lw.cfg.points[end].named = true;
    }
    lw.cfg.exits = vec![end];
    let mut cfg = compact(lw.cfg, &lw.dead);
    for pt in &mut cfg.points {
        pt.vars = all_vars.clone();
    }
    for prop in &p.props {
        let point = resolve_point(&cfg, prop)?;
        cfg.props.push(Property { point, body: prop.body.clone(), hint: false });
    }
    Ok(cfg)
}

fn resolve_point(cfg: &Cfg, prop: &PropertySpec) -> Result<PointId, FrontendError> {
    match &prop.at {
        None => Ok(cfg.exits[0]),
        Some(l) => cfg
            .points
            .iter()
            .position(|p| p.named && &p.name == l)
            .ok_or_else(|| FrontendError::sort(prop.loc, format!("unknown label `{l}`"))),
    }
}

/// Attaches hint properties to labelled points.
pub fn add_hints(cfg: &Cfg, hints: &[PropertySpec]) -> Result<Cfg, FrontendError> {
    let mut out = cfg.clone();
    for h in hints {
        let point = resolve_point(cfg, h)?;
        out.props.push(Property { point, body: h.body.clone(), hint: true });
    }
    Ok(out)
}

/// Removes merged points and renumbers.
fn compact(mut cfg: Cfg, dead: &BTreeSet<PointId>) -> Cfg {
    let mut map = vec![usize::MAX; cfg.points.len()];
    let mut points = Vec::new();
    for (i, p) in cfg.points.iter().enumerate() {
        if !dead.contains(&i) {
            map[i] = points.len();
            points.push(p.clone());
        }
    }
    for e in &mut cfg.edges {
        e.src = map[e.src];
        e.dst = map[e.dst];
    }
    cfg.entry = map[cfg.entry];
    cfg.exits = cfg.exits.iter().map(|x| map[*x]).collect();
    cfg.points = points;
    cfg
}
