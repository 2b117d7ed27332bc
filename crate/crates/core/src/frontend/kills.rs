//! Scalar liveness and kill insertion.

use std::collections::BTreeSet;

use super::cfg::*;

/// Scalars each property needs at its point.
fn property_uses(cfg: &Cfg) -> Vec<BTreeSet<String>> {
    let mut out = vec![BTreeSet::new(); cfg.points.len()];
    for p in &cfg.props {
        let mut vs = BTreeSet::new();
        p.body.guard.scalar_vars(&mut vs);
        p.body.conclusion.scalar_vars(&mut vs);
        for (b, _) in &p.body.binders {
            vs.remove(b);
        }
        out[p.point].extend(vs);
    }
    out
}

/// Backward liveness: the scalars live at each point. Array bounds and
/// property variables count as uses.
pub fn liveness(cfg: &Cfg) -> Vec<BTreeSet<String>> {
    let always = cfg.range_vars();
    let extra = property_uses(cfg);
    let mut live: Vec<BTreeSet<String>> =
        extra.iter().map(|e| e.union(&always).cloned().collect()).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for e in cfg.edges.iter().rev() {
            let mut through = live[e.dst].clone();
            if let Some(d) = e.t.def() {
                through.remove(d);
            }
            if let Transition::Kill(vs) = &e.t {
                for v in vs {
                    through.remove(v);
                }
            }
            through.extend(e.t.uses());
            let before = live[e.src].len();
            live[e.src].extend(through);
            if live[e.src].len() != before {
                changed = true;
            }
        }
    }
    live
}

/// Sets every point's scalar vector to its live variables and inserts a
/// `Kill` edge wherever variables present before an edge are not needed
/// after it. Arrays are never killed.
pub fn insert_kills(c: &Cfg) -> Cfg {
    let live = liveness(c);
    let mut cfg = c.clone();
    for (p, l) in cfg.points.iter_mut().zip(&live) {
        p.vars = c.ordered(l);
    }
    let mut edges = Vec::new();
    for e in &c.edges {
        let before = &live[e.src];
        let after = &live[e.dst];
        let dying: BTreeSet<String> = before.difference(after).cloned().collect();
        let dying: BTreeSet<String> = match &e.t {
            Transition::Kill(vs) => dying.into_iter().filter(|v| !vs.contains(v)).collect(),
            _ => dying,
        };
        if dying.is_empty() {
            edges.push(e.clone());
            continue;
        }
        let mut mid_vars: BTreeSet<String> = before.clone();
        if let Some(d) = e.t.def() {
            if after.contains(d) {
                mid_vars.insert(d.to_string());
            }
        }
        if let Transition::Kill(vs) = &e.t {
            for v in vs {
                mid_vars.remove(v);
            }
        }
        let mid = cfg.points.len();
        let mut n = mid;
        let name = loop {
            let cand = format!("p{n}");
            if cfg.point_by_name(&cand).is_none() {
                break cand;
            }
            n += 1;
        };
        cfg.points.push(ControlPoint { name, named: false, vars: c.ordered(&mid_vars) });
        edges.push(Edge { src: e.src, dst: mid, t: e.t.clone() });
        edges.push(Edge { src: mid, dst: e.dst, t: Transition::Kill(c.ordered(&dying)) });
    }
    cfg.edges = edges;
    cfg
}
