//! Splits compound statements into single normal-form transitions.

use std::collections::BTreeSet;

use super::ast::{BinOp, Expr};
use super::cfg::*;
use crate::horn::Sort;

/// Sort of a checked expression.
pub fn expr_sort(cfg: &Cfg, e: &Expr) -> Sort {
    match e {
        Expr::Int(_) => Sort::Int,
        Expr::Real(_) => Sort::Real,
        Expr::Bool(_) => Sort::Bool,
        Expr::Var(v) => cfg.scalar_sort(v).unwrap_or(Sort::Int),
        Expr::Select { array, .. } => cfg.array(array).map(|a| a.sort).unwrap_or(Sort::Int),
        Expr::Count { .. } => Sort::Int,
        Expr::Neg(a) => expr_sort(cfg, a),
        Expr::Not(_) => Sort::Bool,
        Expr::Bin(op, a, b) => match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul => {
                if expr_sort(cfg, a) == Sort::Real || expr_sort(cfg, b) == Sort::Real {
                    Sort::Real
                } else {
                    Sort::Int
                }
            }
            BinOp::Mod => Sort::Int,
            _ => Sort::Bool,
        },
    }
}

struct Norm {
    cfg: Cfg,
    temps: usize,
}

impl Norm {
    fn temp(&mut self, sort: Sort) -> String {
        loop {
            self.temps += 1;
            let name = format!("t!{}", self.temps);
            if self.cfg.scalar(&name).is_none() {
                self.cfg.scalars.push(ScalarVar { name: name.clone(), sort });
                return name;
            }
        }
    }

    fn point(&mut self) -> PointId {
        let mut n = self.cfg.points.len();
        let name = loop {
            let cand = format!("p{n}");
            if self.cfg.point_by_name(&cand).is_none() {
                break cand;
            }
            n += 1;
        };
        let vars = self.cfg.points[self.cfg.entry].vars.clone();
        self.cfg.points.push(ControlPoint { name, named: false, vars });
        self.cfg.points.len() - 1
    }

    /// Replaces every array read inside `e` by a fresh temporary, emitting
    /// the reads (innermost first) into `pre`.
    fn hoist_reads(&mut self, e: &Expr, pre: &mut Vec<Transition>) -> Expr {
        match e {
            Expr::Select { array, index } => {
                let index: Vec<Expr> = index.iter().map(|i| self.operand(i, pre)).collect();
                let sort = self.cfg.array(array).map(|a| a.sort).unwrap_or(Sort::Int);
                let t = self.temp(sort);
                pre.push(Transition::Read { target: t.clone(), array: array.clone(), index });
                Expr::Var(t)
            }
            Expr::Neg(a) => Expr::Neg(Box::new(self.hoist_reads(a, pre))),
            Expr::Not(a) => Expr::Not(Box::new(self.hoist_reads(a, pre))),
            Expr::Bin(op, a, b) => {
                let a = self.hoist_reads(a, pre);
                let b = self.hoist_reads(b, pre);
                Expr::bin(*op, a, b)
            }
            other => other.clone(),
        }
    }

    /// Turns `e` into a read-free expression, hoisting reads as needed.
    /// Literals are folded.
    fn operand(&mut self, e: &Expr, pre: &mut Vec<Transition>) -> Expr {
        if let Some(v) = e.as_literal() {
            return Expr::literal(v);
        }
        self.hoist_reads(e, pre)
    }

    fn split(&mut self, t: &Transition) -> Vec<Transition> {
        let mut pre = Vec::new();
        match t {
            Transition::Assign { target, value } => match value {
                Expr::Select { array, index } => {
                    let index: Vec<Expr> = index.iter().map(|i| self.operand(i, &mut pre)).collect();
                    let clash = index.iter().any(|i| {
                        let mut vs = BTreeSet::new();
                        i.scalar_vars(&mut vs);
                        vs.contains(target)
                    });
                    if clash {
                        let sort = self.cfg.array(array).map(|a| a.sort).unwrap_or(Sort::Int);
                        let tmp = self.temp(sort);
                        pre.push(Transition::Read { target: tmp.clone(), array: array.clone(), index });
                        pre.push(Transition::Assign { target: target.clone(), value: Expr::Var(tmp) });
                    } else {
                        pre.push(Transition::Read { target: target.clone(), array: array.clone(), index });
                    }
                }
                _ => {
                    let v = self.hoist_reads(value, &mut pre);
                    pre.push(Transition::Assign { target: target.clone(), value: v });
                }
            },
            Transition::Guard(c) => {
                let c = self.hoist_reads(c, &mut pre);
                pre.push(Transition::Guard(c));
            }
            Transition::Read { target, array, index } => {
                let index: Vec<Expr> = index.iter().map(|i| self.operand(i, &mut pre)).collect();
                pre.push(Transition::Read { target: target.clone(), array: array.clone(), index });
            }
            Transition::Write { array, index, value } => {
                let index: Vec<Expr> = index.iter().map(|i| self.operand(i, &mut pre)).collect();
                let value = self.operand(value, &mut pre);
                pre.push(Transition::Write { array: array.clone(), index, value });
            }
            other => pre.push(other.clone()),
        }
        pre
    }
}

/// Rewrites every edge into normal-form transitions: array reads and
/// writes get read-free operands, reads nested in expressions are hoisted
/// into fresh temporaries `t!N`, and `a[i] = a[j]` becomes a
/// read into a temporary followed by a write. Intermediate points are
/// anonymous.
pub fn normalize(c: &Cfg) -> Cfg {
    let mut n = Norm { cfg: c.clone(), temps: 0 };
    let edges = std::mem::take(&mut n.cfg.edges);
    let mut out = Vec::new();
    for e in &edges {
        let parts = n.split(&e.t);
        let mut src = e.src;
        for (i, t) in parts.iter().enumerate() {
            let dst = if i + 1 == parts.len() { e.dst } else { n.point() };
            out.push(Edge { src, dst, t: t.clone() });
            src = dst;
        }
    }
    n.cfg.edges = out;
    let all: Vec<String> = n.cfg.scalars.iter().map(|s| s.name.clone()).collect();
    for p in &mut n.cfg.points {
        p.vars = all.clone();
    }
    n.cfg
}
