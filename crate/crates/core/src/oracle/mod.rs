//! Brute-force soundness oracle.
//!
//! The oracle explores every state of a program within small bounds,
//! abstracts the reachable states at each control point into tables, and
//! checks that the Horn clauses derive every table tuple. Queries are
//! evaluated on the tables too: a query that fails while the property
//! holds on every concrete state is an unsound query.

pub mod alpha;
pub mod galois;
pub mod interp;
pub mod lfp;
pub mod mutate;

use std::collections::{HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;

use crate::abstraction::{AbstractionConfig, EncodeError, Layout};
use crate::frontend::Cfg;
use crate::horn::{HornSystem, Sort, Value};

pub use interp::{explore, Bounds, PropertyFailure, ReachSets, State};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("state budget of {0} exceeded")]
    Budget(usize),
    #[error("{0}")]
    TooLarge(String),
    #[error("evaluation failed: {0}")]
    Eval(String),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

/// Table tuples of one predicate that the clauses never derive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Missing {
    pub pred: String,
    pub count: usize,
    /// One missing tuple, slot by slot.
    pub example: Vec<(String, Value)>,
}

/// A query failing on the tables although its property holds concretely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnsoundQuery {
    pub clause: usize,
    pub property: Option<usize>,
    pub binding: Vec<(String, Value)>,
}

#[derive(Debug, Clone, Default)]
pub struct OracleReport {
    pub states: usize,
    pub tuples: usize,
    pub rounds: usize,
    pub missing: Vec<Missing>,
    pub unsound_queries: Vec<UnsoundQuery>,
    /// Properties violated by some bounded execution.
    pub property_failures: Vec<PropertyFailure>,
}

impl OracleReport {
    /// Soundness violations: missing tuples plus unsound queries.
    pub fn violations(&self) -> usize {
        self.missing.iter().map(|m| m.count).sum::<usize>() + self.unsound_queries.len()
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} states, {} tuples, {} rounds, {} violations",
            self.states,
            self.tuples,
            self.rounds,
            self.violations()
        )?;
        for m in &self.missing {
            let ex: Vec<String> = m.example.iter().map(|(s, v)| format!("{s}={v}")).collect();
            writeln!(f, "  missing {} tuples of {}, e.g. ({})", m.count, m.pred, ex.join(", "))?;
        }
        for q in &self.unsound_queries {
            let b: Vec<String> = q.binding.iter().map(|(s, v)| format!("{s}={v}")).collect();
            writeln!(f, "  query clause {} fails at ({})", q.clause, b.join(", "))?;
        }
        for p in &self.property_failures {
            let b: Vec<String> = p.instance.iter().map(|(s, v)| format!("{s}={v}")).collect();
            writeln!(f, "  property {} fails concretely at ({})", p.property, b.join(", "))?;
        }
        Ok(())
    }
}

/// Reachable states of one program, shared by checks of several
/// abstractions.
pub struct Oracle<'a> {
    pub cfg: &'a Cfg,
    pub bounds: Bounds,
    pub reach: ReachSets,
    pub property_failures: Vec<PropertyFailure>,
}

impl<'a> Oracle<'a> {
    pub fn new(cfg: &'a Cfg, bounds: Bounds) -> Result<Oracle<'a>, OracleError> {
        let reach = explore(cfg, &bounds)?;
        let property_failures = interp::check_properties(cfg, &reach, &bounds)?;
        Ok(Oracle { cfg, bounds, reach, property_failures })
    }

    /// Abstraction tables for every point predicate of `sys`.
    pub fn tables(&self, sys: &HornSystem, conf: &AbstractionConfig) -> Result<Vec<Option<HashSet<Vec<Value>>>>, OracleError> {
        let layout = Layout::new(self.cfg, conf)?;
        let base = self.bounds.values(Sort::Int);
        let samples = alpha::count_samples(self.cfg, &layout, &self.reach, &base);
        Ok(sys
            .preds
            .par_iter()
            .map(|sig| {
                sig.point.map(|p| {
                    let mut out = HashSet::new();
                    for st in &self.reach.states[p] {
                        alpha::alpha_state(self.cfg, &layout, conf.ordered, sig, st, &samples, &mut out);
                    }
                    out
                })
            })
            .collect())
    }

    fn domains(&self) -> HashMap<Sort, Vec<Value>> {
        [Sort::Int, Sort::Real, Sort::Bool].into_iter().map(|s| (s, self.bounds.wide_values(s))).collect()
    }

    /// Checks `sys`, an encoding of this program under `conf`.
    pub fn check(&self, sys: &HornSystem, conf: &AbstractionConfig) -> Result<OracleReport, OracleError> {
        let tables = self.tables(sys, conf)?;
        let tuples = tables.iter().flatten().map(HashSet::len).sum();
        let mut ev = lfp::Evaluator::new(sys, tables, self.domains());
        let fix = ev.fixpoint();
        let mut missing = Vec::new();
        for (p, miss) in fix.missing.iter().enumerate() {
            if let Some(first) = miss.iter().min() {
                let sig = &sys.preds[p];
                missing.push(Missing {
                    pred: sig.name.clone(),
                    count: miss.len(),
                    example: sig.slots.iter().map(|s| s.name.clone()).zip(first.iter().copied()).collect(),
                });
            }
        }
        let failing: HashSet<usize> = self.property_failures.iter().map(|f| f.property).collect();
        let unsound_queries = ev
            .query_failures()
            .into_iter()
            .filter_map(|q| {
                // Properties the cells cannot express fail by design.
                if sys.clauses[q.clause].origin.rules.iter().any(|r| r == "query-unknown") {
                    return None;
                }
                let property = sys.clauses[q.clause].origin.property;
                match property {
                    Some(p) if failing.contains(&p) => None,
                    _ => Some(UnsoundQuery { clause: q.clause, property, binding: q.binding }),
                }
            })
            .collect();
        Ok(OracleReport {
            states: self.reach.total(),
            tuples,
            rounds: fix.rounds,
            missing,
            unsound_queries,
            property_failures: self.property_failures.clone(),
        })
    }
}

/// Explores `cfg` and checks one encoding of it.
pub fn check_system(cfg: &Cfg, sys: &HornSystem, conf: &AbstractionConfig, bounds: Bounds) -> Result<OracleReport, OracleError> {
    Oracle::new(cfg, bounds)?.check(sys, conf)
}
