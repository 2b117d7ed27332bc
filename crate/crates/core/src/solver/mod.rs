//! External CHC solvers and counterexample-guided refinement.
//!
//! A Horn system that a solver refutes is unfolded into a derivation tree;
//! the leftmost branch is a CFG path whose concrete array semantics is
//! checked with z3. A feasible path is replayed by the interpreter and
//! reported. An infeasible one raises the cell count of the arrays in its
//! unsat core and the loop starts again.

pub mod run;
pub mod session;
pub mod sexp;
pub mod trace;
pub mod unfold;

use std::collections::BTreeSet;
use std::time::Duration;

use crate::abstraction::AbstractionConfig;
use crate::frontend::Cfg;
use crate::horn::{emit_smtlib, HornSystem};
use crate::oracle::interp::{replay, ConcreteTrace, State};
use crate::oracle::Bounds;
use crate::pipeline;

pub use run::{available, locate, locate_z3, portfolio, run_solver, run_text, SolverKind, SolverOutcome, SolverVerdict};
pub use session::{SatResult, SmtSession};
pub use trace::{
    check_trace, extract_branch, trace_to_concrete_formula, Trace, TraceCheck, TraceError, TraceFormula, Witness,
};
pub use unfold::{find_unfolding, find_unfolding_deepening, validate_tree, DerivationTree, UnfoldLimits, Unfolding};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("solver {0} is not installed (set CELLMORPH_Z3 or CELLMORPH_ELDARICA, or put it on PATH)")]
    Missing(SolverKind),
    #[error("no solver available")]
    NoSolver,
    #[error("cannot start {0}: {1}")]
    Spawn(String, #[source] std::io::Error),
    #[error(transparent)]
    Io(std::io::Error),
    #[error("solver protocol error: {0}")]
    Protocol(String),
    #[error("solver stopped answering")]
    Hung,
    #[error("encoding failed: {0}")]
    Encode(String),
}

/// Result of raising cell counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Refinement {
    Refined(AbstractionConfig),
    /// Every candidate array already has two cells.
    Exhausted,
}

/// Adds one cell to every array of `arrays` that has fewer than two.
pub fn refine(conf: &AbstractionConfig, arrays: &BTreeSet<String>) -> Refinement {
    let mut next = conf.clone();
    let mut changed = false;
    for a in arrays {
        let c = conf.cells_of(a);
        if c < 2 {
            next.cells.insert(a.clone(), c + 1);
            changed = true;
        }
    }
    if changed {
        Refinement::Refined(next)
    } else {
        Refinement::Exhausted
    }
}

/// Settings of the verification loop.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub solvers: Vec<SolverKind>,
    /// Per solver run.
    pub timeout: Duration,
    pub max_refinements: usize,
    pub unfold: UnfoldLimits,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            solvers: vec![SolverKind::Spacer],
            timeout: Duration::from_secs(60),
            max_refinements: 4,
            unfold: UnfoldLimits::default(),
        }
    }
}

/// Final answer of the loop.
#[derive(Debug, Clone)]
pub enum Verdict {
    Proved { conf: AbstractionConfig, solver: SolverKind, model: String },
    Violated { trace: Box<ConcreteTrace>, formula: Box<TraceFormula> },
    /// Spurious counterexamples remain with two cells everywhere.
    Exhausted { reason: String },
    /// A time or search budget ran out.
    Unknown { reason: String },
}

/// One round of the loop, for reporting.
#[derive(Debug, Clone)]
pub struct Round {
    pub conf: AbstractionConfig,
    pub solver: String,
    pub tree: Option<DerivationTree>,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub verdict: Verdict,
    pub rounds: Vec<Round>,
}

impl VerifyReport {
    pub fn refinements(&self) -> usize {
        self.rounds.len().saturating_sub(1)
    }
}

fn arrays_of(cfg: &Cfg, trace: &Trace) -> BTreeSet<String> {
    trace.edges().into_iter().flat_map(|e| cfg.edges[e].t.arrays()).collect()
}

/// Replays a feasible trace formula's witness.
pub fn replay_witness(cfg: &Cfg, trace: &Trace, w: &Witness) -> Result<ConcreteTrace, String> {
    let property = trace.property.ok_or("the violated query has no property")?;
    let mut init = State {
        scalars: vec![None; cfg.scalars.len()],
        arrays: vec![None; cfg.arrays.len()],
        orig: vec![None; cfg.arrays.len()],
    };
    for (x, v) in &w.scalars {
        let i = cfg.scalars.iter().position(|s| &s.name == x).ok_or_else(|| format!("unknown scalar {x}"))?;
        init.scalars[i] = Some(*v);
    }
    let mut lo = 0i64;
    let mut hi = 0i64;
    let mut len = 0usize;
    let ints = w.scalars.values().chain(w.binders.values()).chain(w.inits.iter().flat_map(|(_, a)| a.values.iter()));
    for v in ints {
        if let crate::horn::Value::Int(i) = v {
            lo = lo.min(*i);
            hi = hi.max(*i);
        }
    }
    for (_, a) in &w.inits {
        len = len.max(a.size());
    }
    let bounds = Bounds { max_len: len.max(1), lo, hi, ..Bounds::default() };
    replay(cfg, &trace.edges(), init, &w.inits, property, &w.binders, &bounds).map_err(|e| e.to_string())
}

/// Analyses an unsatisfiable system: finds a derivation tree, checks its
/// leftmost branch and either replays it or names arrays to refine.
pub enum Analysis {
    Violated(Box<ConcreteTrace>, Box<TraceFormula>),
    Refine(BTreeSet<String>, String),
    Unknown(String),
}

/// One counterexample analysis step, with the tree it used.
pub fn analyse(
    cfg: &Cfg,
    sys: &HornSystem,
    opts: &VerifyOptions,
) -> Result<(Option<DerivationTree>, Analysis), SolverError> {
    let z3 = locate_z3().ok_or(SolverError::Missing(SolverKind::Spacer))?;
    let mut smt = SmtSession::start(&z3, opts.timeout)?;
    let tree = match find_unfolding_deepening(sys, &mut smt, opts.unfold)? {
        Unfolding::Found(t) => t,
        Unfolding::None => {
            return Ok((None, Analysis::Unknown(format!("no derivation tree of height <= {}", opts.unfold.max_depth))))
        }
        Unfolding::Incomplete => return Ok((None, Analysis::Unknown("derivation tree search gave up".into()))),
    };
    drop(smt);
    if let Err(e) = validate_tree(sys, &tree) {
        return Err(SolverError::Protocol(format!("invalid derivation tree: {e}")));
    }
    let trace = extract_branch(sys, &tree);
    let all = arrays_of(cfg, &trace);
    let formula = match trace_to_concrete_formula(cfg, &trace) {
        Ok(f) => f,
        Err(e) => return Ok((Some(tree), Analysis::Refine(all, e.to_string()))),
    };
    let mut smt = SmtSession::start(&z3, opts.timeout)?;
    let analysis = match check_trace(&formula, &mut smt)? {
        TraceCheck::Feasible(w) => match replay_witness(cfg, &trace, &w) {
            Ok(t) => Analysis::Violated(Box::new(t), Box::new(formula)),
            Err(e) => Analysis::Unknown(format!("witness does not replay: {e}")),
        },
        TraceCheck::Infeasible { core, arrays } => {
            let arrays = if arrays.is_empty() { all } else { arrays };
            Analysis::Refine(arrays, format!("spurious; unsat core {}", core.join(" ")))
        }
        TraceCheck::Unknown => Analysis::Unknown("trace formula undecided".into()),
    };
    Ok((Some(tree), analysis))
}

/// Runs the solve, analyse, refine loop from `conf`.
pub fn verify(cfg: &Cfg, conf: &AbstractionConfig, opts: &VerifyOptions) -> Result<VerifyReport, SolverError> {
    let mut conf = conf.clone();
    let mut rounds = Vec::new();
    loop {
        let sys = pipeline::to_horn(cfg, &conf, false).map_err(|e| SolverError::Encode(e.to_string()))?;
        let out = portfolio(&emit_smtlib(&sys), &opts.solvers, opts.timeout)?;
        let mut round = Round { conf: conf.clone(), solver: out.kind.to_string(), tree: None, note: String::new() };
        let (verdict, next) = match out.verdict {
            SolverVerdict::Sat { model } => (Some(Verdict::Proved { conf: conf.clone(), solver: out.kind, model }), None),
            SolverVerdict::Unsat => {
                let (tree, analysis) = analyse(cfg, &sys, opts)?;
                round.tree = tree;
                match analysis {
                    Analysis::Violated(trace, formula) => (Some(Verdict::Violated { trace, formula }), None),
                    Analysis::Unknown(reason) => (Some(Verdict::Unknown { reason }), None),
                    Analysis::Refine(arrays, note) => {
                        round.note = note;
                        let refined = match refine(&conf, &arrays) {
                            Refinement::Exhausted if !arrays.is_empty() => {
                                let every: BTreeSet<String> = cfg.arrays.iter().map(|a| a.name.clone()).collect();
                                refine(&conf, &every)
                            }
                            r => r,
                        };
                        match refined {
                            Refinement::Refined(c) if rounds.len() < opts.max_refinements => (None, Some(c)),
                            Refinement::Refined(_) => {
                                (Some(Verdict::Unknown { reason: "refinement limit reached".into() }), None)
                            }
                            Refinement::Exhausted => (
                                Some(Verdict::Exhausted { reason: "spurious counterexample with two cells everywhere".into() }),
                                None,
                            ),
                        }
                    }
                }
            }
            SolverVerdict::Unknown => (Some(Verdict::Unknown { reason: format!("{} answered unknown", out.kind) }), None),
            SolverVerdict::Timeout => (Some(Verdict::Unknown { reason: "solver time limit".into() }), None),
            SolverVerdict::Crash { diagnostic } => (Some(Verdict::Unknown { reason: diagnostic }), None),
        };
        rounds.push(round);
        if let Some(verdict) = verdict {
            return Ok(VerifyReport { verdict, rounds });
        }
        if let Some(c) = next {
            log::info!("refining to {:?}", c.cells);
            conf = c;
        }
    }
}
