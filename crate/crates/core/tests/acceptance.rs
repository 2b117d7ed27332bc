//! Acceptance checks, one result line per criterion. Solver-dependent
//! criteria are skipped when the solver is not installed.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cellmorph::abstraction::{AbstractionConfig, MultisetMode};
use cellmorph::frontend::{Cfg, Transition};
use cellmorph::horn::{emit_smtlib, Head, HornSystem, Value};
use cellmorph::oracle::interp::{eval_expr, successors, ConcreteTrace};
use cellmorph::oracle::mutate::{self, Mutation};
use cellmorph::oracle::{galois, Bounds, Oracle};
use cellmorph::pipeline::{self, PipelineError};
use cellmorph::solver::{
    self, SmtSession, SolverKind, SolverVerdict, TraceCheck, UnfoldLimits, Unfolding, Verdict, VerifyOptions,
};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, name: &str, o: Outcome) {
        match o {
            Outcome::Pass(d) => println!("PASS  {name}: {d}"),
            Outcome::Fail(d) => {
                self.failed += 1;
                println!("FAIL  {name}: {d}")
            }
            Outcome::Skip(d) => println!("SKIP  {name}: {d}"),
        }
    }
}

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

fn load(name: &str, hints: Option<&str>) -> Result<Cfg, String> {
    let src = std::fs::read_to_string(corpus(name)).map_err(|e| format!("{name}: {e}"))?;
    let hints = hints.map(|h| std::fs::read_to_string(corpus(h)).map_err(|e| format!("{h}: {e}"))).transpose()?;
    pipeline::compile(&src, hints.as_deref()).map(|c| c.cfg).map_err(|e| format!("{name}: {e}"))
}

fn conf(cells: &str) -> AbstractionConfig {
    let mut c = AbstractionConfig::default();
    for (i, part) in cells.split(',').enumerate() {
        match part.split_once('=') {
            Some((a, n)) => {
                c.cells.insert(a.to_string(), n.parse().expect("cell count"));
            }
            None if i == 0 => c.default_cells = part.parse().expect("cell count"),
            None => panic!("bad cells `{cells}`"),
        }
    }
    c
}

const ORACLE_PROGRAMS: [&str; 10] = [
    "loop_ij.arr",
    "array_fill1.arr",
    "array_fill1_even_odd.arr",
    "real_indexed_map.arr",
    "array_fill2.arr",
    "array_reverse.arr",
    "find_minimum.arr",
    "selection_sort.arr",
    "selection_sort_perm.arr",
    "counterexample.arr",
];

fn modes() -> Vec<(&'static str, AbstractionConfig)> {
    let c1 = conf("1");
    let c2 = conf("2");
    vec![
        ("cells=1", c1.clone()),
        ("cells=2", c2.clone()),
        ("cells=2 unordered", AbstractionConfig { ordered: false, ..c2.clone() }),
        ("cells=1 weakened", AbstractionConfig { weakened_read: true, ..c1.clone() }),
        ("cells=2 weakened", AbstractionConfig { weakened_read: true, ..c2.clone() }),
        ("cells=1 multiset", AbstractionConfig { multiset: MultisetMode::TrackOrig, ..c1.clone() }),
        ("cells=2 multiset", AbstractionConfig { multiset: MultisetMode::TrackOrig, ..c2 }),
        ("cells=1 shared-index", AbstractionConfig { shared_index: true, ..c1 }),
    ]
}

/// Mutations chosen by rule family: program, cells, multiset, rule name and
/// kind of corruption.
const MUTATIONS: [(&str, &str, bool, &str, &str); 10] = [
    ("array_fill1.arr", "1", false, "guard", "flip"),
    ("array_fill1.arr", "1", false, "assign", "shift"),
    ("array_fill1.arr", "1", false, "entry", "drop"),
    ("array_fill1.arr", "1", false, "write1-same", "drop"),
    ("find_minimum.arr", "1", false, "read1-other", "drop"),
    ("array_reverse.arr", "2", false, "read2-below", "drop"),
    ("counterexample.arr", "1", false, "init1", "drop"),
    ("selection_sort_perm.arr", "1", true, "count-decr-same", "drop"),
    ("selection_sort.arr", "2", false, "init2-diagonal", "drop"),
    ("array_fill1_even_odd.arr", "1", false, "write1-same", "shift"),
];

fn pick_mutation(sys: &HornSystem, rule: &str, kind: &str) -> Option<Mutation> {
    mutate::mutations(sys).into_iter().find(|m| {
        let (c, k) = match m {
            Mutation::FlipGuard(c) => (*c, "flip"),
            Mutation::ShiftHead { clause, .. } => (*clause, "shift"),
            Mutation::DropClause(c) => (*c, "drop"),
        };
        k == kind && sys.clauses[c].origin.rules.iter().any(|r| r == rule)
    })
}

fn criterion_oracle(rep: &mut Report) {
    let start = Instant::now();
    let mut checked = 0;
    let mut inapplicable = 0;
    let mut problems = Vec::new();
    for prog in ORACLE_PROGRAMS {
        let cfg = match load(prog, None) {
            Ok(c) => c,
            Err(e) => {
                problems.push(e);
                continue;
            }
        };
        let oracle = match Oracle::new(&cfg, Bounds::default()) {
            Ok(o) => o,
            Err(e) => {
                problems.push(format!("{prog}: {e}"));
                continue;
            }
        };
        for (mode, c) in modes() {
            for raw in [false, true] {
                let sys = match pipeline::to_horn(&cfg, &c, raw) {
                    Ok(s) => s,
                    Err(PipelineError::Encode(_)) => {
                        inapplicable += 1;
                        continue;
                    }
                    Err(e) => {
                        problems.push(format!("{prog} {mode}: {e}"));
                        continue;
                    }
                };
                checked += 1;
                match oracle.check(&sys, &c) {
                    Ok(r) if r.violations() == 0 => {}
                    Ok(r) => problems.push(format!("{prog} {mode} raw={raw}: {} violations", r.violations())),
                    Err(e) => problems.push(format!("{prog} {mode} raw={raw}: {e}")),
                }
            }
        }
    }
    let mut detected = 0;
    for (prog, cells, multiset, rule, kind) in MUTATIONS {
        let mut c = conf(cells);
        if multiset {
            c.multiset = MultisetMode::TrackOrig;
        }
        let result = load(prog, None).and_then(|cfg| {
            let sys = pipeline::to_horn(&cfg, &c, false).map_err(|e| e.to_string())?;
            let m = pick_mutation(&sys, rule, kind).ok_or_else(|| format!("no {kind} mutation of a {rule} clause"))?;
            let r = Oracle::new(&cfg, Bounds::default())
                .and_then(|o| o.check(&mutate::apply(&sys, &m), &c))
                .map_err(|e| e.to_string())?;
            Ok((m, r.violations()))
        });
        match result {
            Ok((_, v)) if v > 0 => detected += 1,
            Ok((m, _)) => problems.push(format!("{prog}: {m} ({rule}) not detected")),
            Err(e) => problems.push(format!("{prog}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    let summary = format!(
        "{checked} encodings with zero violations ({inapplicable} inapplicable modes), {detected}/{} mutations detected, {:.1?}",
        MUTATIONS.len(),
        elapsed
    );
    let o = if !problems.is_empty() {
        Outcome::Fail(format!("{summary}; {}", problems.join("; ")))
    } else if elapsed > Duration::from_secs(120) {
        Outcome::Fail(format!("{summary}; over two minutes"))
    } else {
        Outcome::Pass(summary)
    };
    rep.line("1 oracle suite", o);
}

fn criterion_galois(rep: &mut Report) {
    let o = match galois::check_all(2, &[0, 1]) {
        Ok(reports) => {
            let bad: Vec<&str> = reports.iter().filter(|r| !r.holds()).map(|r| r.name).collect();
            let names: Vec<&str> = reports.iter().map(|r| r.name).collect();
            if bad.is_empty() {
                Outcome::Pass(format!("laws hold for {}", names.join(", ")))
            } else {
                Outcome::Fail(format!("laws fail for {}", bad.join(", ")))
            }
        }
        Err(e) => Outcome::Fail(e.to_string()),
    };
    rep.line("2 Galois laws", o);
}

struct SolverRow {
    label: &'static str,
    program: &'static str,
    hints: Option<&'static str>,
    conf: AbstractionConfig,
    /// Alternatives: the row passes when any available one answers sat.
    solvers: &'static [(SolverKind, u64)],
}

fn solver_rows() -> Vec<SolverRow> {
    let perm = AbstractionConfig { multiset: MultisetMode::TrackOrig, ..conf("1") };
    vec![
        SolverRow { label: "fill 1D", program: "array_fill1.arr", hints: None, conf: conf("1"), solvers: &[(SolverKind::Spacer, 60)] },
        SolverRow { label: "fill 1D", program: "array_fill1.arr", hints: None, conf: conf("1"), solvers: &[(SolverKind::Z3Pdr, 60)] },
        SolverRow { label: "fill 1D", program: "array_fill1.arr", hints: None, conf: conf("1"), solvers: &[(SolverKind::Eldarica, 60)] },
        SolverRow {
            label: "even/odd fill",
            program: "array_fill1_even_odd.arr",
            hints: None,
            conf: conf("1"),
            solvers: &[(SolverKind::Spacer, 60)],
        },
        SolverRow {
            label: "reversal",
            program: "array_reverse.arr",
            hints: None,
            conf: conf("1,a=2"),
            solvers: &[(SolverKind::Z3Pdr, 300), (SolverKind::Spacer, 1800)],
        },
        SolverRow { label: "find-minimum", program: "find_minimum.arr", hints: None, conf: conf("1"), solvers: &[(SolverKind::Spacer, 300)] },
        SolverRow {
            label: "selection sort with hint",
            program: "selection_sort.arr",
            hints: Some("selection_sort.hints"),
            conf: conf("2"),
            solvers: &[(SolverKind::Spacer, 120)],
        },
        SolverRow {
            label: "selection sort permutation",
            program: "selection_sort_perm.arr",
            hints: None,
            conf: perm,
            solvers: &[(SolverKind::Spacer, 1800)],
        },
        SolverRow {
            label: "rational-indexed map",
            program: "real_indexed_map.arr",
            hints: None,
            conf: conf("1"),
            solvers: &[(SolverKind::Z3Pdr, 60)],
        },
        SolverRow {
            label: "rational-indexed map",
            program: "real_indexed_map.arr",
            hints: None,
            conf: conf("1"),
            solvers: &[(SolverKind::Spacer, 60)],
        },
        SolverRow { label: "2D fill", program: "array_fill2.arr", hints: None, conf: conf("1"), solvers: &[(SolverKind::Spacer, 300)] },
    ]
}

fn criterion_solvers(rep: &mut Report) {
    for row in solver_rows() {
        let names: Vec<&str> = row.solvers.iter().map(|(k, _)| k.name()).collect();
        let name = format!("3 {} ({})", row.label, names.join(" or "));
        let usable: Vec<(SolverKind, u64)> = row.solvers.iter().copied().filter(|(k, _)| solver::available(*k)).collect();
        if usable.is_empty() {
            rep.line(&name, Outcome::Skip(format!("{} not available", names.join(", "))));
            continue;
        }
        let text = match load(row.program, row.hints).and_then(|cfg| {
            pipeline::to_horn(&cfg, &row.conf, false).map(|s| emit_smtlib(&s)).map_err(|e| e.to_string())
        }) {
            Ok(t) => t,
            Err(e) => {
                rep.line(&name, Outcome::Fail(e));
                continue;
            }
        };
        let mut notes = Vec::new();
        let mut passed = None;
        for (kind, secs) in usable {
            match solver::run_text(&text, kind, Duration::from_secs(secs), None) {
                Ok(o) if matches!(o.verdict, SolverVerdict::Sat { .. }) => {
                    passed = Some(format!("{kind} sat in {:.1?} (limit {secs} s)", o.elapsed));
                    break;
                }
                Ok(o) => notes.push(format!("{kind} {} after {:.1?} (limit {secs} s)", o.verdict.label(), o.elapsed)),
                Err(e) => notes.push(format!("{kind}: {e}")),
            }
        }
        rep.line(&name, passed.map(Outcome::Pass).unwrap_or_else(|| Outcome::Fail(notes.join("; "))));
    }
}

fn criterion_counterexample(rep: &mut Report) -> Result<String, String> {
    let _ = rep;
    let cfg = load("counterexample.arr", None)?;
    let c1 = conf("1");
    let sys = pipeline::to_horn(&cfg, &c1, false).map_err(|e| e.to_string())?;
    let out = solver::run_text(&emit_smtlib(&sys), SolverKind::Spacer, Duration::from_secs(60), None)
        .map_err(|e| e.to_string())?;
    if out.verdict != SolverVerdict::Unsat {
        return Err(format!("cells=1 answer is {}, expected unsat", out.verdict.label()));
    }
    let z3 = solver::locate_z3().ok_or("z3 not found")?;
    let mut smt = SmtSession::start(&z3, Duration::from_secs(60)).map_err(|e| e.to_string())?;
    let limits = UnfoldLimits { max_depth: 6, ..UnfoldLimits::default() };
    let tree = match solver::find_unfolding_deepening(&sys, &mut smt, limits).map_err(|e| e.to_string())? {
        Unfolding::Found(t) => t,
        other => return Err(format!("no tree at depth <= 6: {other:?}")),
    };
    solver::validate_tree(&sys, &tree)?;
    let top = tree.root.children.first().ok_or("query without body")?;
    let Head::Atom(h) = &sys.clauses[top.clause].head else { return Err("child is a query".into()) };
    if h.pred != "end" {
        return Err(format!("tree is rooted at {}, expected end", h.pred));
    }
    let (v1, v2) = (tree.root.assignment.get("v1"), tree.root.assignment.get("v2"));
    match (v1, v2) {
        (Some(a), Some(b)) if a != b => {}
        _ => return Err(format!("root does not violate v1 = v2: v1={v1:?} v2={v2:?}")),
    }
    let trace = solver::extract_branch(&sys, &tree);
    let formula = solver::trace_to_concrete_formula(&cfg, &trace).map_err(|e| e.to_string())?;
    let mut smt = SmtSession::start(&z3, Duration::from_secs(60)).map_err(|e| e.to_string())?;
    let arrays = match solver::check_trace(&formula, &mut smt).map_err(|e| e.to_string())? {
        TraceCheck::Infeasible { arrays, .. } => arrays,
        TraceCheck::Feasible(_) => return Err("leftmost trace formula is sat".into()),
        TraceCheck::Unknown => return Err("leftmost trace formula is unknown".into()),
    };
    let refined = match solver::refine(&c1, &arrays) {
        solver::Refinement::Refined(c) => c,
        solver::Refinement::Exhausted => return Err("refinement exhausted".into()),
    };
    if refined.cells_of("a") != 2 {
        return Err(format!("refinement gave {:?}", refined.cells));
    }
    let sys2 = pipeline::to_horn(&cfg, &refined, false).map_err(|e| e.to_string())?;
    let out2 = solver::run_text(&emit_smtlib(&sys2), SolverKind::Spacer, Duration::from_secs(120), None)
        .map_err(|e| e.to_string())?;
    if !matches!(out2.verdict, SolverVerdict::Sat { .. }) {
        return Err(format!("cells=2 answer is {}", out2.verdict.label()));
    }
    Ok(format!(
        "unsat at cells=1, tree of depth {} rooted at {}, trace unsat, cells a=2 sat in {:.1?}",
        tree.depth(),
        solver::unfold::node_label(&sys, top),
        out2.elapsed
    ))
}

/// Replays `t` step by step with the interpreter and checks the final
/// property instance.
fn check_replay(cfg: &Cfg, t: &ConcreteTrace) -> Result<(), String> {
    let wide = Bounds { lo: -1000, hi: 1000, max_len: 1000, ..Bounds::default() };
    for (i, &e) in t.edges.iter().enumerate() {
        let edge = &cfg.edges[e];
        let choice: Option<BTreeMap<String, _>> = match &edge.t {
            Transition::Init { array } => {
                let ai = cfg.array_index(array).ok_or("unknown array")?;
                let a = t.states[i + 1].arrays[ai].clone().ok_or("init without contents")?;
                Some([(array.clone(), a)].into())
            }
            _ => None,
        };
        let succ = successors(cfg, &t.states[i], &edge.t, &wide, choice.as_ref()).map_err(|e| e.to_string())?;
        if !succ.contains(&t.states[i + 1]) {
            return Err(format!("step {i} (e{e}) does not replay"));
        }
    }
    let p = &cfg.props[t.property];
    let last = t.states.last().ok_or("empty trace")?;
    let g = eval_expr(cfg, last, &p.body.guard, &t.instance);
    let c = eval_expr(cfg, last, &p.body.conclusion, &t.instance);
    match (g, c) {
        (Ok(Value::Bool(true)), Ok(Value::Bool(false))) => Ok(()),
        _ => Err("final state satisfies the property".into()),
    }
}

fn criterion_violation() -> Result<String, String> {
    let start = Instant::now();
    let cfg = load("array_fill1_bug.arr", None)?;
    let opts = VerifyOptions { timeout: Duration::from_secs(60), ..VerifyOptions::default() };
    let report = solver::verify(&cfg, &conf("1"), &opts).map_err(|e| e.to_string())?;
    let Verdict::Violated { trace, .. } = report.verdict else {
        return Err(format!("verdict is {:?}", report.verdict));
    };
    check_replay(&cfg, &trace)?;
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        return Err(format!("took {elapsed:.1?}"));
    }
    Ok(format!("violated; {}-step trace replays to the failing assertion in {elapsed:.1?}", trace.edges.len()))
}

fn criterion_determinism(rep: &mut Report) {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus(""))
        .map(|d| d.flatten().map(|e| e.path()).filter(|p| p.extension().is_some_and(|x| x == "arr")).collect())
        .unwrap_or_default();
    files.sort();
    let mut problems = Vec::new();
    let mut compared = 0;
    for f in &files {
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or("?").to_string();
        for (_, c) in modes() {
            let run = || load(&name, None).and_then(|cfg| pipeline::to_horn(&cfg, &c, false).map_err(|e| e.to_string()));
            match (run(), run()) {
                (Ok(a), Ok(b)) => {
                    compared += 1;
                    if emit_smtlib(&a) != emit_smtlib(&b) {
                        problems.push(name.clone());
                    }
                }
                (Err(a), Err(b)) if a == b => {}
                _ => problems.push(format!("{name}: runs disagree on success")),
            }
        }
    }
    let o = if files.is_empty() {
        Outcome::Fail("no corpus files found".into())
    } else if problems.is_empty() {
        Outcome::Pass(format!("{} files, {compared} encodings byte-identical across two runs", files.len()))
    } else {
        Outcome::Fail(problems.join("; "))
    };
    rep.line("6 emit determinism", o);
}

/// Criterion numbers given on the command line select a subset; none runs all.
fn selected() -> impl Fn(u32) -> bool {
    let picked: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    move |n| picked.is_empty() || picked.contains(&n)
}

fn main() -> ExitCode {
    let want = selected();
    let mut rep = Report { failed: 0 };
    if want(1) {
        criterion_oracle(&mut rep);
    }
    if want(2) {
        criterion_galois(&mut rep);
    }
    if want(3) {
        criterion_solvers(&mut rep);
    }
    let spacer = solver::available(SolverKind::Spacer);
    if want(4) {
        let o = if !spacer {
            Outcome::Skip("spacer not available".into())
        } else {
            match criterion_counterexample(&mut rep) {
                Ok(d) => Outcome::Pass(d),
                Err(e) => Outcome::Fail(e),
            }
        };
        rep.line("4 counterexample pipeline", o);
    }
    if want(5) {
        let o = if !spacer {
            Outcome::Skip("spacer not available".into())
        } else {
            match criterion_violation() {
                Ok(d) => Outcome::Pass(d),
                Err(e) => Outcome::Fail(e),
            }
        };
        rep.line("5 violated path", o);
    }
    if want(6) {
        criterion_determinism(&mut rep);
    }
    if rep.failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", rep.failed);
        ExitCode::FAILURE
    }
}
