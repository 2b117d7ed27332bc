//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use cellmorph::abstraction::{AbstractionConfig, MultisetMode};
use cellmorph::frontend::Cfg;
use cellmorph::horn::emit_smtlib;
use cellmorph::oracle::interp::show_state;
use cellmorph::oracle::{mutate, Bounds, Oracle};
use cellmorph::pipeline;
use cellmorph::solver::{self, SolverError, SolverKind, TraceCheck, UnfoldLimits, Unfolding, Verdict, VerifyOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cellmorph", version, about = "Array programs to array-free Horn clauses")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the SMT-LIB HORN encoding.
    Emit {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        abs: Abs,
        /// Print the control-flow graph instead.
        #[arg(long)]
        cfg: bool,
        /// Write to a file instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Prove the properties, refining the abstraction on spurious
    /// counterexamples.
    Solve {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        abs: Abs,
        #[command(flatten)]
        run: RunArgs,
        /// Largest number of refinements.
        #[arg(long, default_value_t = 4)]
        max_refinements: usize,
        /// Witness file for a violation (default: FILE.witness).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check the encoding against bounded concrete executions.
    CheckOracle {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        abs: Abs,
        /// Exploration bounds: `n=LEN,lo=MIN,hi=MAX`.
        #[arg(long, default_value = "n=3,lo=0,hi=3")]
        bounds: String,
        /// Give up after this many states.
        #[arg(long, default_value_t = 2_000_000)]
        max_states: usize,
        /// Check the encoding with candidate mutation N applied instead.
        #[arg(long, value_name = "N")]
        mutate: Option<usize>,
        /// Check that every candidate mutation is detected.
        #[arg(long)]
        mutations: bool,
    },
    /// Search a derivation tree of a violated query and check its
    /// leftmost branch concretely.
    Cex {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        abs: Abs,
        /// Largest number of atom levels below the query.
        #[arg(long, default_value_t = 16)]
        depth: usize,
        /// Per-check time limit in seconds.
        #[arg(long, default_value_t = 60)]
        timeout: u64,
        /// Trace formula file (default: FILE.trace.smt2).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Input {
    /// Program file.
    file: PathBuf,
    /// Hint properties attached to labelled points.
    #[arg(long, alias = "hints")]
    hint: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Solver to run; repeat for a portfolio (default: every installed one).
    #[arg(long = "solver", value_enum)]
    solvers: Vec<SolverArg>,
    /// Per-run time limit in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Spacer,
    Z3pdr,
    Eldarica,
}

impl SolverArg {
    fn kind(self) -> SolverKind {
        match self {
            SolverArg::Spacer => SolverKind::Spacer,
            SolverArg::Z3pdr => SolverKind::Z3Pdr,
            SolverArg::Eldarica => SolverKind::Eldarica,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Multiset {
    Off,
    Track,
    #[value(alias = "orig")]
    TrackOrig,
}

#[derive(Args)]
struct Abs {
    /// Distinguished cells: `N` or `N,array=M,...`.
    #[arg(long, default_value = "1")]
    cells: String,
    /// Keep `k1 <= k2` in two-cell tuples (the default).
    #[arg(long, conflicts_with = "unordered")]
    ordered: bool,
    /// Keep all pairs of cells.
    #[arg(long)]
    unordered: bool,
    /// Reads off the distinguished cells return unconstrained values.
    #[arg(long, alias = "weakened-read")]
    weakened: bool,
    /// Arrays with the same index domain share their cells.
    #[arg(long)]
    shared_index: bool,
    /// Omit bounds guards on cells produced by reads and writes.
    #[arg(long)]
    no_bounds: bool,
    /// Track per-value counts.
    #[arg(long, value_enum, default_value = "off")]
    multiset: Multiset,
    /// Do not pin unconstrained cells in queries.
    #[arg(long)]
    no_pin: bool,
    /// Skip clause simplification.
    #[arg(long)]
    raw: bool,
}

impl Abs {
    fn config(&self) -> anyhow::Result<AbstractionConfig> {
        let mut conf = AbstractionConfig::default();
        for (i, part) in self.cells.split(',').map(str::trim).enumerate() {
            match part.split_once('=') {
                Some((a, n)) => {
                    let n = n.trim().parse().with_context(|| format!("bad cell count in `{part}`"))?;
                    conf.cells.insert(a.trim().to_string(), n);
                }
                None if i == 0 => {
                    conf.default_cells = part.parse().with_context(|| format!("bad cell count `{part}`"))?;
                }
                None => anyhow::bail!("expected `array=N` in `{part}`"),
            }
        }
        conf.ordered = !self.unordered;
        conf.weakened_read = self.weakened;
        conf.shared_index = self.shared_index;
        conf.include_bounds_guards = !self.no_bounds;
        conf.pin_cells = !self.no_pin;
        conf.multiset = match self.multiset {
            Multiset::Off => MultisetMode::Off,
            Multiset::Track => MultisetMode::Track,
            Multiset::TrackOrig => MultisetMode::TrackOrig,
        };
        Ok(conf)
    }
}

fn parse_bounds(spec: &str, max_states: usize) -> anyhow::Result<Bounds> {
    let mut b = Bounds { max_states, ..Bounds::default() };
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').with_context(|| format!("expected `key=value` in `{part}`"))?;
        let v = v.trim();
        match k.trim() {
            "n" => b.max_len = v.parse().with_context(|| format!("bad length `{v}`"))?,
            "lo" => b.lo = v.parse().with_context(|| format!("bad value `{v}`"))?,
            "hi" => b.hi = v.parse().with_context(|| format!("bad value `{v}`"))?,
            other => anyhow::bail!("unknown bound `{other}` (expected n, lo or hi)"),
        }
    }
    anyhow::ensure!(b.lo <= b.hi, "empty value range {}..{}", b.lo, b.hi);
    Ok(b)
}

/// Writes to stdout; a closed pipe ends the process quietly.
fn emit_stdout(args: std::fmt::Arguments<'_>) {
    use std::io::Write;
    if let Err(e) = std::io::stdout().write_fmt(args) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        panic!("failed writing to stdout: {e}");
    }
}

macro_rules! out {
    ($($arg:tt)*) => { emit_stdout(format_args!($($arg)*)) };
}

macro_rules! outln {
    () => { emit_stdout(format_args!("\n")) };
    ($($arg:tt)*) => {{
        emit_stdout(format_args!($($arg)*));
        emit_stdout(format_args!("\n"));
    }};
}

const EXIT_PROVED: u8 = 0;
const EXIT_VIOLATED: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_USAGE: u8 = 3;

fn read(path: &PathBuf) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn with_suffix(file: &Path, suffix: &str) -> PathBuf {
    let mut s = file.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Compiles the input; hints are first checked at the default oracle
/// bounds and a failing hint is an error.
fn compile(input: &Input) -> anyhow::Result<pipeline::Compiled> {
    let src = read(&input.file)?;
    let hints = input.hint.as_ref().map(read).transpose()?;
    let compiled =
        pipeline::compile(&src, hints.as_deref()).map_err(|e| anyhow::anyhow!("{}: {e}", input.file.display()))?;
    if hints.is_some() {
        validate_hints(&compiled.cfg)?;
    }
    Ok(compiled)
}

fn validate_hints(cfg: &Cfg) -> anyhow::Result<()> {
    let oracle = Oracle::new(cfg, Bounds::default()).context("cannot validate hints")?;
    for f in &oracle.property_failures {
        let p = &cfg.props[f.property];
        if p.hint {
            let inst: Vec<String> = f.instance.iter().map(|(k, v)| format!("{k}={v}")).collect();
            anyhow::bail!(
                "hint `{}` at {} fails in state {} (instance {})",
                p.body,
                cfg.points[p.point].name,
                show_state(cfg, &f.state),
                inst.join(", ")
            );
        }
    }
    Ok(())
}

fn solvers(run: &RunArgs) -> anyhow::Result<Vec<SolverKind>> {
    if !run.solvers.is_empty() {
        return Ok(run.solvers.iter().map(|s| s.kind()).collect());
    }
    let found: Vec<SolverKind> = SolverKind::ALL.into_iter().filter(|k| solver::available(*k)).collect();
    anyhow::ensure!(!found.is_empty(), "{}", SolverError::NoSolver);
    Ok(found)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.cmd {
        Cmd::Emit { input, abs, cfg, output } => {
            let compiled = compile(&input)?;
            let text = if cfg {
                compiled.cfg.to_string()
            } else {
                let sys = pipeline::to_horn(&compiled.cfg, &abs.config()?, abs.raw)?;
                emit_smtlib(&sys)
            };
            match output {
                Some(p) => write(&p, &text)?,
                None => out!("{text}"),
            }
            Ok(EXIT_PROVED)
        }
        Cmd::Solve { input, abs, run, max_refinements, output } => {
            let compiled = compile(&input)?;
            let conf = abs.config()?;
            let opts = VerifyOptions {
                solvers: solvers(&run)?,
                timeout: Duration::from_secs(run.timeout.max(1)),
                max_refinements,
                unfold: UnfoldLimits::default(),
            };
            let report = match solver::verify(&compiled.cfg, &conf, &opts) {
                Ok(r) => r,
                Err(e @ (SolverError::Missing(_) | SolverError::NoSolver | SolverError::Hung)) => {
                    eprintln!("error: {e}");
                    return Ok(EXIT_UNKNOWN);
                }
                Err(e) => return Err(e.into()),
            };
            for (i, r) in report.rounds.iter().enumerate() {
                log::info!("round {i}: cells {:?} via {}: {}", r.conf.cells, r.solver, r.note);
            }
            Ok(match report.verdict {
                Verdict::Proved { solver, .. } => {
                    match report.refinements() {
                        0 => outln!("proved"),
                        1 => outln!("proved (after 1 refinement)"),
                        n => outln!("proved (after {n} refinements)"),
                    }
                    log::info!("solver: {solver}");
                    EXIT_PROVED
                }
                Verdict::Violated { trace, .. } => {
                    let path = output.unwrap_or_else(|| with_suffix(&input.file, ".witness"));
                    let text = trace.display(&compiled.cfg);
                    write(&path, &text)?;
                    outln!("violated");
                    out!("{text}");
                    outln!("witness written to {}", path.display());
                    EXIT_VIOLATED
                }
                Verdict::Exhausted { reason } | Verdict::Unknown { reason } => {
                    outln!("unknown: {reason}");
                    EXIT_UNKNOWN
                }
            })
        }
        Cmd::CheckOracle { input, abs, bounds, max_states, mutate: which, mutations } => {
            let compiled = compile(&input)?;
            let conf = abs.config()?;
            let sys = pipeline::to_horn(&compiled.cfg, &conf, abs.raw)?;
            let oracle = Oracle::new(&compiled.cfg, parse_bounds(&bounds, max_states)?)?;
            if let Some(n) = which {
                let all = mutate::mutations(&sys);
                let m = all.get(n).with_context(|| format!("only {} mutations exist", all.len()))?;
                outln!("mutation: {m}");
                let report = oracle.check(&mutate::apply(&sys, m), &conf)?;
                out!("{report}");
                return Ok(if report.violations() > 0 { EXIT_VIOLATED } else { EXIT_PROVED });
            }
            let report = oracle.check(&sys, &conf)?;
            out!("{report}");
            let mut bad = report.violations() > 0;
            if mutations {
                for m in mutate::mutations(&sys) {
                    let r = oracle.check(&mutate::apply(&sys, &m), &conf)?;
                    let detected = r.violations() > 0;
                    outln!("{m}: {}", if detected { "detected" } else { "NOT detected" });
                    bad |= !detected;
                }
            }
            Ok(if bad { EXIT_VIOLATED } else { EXIT_PROVED })
        }
        Cmd::Cex { input, abs, depth, timeout, output } => {
            let compiled = compile(&input)?;
            let cfg = &compiled.cfg;
            let sys = pipeline::to_horn(cfg, &abs.config()?, abs.raw)?;
            let z3 = solver::locate_z3().context("z3 is required (set CELLMORPH_Z3 or put it on PATH)")?;
            let timeout = Duration::from_secs(timeout.max(1));
            let mut smt = solver::SmtSession::start(&z3, timeout)?;
            let limits = UnfoldLimits { max_depth: depth, ..UnfoldLimits::default() };
            let tree = match solver::find_unfolding_deepening(&sys, &mut smt, limits)? {
                Unfolding::Found(t) => t,
                Unfolding::None => {
                    outln!("no counterexample at depth {depth}");
                    return Ok(EXIT_PROVED);
                }
                Unfolding::Incomplete => {
                    outln!("search incomplete at depth {depth}");
                    return Ok(EXIT_UNKNOWN);
                }
            };
            drop(smt);
            solver::validate_tree(&sys, &tree).map_err(|e| anyhow::anyhow!("invalid derivation tree: {e}"))?;
            outln!("derivation tree (depth {}):", tree.depth());
            out!("{}", tree.display(&sys));
            let trace = solver::extract_branch(&sys, &tree);
            let formula = solver::trace_to_concrete_formula(cfg, &trace)?;
            let path = output.unwrap_or_else(|| with_suffix(&input.file, ".trace.smt2"));
            write(&path, &formula.script())?;
            outln!("trace formula written to {}", path.display());
            let mut smt = solver::SmtSession::start(&z3, timeout)?;
            Ok(match solver::check_trace(&formula, &mut smt)? {
                TraceCheck::Feasible(w) => {
                    outln!("trace formula: sat");
                    match solver::replay_witness(cfg, &trace, &w) {
                        Ok(t) => {
                            out!("{}", t.display(cfg));
                            EXIT_VIOLATED
                        }
                        Err(e) => {
                            outln!("witness does not replay: {e}");
                            EXIT_UNKNOWN
                        }
                    }
                }
                TraceCheck::Infeasible { core, arrays } => {
                    outln!("trace formula: unsat (spurious)");
                    outln!("unsat core: {}", core.join(" "));
                    let arrays: Vec<&str> = arrays.iter().map(String::as_str).collect();
                    outln!("refine: {}", arrays.join(" "));
                    EXIT_UNKNOWN
                }
                TraceCheck::Unknown => {
                    outln!("trace formula: unknown");
                    EXIT_UNKNOWN
                }
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
