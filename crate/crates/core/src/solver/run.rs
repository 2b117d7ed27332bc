//! Running external CHC solvers as subprocesses.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

use super::SolverError;

/// Supported solver back ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    /// z3 with the Spacer engine.
    Spacer,
    /// z3 with the PDR engine.
    Z3Pdr,
    /// Eldarica.
    Eldarica,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Spacer, SolverKind::Z3Pdr, SolverKind::Eldarica];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Spacer => "spacer",
            SolverKind::Z3Pdr => "z3pdr",
            SolverKind::Eldarica => "eldarica",
        }
    }

    pub fn parse(s: &str) -> Option<SolverKind> {
        SolverKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What a solver said about a Horn system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverVerdict {
    /// Satisfiable: the properties hold. `model` holds the predicate
    /// definitions when the solver printed them.
    Sat { model: String },
    /// Unsatisfiable: some query is violated in the abstraction.
    Unsat,
    Unknown,
    Timeout,
    Crash { diagnostic: String },
}

impl SolverVerdict {
    pub fn is_definitive(&self) -> bool {
        matches!(self, SolverVerdict::Sat { .. } | SolverVerdict::Unsat)
    }

    pub fn label(&self) -> &'static str {
        match self {
            SolverVerdict::Sat { .. } => "sat",
            SolverVerdict::Unsat => "unsat",
            SolverVerdict::Unknown => "unknown",
            SolverVerdict::Timeout => "timeout",
            SolverVerdict::Crash { .. } => "crash",
        }
    }
}

/// One solver run with its raw output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverOutcome {
    pub kind: SolverKind,
    pub verdict: SolverVerdict,
    pub stdout: String,
    pub stderr: String,
    pub elapsed: Duration,
}

fn search_path(names: &[&str]) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    for dir in std::env::split_paths(&path) {
        for n in names {
            let p = dir.join(n);
            if p.is_file() {
                return Some(p);
            }
        }
    }
    None
}

/// The binary for `kind`: `CELLMORPH_Z3` / `CELLMORPH_ELDARICA`, else `PATH`.
pub fn locate(kind: SolverKind) -> Option<PathBuf> {
    let (var, names): (&str, &[&str]) = match kind {
        SolverKind::Spacer | SolverKind::Z3Pdr => ("CELLMORPH_Z3", &["z3"]),
        SolverKind::Eldarica => ("CELLMORPH_ELDARICA", &["eld", "eldarica"]),
    };
    match std::env::var_os(var) {
        Some(p) if !p.is_empty() => {
            let p = PathBuf::from(p);
            if p.is_file() {
                Some(p)
            } else {
                search_path(&[p.to_str()?])
            }
        }
        _ => search_path(names),
    }
}

/// The z3 binary, used for trace formulas and unfolding search.
pub fn locate_z3() -> Option<PathBuf> {
    locate(SolverKind::Spacer)
}

const PROBE: &str = "(set-logic HORN)\n(declare-fun p (Int) Bool)\n\
(assert (forall ((x Int)) (=> (= x 0) (p x))))\n\
(assert (forall ((x Int)) (=> (and (p x) (< x 0)) false)))\n(check-sat)\n";

/// Whether `kind` is installed and answers a trivial satisfiable system.
pub fn available(kind: SolverKind) -> bool {
    static CACHE: OnceLock<Mutex<Vec<(SolverKind, bool)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    if let Some((_, ok)) = cache.lock().expect("cache lock").iter().find(|(k, _)| *k == kind) {
        return *ok;
    }
    let ok = matches!(
        run_text(PROBE, kind, Duration::from_secs(20), None).map(|o| o.verdict),
        Ok(SolverVerdict::Sat { .. })
    );
    if !ok {
        log::info!("solver {kind} is not available");
    }
    cache.lock().expect("cache lock").push((kind, ok));
    ok
}

fn temp_file(text: &str) -> Result<PathBuf, SolverError> {
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let n = COUNTER.fetch_add(1, Ordering::SeqCst);
    let p = std::env::temp_dir().join(format!("cellmorph-{}-{n}.smt2", std::process::id()));
    std::fs::write(&p, text).map_err(SolverError::Io)?;
    Ok(p)
}

fn parse_answer(stdout: &str, stderr: &str, kind: SolverKind) -> SolverVerdict {
    let mut lines = stdout.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("sat") => {
            let rest: Vec<&str> = stdout.lines().skip_while(|l| l.trim() != "sat").skip(1).collect();
            let model = rest.join("\n");
            let model = if model.contains("(error") { String::new() } else { model.trim().to_string() };
            SolverVerdict::Sat { model }
        }
        Some("unsat") => SolverVerdict::Unsat,
        Some("unknown") => SolverVerdict::Unknown,
        // Eldarica prints `timeout` itself when its own limit expires.
        Some("timeout") if kind == SolverKind::Eldarica => SolverVerdict::Timeout,
        first => SolverVerdict::Crash {
            diagnostic: format!(
                "unexpected output {:?}; stderr: {}",
                first.unwrap_or(""),
                stderr.lines().take(5).collect::<Vec<_>>().join(" | ")
            ),
        },
    }
}

/// Runs a solver on SMT-LIB text. `cancel` aborts the run early.
pub fn run_text(
    text: &str,
    kind: SolverKind,
    timeout: Duration,
    cancel: Option<&AtomicBool>,
) -> Result<SolverOutcome, SolverError> {
    let bin = locate(kind).ok_or(SolverError::Missing(kind))?;
    let secs = timeout.as_secs().max(1);
    let mut temp = None;
    let (mut cmd, input) = match kind {
        SolverKind::Spacer | SolverKind::Z3Pdr => {
            let engine = if kind == SolverKind::Spacer { "spacer" } else { "pdr" };
            let mut c = Command::new(&bin);
            c.args(["-in", "-smt2", &format!("fp.engine={engine}")]);
            (c, Some(format!("{text}\n(get-model)\n")))
        }
        SolverKind::Eldarica => {
            let p = temp_file(text)?;
            let mut c = Command::new(&bin);
            c.arg("-splitClauses").arg("-ssol").arg(format!("-t:{secs}")).arg(&p);
            temp = Some(p);
            (c, None)
        }
    };
    let start = Instant::now();
    let mut child = cmd
        .stdin(if input.is_some() { Stdio::piped() } else { Stdio::null() })
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SolverError::Spawn(bin.display().to_string(), e))?;
    if let Some(input) = input {
        let mut stdin = child.stdin.take().expect("piped stdin");
        std::thread::spawn(move || {
            let _ = stdin.write_all(input.as_bytes());
        });
    }
    let mut out = child.stdout.take().expect("piped stdout");
    let mut err = child.stderr.take().expect("piped stderr");
    let out_t = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = out.read_to_string(&mut s);
        s
    });
    let err_t = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = err.read_to_string(&mut s);
        s
    });
    let slice = Duration::from_millis(50);
    let mut killed = false;
    let status = loop {
        if let Some(st) = child.wait_timeout(slice).map_err(SolverError::Io)? {
            break Some(st);
        }
        let cancelled = cancel.is_some_and(|c| c.load(Ordering::SeqCst));
        if cancelled || start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            killed = true;
            break None;
        }
    };
    let stdout = out_t.join().unwrap_or_default();
    let stderr = err_t.join().unwrap_or_default();
    if let Some(p) = temp {
        let _ = std::fs::remove_file(p);
    }
    let elapsed = start.elapsed();
    let verdict = if killed {
        SolverVerdict::Timeout
    } else {
        let v = parse_answer(&stdout, &stderr, kind);
        if let (SolverVerdict::Crash { .. }, Some(st)) = (&v, status) {
            log::warn!("{kind} exited with {st}");
        }
        v
    };
    log::info!("{kind}: {} after {:.2?}", verdict.label(), elapsed);
    Ok(SolverOutcome { kind, verdict, stdout, stderr, elapsed })
}

/// Runs a solver on a file.
pub fn run_solver(file: &Path, kind: SolverKind, timeout: Duration) -> Result<SolverOutcome, SolverError> {
    let text = std::fs::read_to_string(file).map_err(SolverError::Io)?;
    run_text(&text, kind, timeout, None)
}

/// Runs several solvers at once; the first definitive answer wins and the
/// other runs are killed. Without a definitive answer the most informative
/// outcome is returned (unknown, then timeout, then crash).
pub fn portfolio(text: &str, kinds: &[SolverKind], timeout: Duration) -> Result<SolverOutcome, SolverError> {
    if kinds.is_empty() {
        return Err(SolverError::NoSolver);
    }
    let cancel = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel();
    let text: Arc<str> = Arc::from(text);
    let handles: Vec<_> = kinds
        .iter()
        .map(|k| {
            let (tx, cancel, text, k) = (tx.clone(), cancel.clone(), text.clone(), *k);
            std::thread::spawn(move || {
                let _ = tx.send(run_text(&text, k, timeout, Some(&cancel)));
            })
        })
        .collect();
    drop(tx);
    let mut best: Option<SolverOutcome> = None;
    let mut first_err = None;
    for r in rx {
        match r {
            Ok(o) if o.verdict.is_definitive() => {
                cancel.store(true, Ordering::SeqCst);
                best = Some(o);
                break;
            }
            Ok(o) => {
                let rank = |v: &SolverVerdict| match v {
                    SolverVerdict::Unknown => 0,
                    SolverVerdict::Timeout => 1,
                    _ => 2,
                };
                if best.as_ref().is_none_or(|b| rank(&o.verdict) < rank(&b.verdict)) {
                    best = Some(o);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    for h in handles {
        let _ = h.join();
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(SolverError::NoSolver),
    }
}
