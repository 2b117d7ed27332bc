//! An interactive SMT-LIB session with a z3 subprocess.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use super::sexp::{self, Sexp};
use super::SolverError;

/// Answer to `check-sat`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatResult {
    Sat,
    Unsat,
    Unknown,
}

pub struct SmtSession {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    pending: String,
    /// Per-command wait before the session is considered hung.
    timeout: Duration,
}

impl SmtSession {
    /// Starts `z3 -in`; `timeout` bounds every `check-sat`.
    pub fn start(z3: &Path, timeout: Duration) -> Result<SmtSession, SolverError> {
        let mut child = Command::new(z3)
            .args(["-in", "-smt2"])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SolverError::Spawn(z3.display().to_string(), e))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut s = SmtSession { child, stdin, lines: rx, pending: String::new(), timeout };
        s.send(&format!("(set-option :timeout {})", timeout.as_millis().min(u32::MAX as u128)))?;
        Ok(s)
    }

    /// Sends commands that print nothing on success.
    pub fn send(&mut self, cmd: &str) -> Result<(), SolverError> {
        log::trace!("smt> {cmd}");
        writeln!(self.stdin, "{cmd}").map_err(SolverError::Io)?;
        self.stdin.flush().map_err(SolverError::Io)
    }

    fn read(&mut self) -> Result<Sexp, SolverError> {
        let wait = self.timeout + Duration::from_secs(5);
        loop {
            if let Some(n) = sexp::complete_prefix(&self.pending) {
                let text: String = self.pending.drain(..n).collect();
                let s = sexp::parse(&text).map_err(|e| SolverError::Protocol(e.to_string()))?;
                if let Sexp::List(items) = &s {
                    if matches!(items.first(), Some(Sexp::Atom(a)) if a == "error") {
                        return Err(SolverError::Protocol(s.to_string()));
                    }
                }
                return Ok(s);
            }
            match self.lines.recv_timeout(wait) {
                Ok(line) => {
                    self.pending.push_str(&line);
                    self.pending.push('\n');
                }
                Err(RecvTimeoutError::Timeout) => return Err(SolverError::Hung),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(SolverError::Protocol("solver exited".into()))
                }
            }
        }
    }

    pub fn check_sat(&mut self) -> Result<SatResult, SolverError> {
        self.send("(check-sat)")?;
        match self.read()? {
            Sexp::Atom(a) if a == "sat" => Ok(SatResult::Sat),
            Sexp::Atom(a) if a == "unsat" => Ok(SatResult::Unsat),
            Sexp::Atom(a) if a == "unknown" => Ok(SatResult::Unknown),
            other => Err(SolverError::Protocol(format!("unexpected answer `{other}`"))),
        }
    }

    /// Values of `terms` in the current model.
    pub fn get_value(&mut self, terms: &[String]) -> Result<Vec<Sexp>, SolverError> {
        if terms.is_empty() {
            return Ok(Vec::new());
        }
        self.send(&format!("(get-value ({}))", terms.join(" ")))?;
        match self.read()? {
            Sexp::List(pairs) if pairs.len() == terms.len() => pairs
                .into_iter()
                .map(|p| match p {
                    Sexp::List(mut kv) if kv.len() == 2 => Ok(kv.remove(1)),
                    other => Err(SolverError::Protocol(format!("bad get-value entry `{other}`"))),
                })
                .collect(),
            other => Err(SolverError::Protocol(format!("bad get-value answer `{other}`"))),
        }
    }

    /// Names in the unsat core of the last `check-sat`.
    pub fn unsat_core(&mut self) -> Result<Vec<String>, SolverError> {
        self.send("(get-unsat-core)")?;
        match self.read()? {
            Sexp::List(items) => Ok(items
                .into_iter()
                .map(|s| s.to_string().trim_matches('|').to_string())
                .collect()),
            other => Err(SolverError::Protocol(format!("bad unsat core `{other}`"))),
        }
    }
}

impl Drop for SmtSession {
    fn drop(&mut self) {
        let _ = writeln!(self.stdin, "(exit)");
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
