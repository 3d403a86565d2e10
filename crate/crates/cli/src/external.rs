//! External subjects: solver and checker programs that live in a separate
//! process and speak the wire protocol over standard streams.
//!
//! One in-process run corresponds to one subprocess: the adapter spawns
//! the command, performs the handshake, relays oracle traffic, and kills
//! the child when the run ends for any reason. Fuel is metered entirely
//! on the harness side — aborting a run drops the adapter, which closes
//! the pipes and reaps the child — so an external subject participates in
//! diagonal runs with exactly the semantics of a built-in.
//!
//! A configurable wall-clock guard protects the harness against subjects
//! that hang. It is diagnostics-only: expiry kills the child's whole
//! process group — a helper the subject spawned must not keep the pipes
//! open past the guard — and surfaces a protocol error naming the
//! timeout. No timing ever feeds into fuel accounting or verdicts.

use std::io::BufReader;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use gauntlet_core::exactnum::QVec;
use gauntlet_core::markov::{
    CheckerProgram, CoordOracle, ProblemHeader, RunInterrupt, RunResult, SolverProgram,
};
use gauntlet_core::randomized::{BitString, RandomizedChecker, RandomizedSolver};
use gauntlet_core::{Error, Result};

use crate::protocol::{problem_record, read_record, wire_to_vec, write_record, WireRecord};

/// How to start an external subject.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ExternalCommand {
    /// Program to execute.
    pub command: String,
    /// Arguments, in order.
    pub args: Vec<String>,
    /// Optional wall-clock guard per run, in milliseconds.
    pub timeout_ms: Option<u64>,
}

impl ExternalCommand {
    /// A command with no arguments and no wall-clock guard.
    pub fn new(command: impl Into<String>) -> Self {
        ExternalCommand {
            command: command.into(),
            args: Vec::new(),
            timeout_ms: None,
        }
    }

    /// Adds arguments.
    pub fn args(mut self, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.args.extend(args.into_iter().map(Into::into));
        self
    }

    /// Sets the wall-clock guard.
    pub fn timeout_ms(mut self, ms: u64) -> Self {
        self.timeout_ms = Some(ms);
        self
    }
}

/// Makes the child the leader of a fresh process group, so the guard can
/// kill it together with anything it spawned.
#[cfg(unix)]
fn isolate_group(command: &mut Command) {
    use std::os::unix::process::CommandExt;
    command.process_group(0);
}

#[cfg(not(unix))]
fn isolate_group(_command: &mut Command) {}

/// Kills the subject and everything it spawned. Without the group kill, a
/// grandchild holding the stdout pipe would keep [`ChildIo::recv`] blocked
/// long after the subject itself is dead.
fn kill_hard(child: &mut Child) {
    #[cfg(unix)]
    // The child was spawned as its own group leader, so its pid names the
    // group; callers guard against reaped (possibly recycled) pids.
    unsafe {
        libc::kill(-(child.id() as i32), libc::SIGKILL);
    }
    let _ = child.kill();
}

/// A live child process for one run: pipes plus the optional watchdog.
struct ChildIo {
    child: Arc<Mutex<Child>>,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    done: Arc<AtomicBool>,
    timed_out: Arc<AtomicBool>,
    watchdog: Option<JoinHandle<()>>,
}

impl ChildIo {
    fn spawn(cmd: &ExternalCommand) -> Result<Self> {
        let mut command = Command::new(&cmd.command);
        command
            .args(&cmd.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit());
        isolate_group(&mut command);
        let mut child = command
            .spawn()
            .map_err(|e| Error::Config(format!("cannot start subject {:?}: {e}", cmd.command)))?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = BufReader::new(child.stdout.take().expect("stdout was piped"));
        let child = Arc::new(Mutex::new(child));
        let done = Arc::new(AtomicBool::new(false));
        let timed_out = Arc::new(AtomicBool::new(false));
        let watchdog = cmd.timeout_ms.map(|ms| {
            let child = Arc::clone(&child);
            let done = Arc::clone(&done);
            let timed_out = Arc::clone(&timed_out);
            std::thread::spawn(move || {
                let deadline = Instant::now() + Duration::from_millis(ms);
                while !done.load(Ordering::SeqCst) {
                    if Instant::now() >= deadline {
                        let mut child = child.lock().expect("watchdog lock");
                        // Re-check under the lock: if the run finished and
                        // reaped the pid, killing its group could hit a
                        // recycled pid.
                        if !done.load(Ordering::SeqCst) {
                            timed_out.store(true, Ordering::SeqCst);
                            kill_hard(&mut child);
                        }
                        return;
                    }
                    std::thread::sleep(Duration::from_millis(2));
                }
            })
        });
        Ok(ChildIo {
            child,
            stdin: Some(stdin),
            stdout,
            done,
            timed_out,
            watchdog,
        })
    }

    /// Folds the watchdog state into a stream-level failure.
    fn stream_error(&self, context: &str) -> Error {
        if self.timed_out.load(Ordering::SeqCst) {
            Error::Protocol(format!(
                "subject exceeded the wall-clock guard and was killed ({context})"
            ))
        } else {
            Error::Protocol(context.to_string())
        }
    }

    fn send(&mut self, record: &WireRecord) -> Result<()> {
        let stdin = self.stdin.as_mut().expect("stdin open until drop");
        write_record(stdin, record).map_err(|e| self.stream_error(&e.to_string()))
    }

    /// Reads the subject's next record; end-of-stream is an error because
    /// every caller is mid-run when it reads.
    fn recv(&mut self) -> Result<WireRecord> {
        match read_record(&mut self.stdout) {
            Ok(Some(record)) => Ok(record),
            Ok(None) => Err(self.stream_error("subject closed its stream mid-run")),
            Err(e) => Err(self.stream_error(&e.to_string())),
        }
    }
}

impl Drop for ChildIo {
    fn drop(&mut self) {
        // Closing stdin lets a well-behaved child exit; the group kill
        // covers the rest. Either way the child is reaped before the run
        // returns. `done` flips under the lock so the watchdog never kills
        // a pid this branch already reaped.
        drop(self.stdin.take());
        {
            let mut child = self.child.lock().expect("drop lock");
            self.done.store(true, Ordering::SeqCst);
            kill_hard(&mut child);
            let _ = child.wait();
        }
        if let Some(handle) = self.watchdog.take() {
            let _ = handle.join();
        }
    }
}

/// Relays one oracle query across the pipe.
fn relay_query(
    io: &mut ChildIo,
    coord: u64,
    precision: u64,
    oracle: &mut dyn CoordOracle,
) -> RunResult<()> {
    let coord = usize::try_from(coord)
        .map_err(|_| RunInterrupt::Fault(Error::Protocol(format!("coordinate {coord} overflows"))))?;
    let value = oracle.query(coord, precision)?;
    io.send(&WireRecord::Value {
        q: value.to_string(),
    })?;
    Ok(())
}

/// An external always-answering solver.
pub struct ExternalSolver {
    id: String,
    size: Option<u64>,
    cmd: ExternalCommand,
}

impl ExternalSolver {
    /// A solver named `id` run as `cmd`; `size` overrides the declared
    /// byte length (defaulting to the id length, as for built-ins).
    pub fn new(id: impl Into<String>, cmd: ExternalCommand, size: Option<u64>) -> Self {
        ExternalSolver {
            id: id.into(),
            size,
            cmd,
        }
    }
}

impl SolverProgram for ExternalSolver {
    fn id(&self) -> &str {
        &self.id
    }

    fn declared_size(&self) -> u64 {
        self.size.unwrap_or(self.id.len() as u64)
    }

    fn solve(&self, header: &ProblemHeader, oracle: &mut dyn CoordOracle) -> RunResult<QVec> {
        let mut io = ChildIo::spawn(&self.cmd).map_err(RunInterrupt::Fault)?;
        io.send(&problem_record(header, None))?;
        loop {
            match io.recv()? {
                WireRecord::Query { coord, precision } => {
                    relay_query(&mut io, coord, precision, oracle)?
                }
                WireRecord::Answer { vector } => {
                    return Ok(wire_to_vec(&vector, header.dims.n1 as usize)?)
                }
                other => {
                    return Err(RunInterrupt::Fault(Error::Protocol(format!(
                        "solver {:?} sent unexpected record {other:?}",
                        self.id
                    ))))
                }
            }
        }
    }
}

/// An external hallucination checker.
pub struct ExternalChecker {
    id: String,
    size: Option<u64>,
    cmd: ExternalCommand,
}

impl ExternalChecker {
    /// A checker named `id` run as `cmd`; see [`ExternalSolver::new`].
    pub fn new(id: impl Into<String>, cmd: ExternalCommand, size: Option<u64>) -> Self {
        ExternalChecker {
            id: id.into(),
            size,
            cmd,
        }
    }
}

impl CheckerProgram for ExternalChecker {
    fn id(&self) -> &str {
        &self.id
    }

    fn declared_size(&self) -> u64 {
        self.size.unwrap_or(self.id.len() as u64)
    }

    fn check(
        &self,
        header: &ProblemHeader,
        answer: &QVec,
        oracle: &mut dyn CoordOracle,
    ) -> RunResult<u8> {
        let mut io = ChildIo::spawn(&self.cmd).map_err(RunInterrupt::Fault)?;
        io.send(&problem_record(header, Some(answer)))?;
        loop {
            match io.recv()? {
                WireRecord::Query { coord, precision } => {
                    relay_query(&mut io, coord, precision, oracle)?
                }
                WireRecord::Flag { value } => return Ok(value),
                other => {
                    return Err(RunInterrupt::Fault(Error::Protocol(format!(
                        "checker {:?} sent unexpected record {other:?}",
                        self.id
                    ))))
                }
            }
        }
    }
}

/// Serves `need_bits` requests out of a fixed flip prefix. `Ok(None)`
/// means the prefix is exhausted: the machine has not halted on these
/// flips, and the caller ends the run.
fn serve_bits(
    io: &mut ChildIo,
    coins: &BitString,
    used: &mut usize,
    count: u64,
) -> Result<Option<()>> {
    if count == 0 {
        return Err(Error::Protocol("need_bits count must be positive".into()));
    }
    let count = usize::try_from(count)
        .map_err(|_| Error::Protocol(format!("need_bits count {count} overflows")))?;
    let Some(end) = used.checked_add(count).filter(|end| *end <= coins.len()) else {
        return Ok(None);
    };
    let s: String = (*used..end)
        .map(|i| {
            if coins.bit(i).expect("range checked") {
                '1'
            } else {
                '0'
            }
        })
        .collect();
    *used = end;
    io.send(&WireRecord::Bits { s })?;
    Ok(Some(()))
}

/// An external randomized solver: each call with a flip prefix is one
/// subprocess run, with flips delivered on demand.
pub struct ExternalRandomizedSolver {
    id: String,
    cmd: ExternalCommand,
}

impl ExternalRandomizedSolver {
    /// A randomized solver named `id` run as `cmd`.
    pub fn new(id: impl Into<String>, cmd: ExternalCommand) -> Self {
        ExternalRandomizedSolver {
            id: id.into(),
            cmd,
        }
    }
}

impl RandomizedSolver for ExternalRandomizedSolver {
    fn id(&self) -> &str {
        &self.id
    }

    fn solve_with_coins(
        &self,
        header: &ProblemHeader,
        coins: &BitString,
        oracle: &mut dyn CoordOracle,
    ) -> RunResult<Option<QVec>> {
        let mut io = ChildIo::spawn(&self.cmd).map_err(RunInterrupt::Fault)?;
        io.send(&problem_record(header, None))?;
        let mut used = 0usize;
        loop {
            match io.recv()? {
                WireRecord::Query { coord, precision } => {
                    relay_query(&mut io, coord, precision, oracle)?
                }
                WireRecord::NeedBits { count } => {
                    if serve_bits(&mut io, coins, &mut used, count)?.is_none() {
                        return Ok(None);
                    }
                }
                WireRecord::Answer { vector } => {
                    return Ok(Some(wire_to_vec(&vector, header.dims.n1 as usize)?))
                }
                other => {
                    return Err(RunInterrupt::Fault(Error::Protocol(format!(
                        "randomized solver {:?} sent unexpected record {other:?}",
                        self.id
                    ))))
                }
            }
        }
    }
}

/// An external randomized checker; see [`ExternalRandomizedSolver`].
pub struct ExternalRandomizedChecker {
    id: String,
    cmd: ExternalCommand,
}

impl ExternalRandomizedChecker {
    /// A randomized checker named `id` run as `cmd`.
    pub fn new(id: impl Into<String>, cmd: ExternalCommand) -> Self {
        ExternalRandomizedChecker {
            id: id.into(),
            cmd,
        }
    }
}

impl RandomizedChecker for ExternalRandomizedChecker {
    fn id(&self) -> &str {
        &self.id
    }

    fn check_with_coins(
        &self,
        header: &ProblemHeader,
        answer: &QVec,
        coins: &BitString,
        oracle: &mut dyn CoordOracle,
    ) -> RunResult<Option<u8>> {
        let mut io = ChildIo::spawn(&self.cmd).map_err(RunInterrupt::Fault)?;
        io.send(&problem_record(header, Some(answer)))?;
        let mut used = 0usize;
        loop {
            match io.recv()? {
                WireRecord::Query { coord, precision } => {
                    relay_query(&mut io, coord, precision, oracle)?
                }
                WireRecord::NeedBits { count } => {
                    if serve_bits(&mut io, coins, &mut used, count)?.is_none() {
                        return Ok(None);
                    }
                }
                WireRecord::Flag { value } => return Ok(Some(value)),
                other => {
                    return Err(RunInterrupt::Fault(Error::Protocol(format!(
                        "randomized checker {:?} sent unexpected record {other:?}",
                        self.id
                    ))))
                }
            }
        }
    }
}
