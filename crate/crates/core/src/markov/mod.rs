//! Program inputs and the metered run engine.
//!
//! Inputs to solvers are not plain numbers: they are *programs* that answer
//! coordinate queries at requested dyadic precisions. This module defines
//!
//! * the subject traits [`SolverProgram`] and [`CheckerProgram`] — the
//!   deterministic programs that can be run against such inputs, together
//!   with the [`CoordOracle`] interface they query;
//! * [`descriptor::MarkovInput`] — finite, canonically serialized input
//!   descriptors (fixed parameters, anchor schedules, and self-referential
//!   diagonal inputs that name a subject);
//! * [`engine::Engine`] — the fuel-metered interpreter that evaluates input
//!   coordinates, runs subjects, and realizes the diagonal construction.
//!
//! Subjects *cooperate* with fuel metering by propagating [`RunInterrupt`]
//! values out of every oracle call: a solver that receives `Fuel` from a
//! query must unwind, not swallow the interrupt. All built-in programs do
//! this; the wire protocol enforces it for external ones.

pub mod descriptor;
pub mod engine;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::exactnum::{QVec, Rational};
use crate::problems::{Dims, Family};
use crate::{Error, Result};

/// Problem data a subject sees up front, before any oracle queries: the
/// family (with its constants), the dimensions, and the box floor. The
/// moving parameters `u1, u2` are only reachable through the oracle.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ProblemHeader {
    /// Family and constants.
    pub family: Family,
    /// Dimensions `N1, N2`.
    pub dims: Dims,
    /// Box floor `θ` of the admissible parameter set.
    pub theta: Rational,
}

/// Why a subject run stopped before producing a value.
#[derive(Debug)]
pub enum RunInterrupt {
    /// The fuel pool could not cover a required charge; the run aborts.
    Fuel,
    /// The subject or its oracle misbehaved (malformed query, bad answer,
    /// broken protocol); the whole computation is in error, not just the
    /// current run.
    Fault(Error),
}

impl From<Error> for RunInterrupt {
    fn from(e: Error) -> Self {
        RunInterrupt::Fault(e)
    }
}

/// Result type threaded through every metered computation.
pub type RunResult<T> = std::result::Result<T, RunInterrupt>;

/// The query interface a subject sees: coordinate `coord` (1-indexed, in
/// the row-major matrix-then-rhs order) at dyadic precision `precision ≥ 1`.
/// The value returned is within `2^{-precision}` of the input's coordinate.
pub trait CoordOracle {
    /// Ask for one coordinate at one precision.
    fn query(&mut self, coord: usize, precision: u64) -> RunResult<Rational>;
}

/// Closures can serve as oracles directly; used by abstaining solvers that
/// read coordinates without fuel metering, and by tests.
impl<F> CoordOracle for F
where
    F: FnMut(usize, u64) -> RunResult<Rational>,
{
    fn query(&mut self, coord: usize, precision: u64) -> RunResult<Rational> {
        self(coord, precision)
    }
}

/// A deterministic, always-answering solver: given the problem header and
/// oracle access to the input, it must produce a candidate minimizer (or
/// cooperatively abort on a fuel interrupt). Programs must be pure: the
/// same header and the same sequence of oracle answers yield the same
/// queries and the same answer.
pub trait SolverProgram: Send + Sync {
    /// Stable identifier; also the registry key and the descriptor field.
    fn id(&self) -> &str;

    /// Declared program length in bytes. Built-ins are identified with
    /// their id string, so its byte length is the default.
    fn declared_size(&self) -> u64 {
        self.id().len() as u64
    }

    /// Run the solver against an input.
    fn solve(&self, header: &ProblemHeader, oracle: &mut dyn CoordOracle) -> RunResult<QVec>;
}

/// A deterministic hallucination checker: given the header, a solver's
/// answer, and oracle access to the same input, it emits a flag —
/// `1` for "the answer is correct", `0` for "the answer is wrong".
pub trait CheckerProgram: Send + Sync {
    /// Stable identifier; also the registry key and the descriptor field.
    fn id(&self) -> &str;

    /// Declared program length in bytes; defaults to the id byte length.
    fn declared_size(&self) -> u64 {
        self.id().len() as u64
    }

    /// Judge an answer against the input behind the oracle.
    fn check(
        &self,
        header: &ProblemHeader,
        answer: &QVec,
        oracle: &mut dyn CoordOracle,
    ) -> RunResult<u8>;
}

/// Shared handle to a solver.
pub type SolverHandle = Arc<dyn SolverProgram>;

/// Shared handle to a checker.
pub type CheckerHandle = Arc<dyn CheckerProgram>;

/// Name-to-program table used to resolve descriptor references. Diagonal
/// descriptors name their subject by id; the engine looks the program up
/// here when it needs to run it.
#[derive(Default)]
pub struct ProgramRegistry {
    solvers: BTreeMap<String, SolverHandle>,
    checkers: BTreeMap<String, CheckerHandle>,
}

impl ProgramRegistry {
    /// Empty registry.
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a solver; ids must be unique and nonempty.
    pub fn register_solver(&mut self, solver: SolverHandle) -> Result<()> {
        let id = solver.id().to_string();
        if id.is_empty() {
            return Err(Error::Config("solver id must be nonempty".into()));
        }
        if self.solvers.insert(id.clone(), solver).is_some() {
            return Err(Error::Config(format!("duplicate solver id {id:?}")));
        }
        Ok(())
    }

    /// Register a checker; ids must be unique and nonempty.
    pub fn register_checker(&mut self, checker: CheckerHandle) -> Result<()> {
        let id = checker.id().to_string();
        if id.is_empty() {
            return Err(Error::Config("checker id must be nonempty".into()));
        }
        if self.checkers.insert(id.clone(), checker).is_some() {
            return Err(Error::Config(format!("duplicate checker id {id:?}")));
        }
        Ok(())
    }

    /// Register a checker, replacing any previous program with the same
    /// id. For harnesses that rebuild a derived subject (for example a
    /// freshly derandomized checker) over a configured placeholder; plain
    /// [`register_checker`](Self::register_checker) keeps ids unique.
    pub fn replace_checker(&mut self, checker: CheckerHandle) -> Result<()> {
        let id = checker.id().to_string();
        if id.is_empty() {
            return Err(Error::Config("checker id must be nonempty".into()));
        }
        self.checkers.insert(id, checker);
        Ok(())
    }

    /// Resolve a solver id.
    pub fn solver(&self, id: &str) -> Result<SolverHandle> {
        self.solvers
            .get(id)
            .cloned()
            .ok_or_else(|| Error::Config(format!("unknown solver id {id:?}")))
    }

    /// Resolve a checker id.
    pub fn checker(&self, id: &str) -> Result<CheckerHandle> {
        self.checkers
            .get(id)
            .cloned()
            .ok_or_else(|| Error::Config(format!("unknown checker id {id:?}")))
    }

    /// All registered solver ids, sorted.
    pub fn solver_ids(&self) -> Vec<&str> {
        self.solvers.keys().map(|s| s.as_str()).collect()
    }

    /// All registered checker ids, sorted.
    pub fn checker_ids(&self) -> Vec<&str> {
        self.checkers.keys().map(|s| s.as_str()).collect()
    }
}
