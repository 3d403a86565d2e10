//! Built-in solver and checker subjects.
//!
//! These are small deterministic programs used as attack targets in the
//! test-suite and CLI. Each realizes a distinct querying strategy:
//!
//! * [`Blind`] — answers the first anchor without looking at the input;
//! * [`AlwaysY2`] — answers the second anchor without looking;
//! * [`OneQuery`] — one coarse query on the first coordinate;
//! * [`SnapAt`] — symmetric snapshots of both distinguished coordinates at
//!   a fixed precision;
//! * [`AlwaysFlag`] — a checker that raises a constant flag;
//! * [`ReSolve`] — a checker that re-solves the instance with the
//!   gap-detection loop and compares against the answer it is auditing;
//! * [`ProbeRespecting`] / [`ProbeIsY1`] — oracle-backed checkers used to
//!   exercise the de-oracolisation strip.

use std::sync::Arc;

use crate::exactnum::{dist_point, dist_segment, QVec, Rational};
use crate::markov::{
    CheckerProgram, CoordOracle, ProblemHeader, ProgramRegistry, RunResult, SolverHandle,
    SolverProgram,
};
use crate::problems::anchor_sets;
use crate::trustworthy::{gamma_star, GammaOutcome, OracleChecker};
use crate::Result;

/// Answers the first anchor `y¹` unconditionally, issuing no queries.
#[derive(Clone, Copy, Debug)]
pub struct Blind;

impl SolverProgram for Blind {
    fn id(&self) -> &str {
        "blind"
    }

    fn solve(&self, header: &ProblemHeader, _oracle: &mut dyn CoordOracle) -> RunResult<QVec> {
        let anchors = anchor_sets(&header.family, &header.dims)?;
        Ok(anchors.y1)
    }
}

/// Answers the second anchor `y²` unconditionally, issuing no queries.
#[derive(Clone, Copy, Debug)]
pub struct AlwaysY2;

impl SolverProgram for AlwaysY2 {
    fn id(&self) -> &str {
        "alwaysy2"
    }

    fn solve(&self, header: &ProblemHeader, _oracle: &mut dyn CoordOracle) -> RunResult<QVec> {
        let anchors = anchor_sets(&header.family, &header.dims)?;
        Ok(anchors.y2)
    }
}

/// Queries the first coordinate once at precision 1 and answers `y¹` iff
/// the approximation is at least `1/2`.
#[derive(Clone, Copy, Debug)]
pub struct OneQuery;

impl SolverProgram for OneQuery {
    fn id(&self) -> &str {
        "onequery"
    }

    fn solve(&self, header: &ProblemHeader, oracle: &mut dyn CoordOracle) -> RunResult<QVec> {
        let v = oracle.query(1, 1)?;
        let anchors = anchor_sets(&header.family, &header.dims)?;
        let half = Rational::new(1, 2).expect("constant");
        Ok(if v >= half { anchors.y1 } else { anchors.y2 })
    }
}

/// Queries both distinguished coordinates at a fixed precision and answers
/// `y¹` iff the first snapshot is at least the second.
#[derive(Clone, Debug)]
pub struct SnapAt {
    precision: u64,
    id: String,
}

impl SnapAt {
    /// A snapshot solver at the given query precision; its id is
    /// `snap<precision>`.
    pub fn new(precision: u64) -> Self {
        SnapAt {
            precision,
            id: format!("snap{precision}"),
        }
    }
}

impl SolverProgram for SnapAt {
    fn id(&self) -> &str {
        &self.id
    }

    fn solve(&self, header: &ProblemHeader, oracle: &mut dyn CoordOracle) -> RunResult<QVec> {
        let q1 = oracle.query(1, self.precision)?;
        let q2 = oracle.query(2, self.precision)?;
        let anchors = anchor_sets(&header.family, &header.dims)?;
        Ok(if q1 >= q2 { anchors.y1 } else { anchors.y2 })
    }
}

/// A checker that raises the same flag on every answer, issuing no
/// queries. `AlwaysFlag::new(1)` approves everything; `AlwaysFlag::new(0)`
/// rejects everything.
#[derive(Clone, Debug)]
pub struct AlwaysFlag {
    flag: u8,
    id: String,
}

impl AlwaysFlag {
    /// A constant checker with the given flag (`0` or `1`).
    pub fn new(flag: u8) -> Result<Self> {
        if flag > 1 {
            return Err(crate::Error::Domain(format!(
                "checker flag must be 0 or 1, got {flag}"
            )));
        }
        Ok(AlwaysFlag {
            flag,
            id: format!("always{flag}"),
        })
    }
}

impl CheckerProgram for AlwaysFlag {
    fn id(&self) -> &str {
        &self.id
    }

    fn check(
        &self,
        _header: &ProblemHeader,
        _answer: &QVec,
        _oracle: &mut dyn CoordOracle,
    ) -> RunResult<u8> {
        Ok(self.flag)
    }
}

/// A checker that audits an answer by re-solving the instance: it re-runs
/// the solver it guards through the same metered oracle, then runs the
/// gap-detection loop up to `budget`. If the loop resolves the instance it
/// compares the re-solved answer against the detected solution point;
/// otherwise it falls back to the distance from the degenerate solution
/// segment.
#[derive(Clone)]
pub struct ReSolve {
    solver: SolverHandle,
    budget: u64,
}

impl ReSolve {
    /// A re-solving checker guarding `solver` with the given gap-detection
    /// budget.
    pub fn new(solver: SolverHandle, budget: u64) -> Self {
        ReSolve { solver, budget }
    }
}

impl CheckerProgram for ReSolve {
    fn id(&self) -> &str {
        "resolve"
    }

    fn check(
        &self,
        header: &ProblemHeader,
        _answer: &QVec,
        oracle: &mut dyn CoordOracle,
    ) -> RunResult<u8> {
        let a = self.solver.solve(header, oracle)?;
        let anchors = anchor_sets(&header.family, &header.dims)?;
        let kappa = &header.family.kappa;
        let ok = match gamma_star(oracle, header, self.budget)? {
            GammaOutcome::Answer(y) => dist_point(&a, &y, header.family.p)?.le(kappa),
            GammaOutcome::NotYet => {
                dist_segment(&a, &anchors.y1, &anchors.y2, header.family.p)?
                    .cmp
                    .le(kappa)
            }
        };
        Ok(u8::from(ok))
    }
}

/// An oracle-backed checker that approves an answer iff it is within `κ`
/// of whatever the gap-detection loop resolves — and, when the loop does
/// not resolve within budget, defers to the probe it was handed.
#[derive(Clone, Copy, Debug)]
pub struct ProbeRespecting {
    budget: u64,
}

impl ProbeRespecting {
    /// A probe-respecting checker with the given gap-detection budget.
    pub fn new(budget: u64) -> Self {
        ProbeRespecting { budget }
    }
}

impl Default for ProbeRespecting {
    fn default() -> Self {
        // 22 resolves every anchor schedule with t <= 10.
        ProbeRespecting::new(22)
    }
}

impl OracleChecker for ProbeRespecting {
    fn id(&self) -> &str {
        "consist"
    }

    fn check_with_probe(
        &self,
        header: &ProblemHeader,
        answer: &QVec,
        probe: &QVec,
        oracle: &mut dyn CoordOracle,
    ) -> RunResult<u8> {
        let kappa = &header.family.kappa;
        let ok = match gamma_star(oracle, header, self.budget)? {
            GammaOutcome::Answer(y_true) => dist_point(answer, &y_true, header.family.p)?.le(kappa),
            GammaOutcome::NotYet => dist_point(answer, probe, header.family.p)?.le(kappa),
        };
        Ok(u8::from(ok))
    }
}

/// A toy oracle-backed checker whose flag is `1` iff the probe it was
/// handed equals the first anchor. Useful for observing which probe the
/// de-oracolisation strip selects.
#[derive(Clone, Copy, Debug)]
pub struct ProbeIsY1;

impl OracleChecker for ProbeIsY1 {
    fn id(&self) -> &str {
        "probey1"
    }

    fn check_with_probe(
        &self,
        header: &ProblemHeader,
        _answer: &QVec,
        probe: &QVec,
        _oracle: &mut dyn CoordOracle,
    ) -> RunResult<u8> {
        let anchors = anchor_sets(&header.family, &header.dims)?;
        Ok(u8::from(*probe == anchors.y1))
    }
}

/// Registry pre-loaded with the built-in subjects: the five solvers and
/// the two constant checkers. Re-solving checkers bind the solver they
/// guard, so they are added per pair via [`add_resolve`].
pub fn builtin_registry() -> Result<ProgramRegistry> {
    let mut reg = ProgramRegistry::new();
    reg.register_solver(Arc::new(Blind))?;
    reg.register_solver(Arc::new(AlwaysY2))?;
    reg.register_solver(Arc::new(OneQuery))?;
    reg.register_solver(Arc::new(SnapAt::new(4)))?;
    reg.register_solver(Arc::new(SnapAt::new(8)))?;
    reg.register_checker(Arc::new(AlwaysFlag::new(0)?))?;
    reg.register_checker(Arc::new(AlwaysFlag::new(1)?))?;
    Ok(reg)
}

/// Registers a [`ReSolve`] checker guarding `solver_id` with the given
/// gap-detection budget. The checker re-runs that solver when auditing, so
/// it must be constructed per attacked pair.
pub fn add_resolve(reg: &mut ProgramRegistry, solver_id: &str, budget: u64) -> Result<()> {
    let solver = reg.solver(solver_id)?;
    reg.register_checker(Arc::new(ReSolve::new(solver, budget)))
}
