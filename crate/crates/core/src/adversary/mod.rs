//! Adversarial input construction.
//!
//! Given any always-answering solver, [`attack_solver`] manufactures a
//! concrete input on which that solver's answer is provably wrong, and
//! packages the evidence into a [`certificate::FailureCertificate`] whose
//! claims re-verify from scratch. [`attack_checker`] does the same for
//! solver/checker pairs: whatever flag the checker raises on the diagonal
//! input, the input resolves so that the flag is the opposite of the truth.
//!
//! The mechanism is the diagonal input of [`crate::markov::engine`]: the
//! input watches the subject's own (capped) runs, and the uncapped run's
//! verdict and fuel pick the anchor schedule the input *is*. Concretely:
//!
//! * verdict 1 (answer within `κ` of the second anchor) resolves the input
//!   to `ι¹_t`, whose unique solution is the *first* anchor — by the
//!   separation gate the answer is then more than `κ` away from it;
//! * verdict 2 (answer not within `κ` of the second anchor) resolves to
//!   `ι²_t`, whose unique solution *is* the second anchor;
//! * verdict 3 (exit-flag mode, checker said "wrong") resolves to the
//!   degenerate `ι⁰`, where any answer within the `α`-range of the solution
//!   segment is in fact correct — so the checker is wrong instead.
//!
//! [`builtin`] provides a zoo of deterministic subjects used throughout
//! the test-suite and CLI; none of them is artificial filler — each
//! realizes a distinct querying strategy (no queries, one coarse query,
//! symmetric snapshots, full re-solving).

pub mod builtin;
pub mod certificate;

use serde::{Deserialize, Serialize};

use crate::exactnum::{DistanceWitness, Rational};
use crate::markov::descriptor::MarkovInput;
use crate::markov::engine::{DiagonalOutcome, Engine};
use crate::markov::ProblemHeader;
use crate::problems::{solve_closed_form, Dims, Family, ProblemInstance, SolutionSet};
use crate::{Error, Result};

pub use certificate::{ExitFlagCertificate, FailureCertificate, RangeViolation};

/// Default `α`-range parameter: answers within `α` of the degenerate
/// solution segment count as correct there. Must stay strictly below `κ`.
pub fn default_alpha() -> Rational {
    Rational::new(1, 20).expect("constant")
}

/// Ground-truth evaluation of an answer against an input: the resolved
/// instance, its solution set, the exact distance of the answer to it, and
/// the resulting correctness flag (`1` iff the distance is at most `κ`).
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TruthReport {
    /// The instance the input resolves to.
    pub truth: ProblemInstance,
    /// Its exact solution set.
    pub solution: SolutionSet,
    /// Exact distance from the answer to the solution set.
    pub distance: DistanceWitness,
    /// `1` iff the answer is within `κ` of the solution set.
    pub flag: u8,
}

/// Evaluates `answer` against the ground truth of `input`.
pub fn exit_flag_truth(
    engine: &Engine<'_>,
    input: &MarkovInput,
    answer: &crate::exactnum::QVec,
) -> Result<TruthReport> {
    let truth = engine.ground_truth(input)?;
    let solution = solve_closed_form(&truth)?;
    let d = solution.dist(answer, input.header.family.p)?;
    let flag = u8::from(d.le(&input.header.family.kappa));
    Ok(TruthReport {
        truth,
        solution,
        distance: d.witness(),
        flag,
    })
}

fn uncapped_completed_run(
    engine: &Engine<'_>,
    input: &MarkovInput,
    subject: &str,
) -> Result<crate::markov::engine::CompletedRun> {
    let first = engine.run_diagonal(input, None)?;
    let second = engine.run_diagonal(input, None)?;
    if first != second {
        return Err(Error::Determinism(format!(
            "{subject} produced two different uncapped runs on {input}"
        )));
    }
    match first {
        DiagonalOutcome::Complete(run) => Ok(run),
        DiagonalOutcome::Aborted { .. } => Err(Error::Contract(
            "uncapped diagonal run reported an abort".into(),
        )),
    }
}

/// Manufactures an input on which `solver_id`'s answer is provably wrong
/// and returns the exact-evidence certificate.
///
/// The separation gate `dist(y1, y2) > 2κ` must hold for the family (it is
/// re-checked here); the resulting certificate's distance witness always
/// exceeds `κ`.
pub fn attack_solver(
    engine: &Engine<'_>,
    solver_id: &str,
    family: Family,
    dims: Dims,
    theta: Rational,
) -> Result<FailureCertificate> {
    crate::problems::validate_separation(&family)?;
    let solver = engine.registry().solver(solver_id)?;
    let header = ProblemHeader { family, dims, theta };
    let input = MarkovInput::diagonal_plain(header, &*solver);
    let run = uncapped_completed_run(engine, &input, &format!("solver {solver_id:?}"))?;
    let report = exit_flag_truth(engine, &input, &run.answer)?;
    if report.flag != 0 {
        // The diagonal construction guarantees this cannot happen for a
        // deterministic subject; reaching it means the engine is broken.
        return Err(Error::Contract(
            "diagonal answer landed within kappa of the resolved solution".into(),
        ));
    }
    Ok(FailureCertificate {
        input,
        answer: run.answer,
        verdict: run.verdict,
        fuel: run.fuel,
        truth: report.truth,
        solution: report.solution,
        distance: report.distance,
    })
}

/// Outcome of an exit-flag attack: either the checker was defeated, or
/// the pair turned out not to be attackable because the solver's answer
/// fell outside the `α`-range on the rejecting branch.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ExitFlagAttack {
    /// The checker's flag contradicts the ground truth.
    Certificate(ExitFlagCertificate),
    /// The attack does not apply; the record proves why.
    RangeViolation(RangeViolation),
}

/// Runs the exit-flag attack on a solver/checker pair.
///
/// Whatever flag the checker raises on the manufactured input, the input
/// resolves so that the flag is the opposite of the truth — except in one
/// case: on the rejecting branch (verdict 3) the input resolves to the
/// degenerate instance, and the construction needs the solver's answer to
/// lie within the `α`-range of the solution segment there. Pairs whose
/// solver answers further off the segment yield a self-verifying
/// [`RangeViolation`] record instead of a certificate.
pub fn exit_flag_attack(
    engine: &Engine<'_>,
    solver_id: &str,
    checker_id: &str,
    family: Family,
    dims: Dims,
    theta: Rational,
    alpha: &Rational,
) -> Result<ExitFlagAttack> {
    crate::problems::validate_separation(&family)?;
    if alpha.is_negative() || *alpha >= family.kappa {
        return Err(Error::Domain(format!(
            "alpha must satisfy 0 <= alpha < kappa, got {alpha}"
        )));
    }
    let solver = engine.registry().solver(solver_id)?;
    let checker = engine.registry().checker(checker_id)?;
    let header = ProblemHeader { family, dims, theta };
    let input = MarkovInput::diagonal_exitflag(header, &*solver, &*checker);
    let run = uncapped_completed_run(
        engine,
        &input,
        &format!("pair ({solver_id:?}, {checker_id:?})"),
    )?;
    let flag = run
        .flag
        .ok_or_else(|| Error::Contract("exit-flag run carries no flag".into()))?;
    let report = exit_flag_truth(engine, &input, &run.answer)?;
    if run.verdict == 3 && !report.distance.within(alpha) {
        return Ok(ExitFlagAttack::RangeViolation(RangeViolation {
            input,
            answer: run.answer,
            verdict: run.verdict,
            fuel: run.fuel,
            flag,
            truth: report.truth,
            solution: report.solution,
            distance: report.distance,
            alpha: alpha.clone(),
        }));
    }
    if flag == report.flag {
        return Err(Error::Contract(
            "checker flag agreed with the ground truth; the diagonal construction is broken"
                .into(),
        ));
    }
    Ok(ExitFlagAttack::Certificate(ExitFlagCertificate {
        input,
        answer: run.answer,
        verdict: run.verdict,
        fuel: run.fuel,
        flag,
        truth: report.truth,
        solution: report.solution,
        distance: report.distance,
        truth_flag: report.flag,
        alpha: alpha.clone(),
    }))
}

/// Like [`exit_flag_attack`], but treats the range-violation outcome as a
/// "not applicable" error. Convenient when only defeated checkers are of
/// interest.
pub fn attack_checker(
    engine: &Engine<'_>,
    solver_id: &str,
    checker_id: &str,
    family: Family,
    dims: Dims,
    theta: Rational,
    alpha: &Rational,
) -> Result<ExitFlagCertificate> {
    match exit_flag_attack(engine, solver_id, checker_id, family, dims, theta, alpha)? {
        ExitFlagAttack::Certificate(cert) => Ok(cert),
        ExitFlagAttack::RangeViolation(_) => Err(Error::NotApplicable(format!(
            "solver {solver_id:?} answered outside the alpha range of the degenerate solution \
             segment; the exit-flag attack does not apply to this pair"
        ))),
    }
}

/// Attacks one solver across a ladder of problem dimensions
/// `n1 = base_n1, …, base_n1 + count − 1` (all with a single row),
/// returning one certificate per dimension. The manufactured inputs differ
/// in length only by their dimension digits.
pub fn batch_attack(
    engine: &Engine<'_>,
    solver_id: &str,
    family: Family,
    base_n1: u32,
    count: u32,
    theta: Rational,
) -> Result<Vec<FailureCertificate>> {
    if count == 0 {
        return Err(Error::Domain("batch size must be positive".into()));
    }
    (0..count)
        .map(|i| {
            attack_solver(
                engine,
                solver_id,
                family.clone(),
                Dims::new(base_n1 + i, 1)?,
                theta.clone(),
            )
        })
        .collect()
}
