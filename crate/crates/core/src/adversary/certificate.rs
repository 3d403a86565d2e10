//! Self-verifying failure certificates.
//!
//! A certificate packages everything needed to re-establish a failure
//! claim from scratch: the manufactured input, the subject's answer and
//! run metadata, the instance the input resolves to, its exact solution
//! set, and the exact distance witness. [`FailureCertificate::verify`]
//! re-runs the subject and recomputes every claim; any mismatch is an
//! [`Error::Verification`]. Nothing in a certificate is approximate, so
//! verification either reproduces it bit-for-bit or rejects it.

use serde::{Deserialize, Serialize};

use crate::exactnum::{DistanceWitness, QVec, Rational};
use crate::markov::descriptor::{DiagonalMode, InputKind, MarkovInput};
use crate::markov::engine::{CompletedRun, DiagonalOutcome, Engine};
use crate::problems::{solve_closed_form, ProblemInstance, SolutionSet};
use crate::{Error, Result};

fn fail(what: impl Into<String>) -> Error {
    Error::Verification(what.into())
}

fn replayed_run(engine: &Engine<'_>, input: &MarkovInput) -> Result<CompletedRun> {
    let first = engine.run_diagonal(input, None)?;
    let second = engine.run_diagonal(input, None)?;
    if first != second {
        return Err(fail("subject is not deterministic on the certified input"));
    }
    match first {
        DiagonalOutcome::Complete(run) => Ok(run),
        DiagonalOutcome::Aborted { .. } => Err(fail("uncapped replay aborted")),
    }
}

/// Proof that a solver answered provably wrongly on a concrete input.
///
/// All fields are exact; [`verify`](Self::verify) recomputes each one.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct FailureCertificate {
    /// The manufactured diagonal input.
    pub input: MarkovInput,
    /// The answer the solver produced on it.
    pub answer: QVec,
    /// The verdict of the uncapped run (1 or 2).
    pub verdict: u8,
    /// The fuel the uncapped run consumed.
    pub fuel: u64,
    /// The instance the input resolves to, given that verdict and fuel.
    pub truth: ProblemInstance,
    /// The exact solution set of that instance.
    pub solution: SolutionSet,
    /// Exact distance from the answer to the solution set; exceeds `κ`.
    pub distance: DistanceWitness,
}

impl FailureCertificate {
    /// Re-establishes every claim from scratch.
    ///
    /// Replays the subject twice (uncapped) and checks determinism, then
    /// recomputes the resolved instance, its solution set, and the
    /// distance witness, and finally checks that the distance strictly
    /// exceeds `κ`. Any discrepancy is an [`Error::Verification`].
    pub fn verify(&self, engine: &Engine<'_>) -> Result<()> {
        match &self.input.kind {
            InputKind::Diagonal {
                mode: DiagonalMode::Plain,
                ..
            } => {}
            _ => return Err(fail("certificate input is not a plain diagonal input")),
        }
        let run = replayed_run(engine, &self.input)?;
        if run.answer != self.answer {
            return Err(fail("replayed answer differs from the certified answer"));
        }
        if run.verdict != self.verdict {
            return Err(fail("replayed verdict differs from the certified verdict"));
        }
        if run.fuel != self.fuel {
            return Err(fail("replayed fuel differs from the certified fuel"));
        }
        let truth = engine.ground_truth(&self.input)?;
        if truth != self.truth {
            return Err(fail("recomputed instance differs from the certified one"));
        }
        let solution = solve_closed_form(&truth)?;
        if solution != self.solution {
            return Err(fail("recomputed solution set differs from the certified one"));
        }
        let d = solution.dist(&self.answer, self.input.header.family.p)?;
        if d.witness() != self.distance {
            return Err(fail("recomputed distance differs from the certified witness"));
        }
        if !d.gt(&self.input.header.family.kappa) {
            return Err(fail("certified answer is not more than kappa from the solution"));
        }
        Ok(())
    }

    /// Canonical serialized payload; byte-identical across runs.
    pub fn payload_bytes(&self) -> Result<Vec<u8>> {
        serde_json::to_vec(self).map_err(|e| Error::Parse(format!("certificate payload: {e}")))
    }
}

/// Proof that an exit-flag attack on a solver/checker pair does *not*
/// apply: the run took the rejecting branch (verdict 3), but the solver's
/// answer lies further than `α` from the degenerate solution segment, so
/// the rejection cannot be turned into an error.
///
/// Like the failure certificates, every claim re-verifies from scratch.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct RangeViolation {
    /// The manufactured exit-flag diagonal input.
    pub input: MarkovInput,
    /// The answer the solver produced on it.
    pub answer: QVec,
    /// The verdict of the uncapped run; always 3.
    pub verdict: u8,
    /// The fuel the uncapped run consumed.
    pub fuel: u64,
    /// The flag the checker raised; always 0.
    pub flag: u8,
    /// The degenerate instance the input resolves to.
    pub truth: ProblemInstance,
    /// Its solution segment.
    pub solution: SolutionSet,
    /// Exact distance from the answer to the segment; exceeds `α`.
    pub distance: DistanceWitness,
    /// The `α`-range parameter that was violated.
    pub alpha: Rational,
}

impl RangeViolation {
    /// Re-establishes every claim from scratch.
    pub fn verify(&self, engine: &Engine<'_>) -> Result<()> {
        match &self.input.kind {
            InputKind::Diagonal {
                mode: DiagonalMode::ExitFlag,
                ..
            } => {}
            _ => return Err(fail("record input is not an exit-flag diagonal input")),
        }
        let kappa = &self.input.header.family.kappa;
        if self.alpha.is_negative() || self.alpha >= *kappa {
            return Err(fail("alpha is outside [0, kappa)"));
        }
        if self.verdict != 3 || self.flag != 0 {
            return Err(fail("range violations arise only from rejecting runs"));
        }
        let run = replayed_run(engine, &self.input)?;
        if run.answer != self.answer
            || run.verdict != self.verdict
            || run.fuel != self.fuel
            || run.flag != Some(self.flag)
        {
            return Err(fail("replayed run differs from the recorded one"));
        }
        let truth = engine.ground_truth(&self.input)?;
        if truth != self.truth {
            return Err(fail("recomputed instance differs from the recorded one"));
        }
        let solution = solve_closed_form(&truth)?;
        if solution != self.solution {
            return Err(fail("recomputed solution set differs from the recorded one"));
        }
        let d = solution.dist(&self.answer, self.input.header.family.p)?;
        if d.witness() != self.distance {
            return Err(fail("recomputed distance differs from the recorded witness"));
        }
        if !self.distance.exceeds(&self.alpha) {
            return Err(fail("recorded answer is within the alpha range after all"));
        }
        Ok(())
    }

    /// Canonical serialized payload; byte-identical across runs.
    pub fn payload_bytes(&self) -> Result<Vec<u8>> {
        serde_json::to_vec(self).map_err(|e| Error::Parse(format!("certificate payload: {e}")))
    }
}

/// Proof that a checker's flag contradicts the ground truth of the
/// solver's answer on a concrete input.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ExitFlagCertificate {
    /// The manufactured exit-flag diagonal input.
    pub input: MarkovInput,
    /// The answer the solver produced on it.
    pub answer: QVec,
    /// The verdict of the uncapped run (1, 2, or 3).
    pub verdict: u8,
    /// The fuel the uncapped run consumed.
    pub fuel: u64,
    /// The flag the checker raised.
    pub flag: u8,
    /// The instance the input resolves to.
    pub truth: ProblemInstance,
    /// The exact solution set of that instance.
    pub solution: SolutionSet,
    /// Exact distance from the answer to the solution set.
    pub distance: DistanceWitness,
    /// The ground-truth flag; differs from `flag`.
    pub truth_flag: u8,
    /// The `α`-range parameter in force (strictly below `κ`).
    pub alpha: Rational,
}

impl ExitFlagCertificate {
    /// Re-establishes every claim from scratch, including that the
    /// checker's flag is the opposite of the ground-truth flag and that a
    /// verdict-3 answer indeed lies within the `α`-range of the degenerate
    /// solution segment.
    pub fn verify(&self, engine: &Engine<'_>) -> Result<()> {
        match &self.input.kind {
            InputKind::Diagonal {
                mode: DiagonalMode::ExitFlag,
                ..
            } => {}
            _ => return Err(fail("certificate input is not an exit-flag diagonal input")),
        }
        let kappa = &self.input.header.family.kappa;
        if self.alpha.is_negative() || self.alpha >= *kappa {
            return Err(fail("alpha is outside [0, kappa)"));
        }
        let run = replayed_run(engine, &self.input)?;
        if run.answer != self.answer {
            return Err(fail("replayed answer differs from the certified answer"));
        }
        if run.verdict != self.verdict {
            return Err(fail("replayed verdict differs from the certified verdict"));
        }
        if run.fuel != self.fuel {
            return Err(fail("replayed fuel differs from the certified fuel"));
        }
        if run.flag != Some(self.flag) {
            return Err(fail("replayed flag differs from the certified flag"));
        }
        let truth = engine.ground_truth(&self.input)?;
        if truth != self.truth {
            return Err(fail("recomputed instance differs from the certified one"));
        }
        let solution = solve_closed_form(&truth)?;
        if solution != self.solution {
            return Err(fail("recomputed solution set differs from the certified one"));
        }
        let d = solution.dist(&self.answer, self.input.header.family.p)?;
        if d.witness() != self.distance {
            return Err(fail("recomputed distance differs from the certified witness"));
        }
        let truth_flag = u8::from(d.le(kappa));
        if truth_flag != self.truth_flag {
            return Err(fail("recomputed ground-truth flag differs from the certified one"));
        }
        if self.flag == self.truth_flag {
            return Err(fail("checker flag does not contradict the ground truth"));
        }
        if self.verdict == 3 && !self.distance.within(&self.alpha) {
            return Err(fail(
                "verdict-3 answer is not within the alpha range of the solution segment",
            ));
        }
        Ok(())
    }

    /// Canonical serialized payload; byte-identical across runs.
    pub fn payload_bytes(&self) -> Result<Vec<u8>> {
        serde_json::to_vec(self).map_err(|e| Error::Parse(format!("certificate payload: {e}")))
    }
}
