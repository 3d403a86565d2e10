//! Trustworthy (abstaining) solvers and de-oracolisation.
//!
//! The always-answering programs of [`crate::markov`] can be driven into
//! provably wrong answers by diagonal inputs. The constructions here escape
//! that fate by being allowed to say "I don't know":
//!
//! * [`gamma_star`] — the anchor-resolution loop: watch the gap
//!   `δ(n) = Φ₁(n) − Φ₂(n)` between the first two coordinates at growing
//!   precision; once `|δ(n)| > 2·2^{-n}`, the sign of `δ` reveals which
//!   anchor is the unique solution. Within a finite budget the loop either
//!   *answers exactly* or reports [`GammaOutcome::NotYet`].
//! * [`tower_solve`] — the level-`n` abstaining solver: answer if the gap
//!   resolves within `n` levels, otherwise say [`TrustworthyOutcome::IDontKnow`].
//!   Answering is monotone in `n`, abstention on the degenerate input is
//!   eternal, and every answer has exact distance zero to the solution set.
//! * [`run_giving_up`] — the combinator that packages a level-indexed
//!   family into a solver with an explicit giving-up parameter, verifying
//!   the monotonicity contract as it goes.
//! * [`SelectiveSolver`] and [`curated_solve`] — solvers that are exactly
//!   right on a restricted input class (a registered finite list, or the
//!   transparent exact inputs) and abstain or refuse elsewhere.
//! * [`verdict_extractor`] and the `strip_oracle_*` functions — turning
//!   probe-assisted ("oracle") programs into ordinary ones by evaluating
//!   both anchor probes and, on disagreement, resolving the true anchor
//!   with a budgeted capped run.
//!
//! `NotYet` and `IDontKnow` are deliberately distinct: the former means "a
//! larger budget may still resolve this input", the latter is the final
//! output of a solver that has permanently given up at its level.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::exactnum::{dist_point, dyadic, QVec, Rational};
use crate::markov::descriptor::{InputKind, MarkovInput};
use crate::markov::engine::{DiagonalOutcome, Engine};
use crate::markov::{CoordOracle, ProblemHeader, RunInterrupt, RunResult};
use crate::problems::anchor_sets;
use crate::{Error, Result};

/// Outcome of a budgeted resolution loop.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub enum GammaOutcome {
    /// The gap resolved; the returned point is exactly the unique solution
    /// of the input (when the input is single-valued).
    Answer(QVec),
    /// The budget ran out before the gap resolved; a larger budget may
    /// still answer.
    NotYet,
}

/// Final output of an abstaining solver.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub enum TrustworthyOutcome {
    /// An exact answer.
    Answer(QVec),
    /// The solver gives up on this input at its level.
    IDontKnow,
}

/// Converts a run result produced in an unmetered context, where fuel
/// interrupts must not occur, into a plain result.
pub fn unmetered<T>(r: RunResult<T>) -> Result<T> {
    r.map_err(|e| match e {
        RunInterrupt::Fault(err) => err,
        RunInterrupt::Fuel => Error::Contract("fuel interrupt in an unmetered context".into()),
    })
}

/// Oracle adapter that answers queries from an engine's coordinate
/// evaluator — the view a trustworthy solver has of a described input.
pub struct EngineOracle<'a, 'r> {
    engine: &'a Engine<'r>,
    input: &'a MarkovInput,
}

impl<'a, 'r> EngineOracle<'a, 'r> {
    /// Oracle over one input.
    pub fn new(engine: &'a Engine<'r>, input: &'a MarkovInput) -> Self {
        EngineOracle { engine, input }
    }
}

impl CoordOracle for EngineOracle<'_, '_> {
    fn query(&mut self, coord: usize, precision: u64) -> RunResult<Rational> {
        self.engine
            .eval_coord(self.input, coord, precision)
            .map_err(RunInterrupt::Fault)
    }
}

/// The anchor-resolution loop. For `n = 1, …, budget` it queries the two
/// moving coordinates at precision `n` and tests the gap strictly:
/// `δ(n) > 2·2^{-n}` answers the first anchor, `δ(n) < −2·2^{-n}` the
/// second; anything in between (including exact equality with the
/// threshold) keeps looping.
///
/// On an anchor schedule `ι^j_t` the loop fires at exactly `n = 2t + 2`.
pub fn gamma_star(
    oracle: &mut dyn CoordOracle,
    header: &ProblemHeader,
    budget: u64,
) -> RunResult<GammaOutcome> {
    let anchors = anchor_sets(&header.family, &header.dims)?;
    for n in 1..=budget {
        let phi1 = oracle.query(1, n)?;
        let phi2 = oracle.query(2, n)?;
        let delta = phi1 - phi2;
        let threshold = Rational::from_int(2) * dyadic(n);
        if delta > threshold {
            return Ok(GammaOutcome::Answer(anchors.y1));
        }
        if delta < -threshold {
            return Ok(GammaOutcome::Answer(anchors.y2));
        }
    }
    Ok(GammaOutcome::NotYet)
}

/// True if the gap resolves within `levels` levels — the computable
/// lower-semicontinuous witness that the input is single-valued.
pub fn single_valued_indicator(
    oracle: &mut dyn CoordOracle,
    header: &ProblemHeader,
    levels: u64,
) -> RunResult<bool> {
    Ok(matches!(
        gamma_star(oracle, header, levels)?,
        GammaOutcome::Answer(_)
    ))
}

/// The level-`level` solver of the abstaining tower: answer exactly when
/// the gap resolves within `level` levels, otherwise give up.
pub fn tower_solve(
    oracle: &mut dyn CoordOracle,
    header: &ProblemHeader,
    level: u64,
) -> RunResult<TrustworthyOutcome> {
    Ok(match gamma_star(oracle, header, level)? {
        GammaOutcome::Answer(y) => TrustworthyOutcome::Answer(y),
        GammaOutcome::NotYet => TrustworthyOutcome::IDontKnow,
    })
}

/// A level-indexed family of abstaining solvers, to be packaged into a
/// giving-up solver. The family contract is monotonicity: once a level
/// answers an input, every higher level answers it too.
pub trait GivingUpFamily: Send + Sync {
    /// Family identifier.
    fn id(&self) -> &str;

    /// The level-`level` member.
    fn solve_at(
        &self,
        level: u64,
        header: &ProblemHeader,
        oracle: &mut dyn CoordOracle,
    ) -> RunResult<TrustworthyOutcome>;
}

/// The Γ tower as a giving-up family.
pub struct GammaTower;

impl GivingUpFamily for GammaTower {
    fn id(&self) -> &str {
        "tower"
    }
    fn solve_at(
        &self,
        level: u64,
        header: &ProblemHeader,
        oracle: &mut dyn CoordOracle,
    ) -> RunResult<TrustworthyOutcome> {
        tower_solve(oracle, header, level)
    }
}

/// Result of one giving-up evaluation.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct GivingUpReport {
    /// The level's outcome.
    pub outcome: TrustworthyOutcome,
    /// When the level answered: the smallest level that answers this
    /// input, found by scanning and verifying monotonicity on the way.
    pub first_answer_level: Option<u64>,
}

/// Runs one level of a giving-up family. When the level answers, every
/// lower level is re-run to locate the first answering level and to verify
/// the monotonicity contract; a family that answers at some level and
/// abstains at a higher one is rejected with a contract error.
///
/// Intended for unmetered oracles (re-running levels repeats queries).
pub fn run_giving_up<F: GivingUpFamily + ?Sized>(
    family: &F,
    level: u64,
    header: &ProblemHeader,
    oracle: &mut dyn CoordOracle,
) -> RunResult<GivingUpReport> {
    let outcome = family.solve_at(level, header, oracle)?;
    let mut first_answer_level = None;
    if matches!(outcome, TrustworthyOutcome::Answer(_)) {
        for m in 1..=level {
            let answered = matches!(
                family.solve_at(m, header, oracle)?,
                TrustworthyOutcome::Answer(_)
            );
            match (first_answer_level, answered) {
                (None, true) => first_answer_level = Some(m),
                (Some(first), false) => {
                    return Err(RunInterrupt::Fault(Error::Contract(format!(
                        "giving-up family {:?} violates monotonicity: answers at level {first} but not at {m}",
                        family.id()
                    ))));
                }
                _ => {}
            }
        }
    }
    Ok(GivingUpReport {
        outcome,
        first_answer_level,
    })
}

/// A solver that is exactly right on a finite registered list of inputs
/// (answered with the first anchor, which lies in the solution set of
/// every registered degenerate input) and falls back to a budgeted
/// [`gamma_star`] elsewhere, abstaining when the budget runs out.
pub struct SelectiveSolver {
    registered: BTreeSet<String>,
    budget: u64,
}

impl SelectiveSolver {
    /// Empty registration list with the given fallback budget.
    pub fn new(budget: u64) -> Self {
        SelectiveSolver {
            registered: BTreeSet::new(),
            budget,
        }
    }

    /// Register an input by its canonical descriptor.
    pub fn register(&mut self, input: &MarkovInput) {
        self.registered.insert(input.canonical_line());
    }

    /// Solve a described input.
    pub fn solve(&self, engine: &Engine<'_>, input: &MarkovInput) -> Result<TrustworthyOutcome> {
        let anchors = anchor_sets(&input.header.family, &input.header.dims)?;
        if self.registered.contains(&input.canonical_line()) {
            return Ok(TrustworthyOutcome::Answer(anchors.y1));
        }
        let mut oracle = EngineOracle::new(engine, input);
        Ok(
            match unmetered(gamma_star(&mut oracle, &input.header, self.budget))? {
                GammaOutcome::Answer(y) => TrustworthyOutcome::Answer(y),
                GammaOutcome::NotYet => TrustworthyOutcome::IDontKnow,
            },
        )
    }
}

/// A solver for the transparent input class: exact inputs only. Queries
/// both moving coordinates once (exact inputs answer exactly at any
/// precision) and answers the midpoint of the solution segment in the
/// degenerate case, or the resolved anchor otherwise. Refuses every other
/// input kind.
pub fn curated_solve(engine: &Engine<'_>, input: &MarkovInput) -> Result<QVec> {
    if !matches!(input.kind, InputKind::Exact { .. }) {
        return Err(Error::NotApplicable(
            "the curated solver only accepts exact inputs".into(),
        ));
    }
    let anchors = anchor_sets(&input.header.family, &input.header.dims)?;
    let mut oracle = EngineOracle::new(engine, input);
    let u1 = unmetered(oracle.query(1, 1))?;
    let u2 = unmetered(oracle.query(2, 1))?;
    Ok(match u1.cmp(&u2) {
        std::cmp::Ordering::Greater => anchors.y1,
        std::cmp::Ordering::Less => anchors.y2,
        std::cmp::Ordering::Equal => QVec::midpoint(&anchors.y1, &anchors.y2)?,
    })
}

/// Output of the budgeted verdict extractor.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum VerdictOutcome {
    /// The capped run completed with an anchor verdict.
    Verdict(u8),
    /// The budget did not suffice (the run aborted or judged degenerate).
    NotYet,
}

/// Runs a diagonal input's subject capped at `budget` and reports which
/// anchor the input resolves to, if the run completes with verdict 1 or 2.
/// Only diagonal inputs are extractable.
pub fn verdict_extractor(
    engine: &Engine<'_>,
    input: &MarkovInput,
    budget: u64,
) -> Result<VerdictOutcome> {
    if !matches!(input.kind, InputKind::Diagonal { .. }) {
        return Err(Error::NotApplicable(
            "verdict extraction only applies to diagonal inputs".into(),
        ));
    }
    Ok(match engine.run_diagonal(input, Some(budget))? {
        DiagonalOutcome::Complete(run) if run.verdict == 1 || run.verdict == 2 => {
            VerdictOutcome::Verdict(run.verdict)
        }
        _ => VerdictOutcome::NotYet,
    })
}

/// A checker that additionally receives a probe point — a candidate for
/// the input's true solution — alongside the answer it judges.
pub trait OracleChecker: Send + Sync {
    /// Stable identifier.
    fn id(&self) -> &str;

    /// Judge `answer` given the probe.
    fn check_with_probe(
        &self,
        header: &ProblemHeader,
        answer: &QVec,
        probe: &QVec,
        oracle: &mut dyn CoordOracle,
    ) -> RunResult<u8>;
}

/// A solver that additionally receives a probe point.
pub trait OracleSolver: Send + Sync {
    /// Stable identifier.
    fn id(&self) -> &str;

    /// Produce an answer given the probe.
    fn solve_with_probe(
        &self,
        header: &ProblemHeader,
        probe: &QVec,
        oracle: &mut dyn CoordOracle,
    ) -> RunResult<QVec>;
}

fn validate_flag(flag: u8, id: &str) -> Result<u8> {
    if flag > 1 {
        return Err(Error::Contract(format!(
            "oracle checker {id:?} emitted flag {flag} (must be 0 or 1)"
        )));
    }
    Ok(flag)
}

/// De-oracolises a probe-assisted checker on one input: evaluate it at
/// both anchor probes; if the flags agree the probe was irrelevant and the
/// common flag is returned. Otherwise the true anchor is resolved with a
/// budgeted capped run and that probe's flag wins. Fails with a budget
/// error when the probes disagree and the run does not resolve in budget.
pub fn strip_oracle_checker(
    engine: &Engine<'_>,
    input: &MarkovInput,
    answer: &QVec,
    checker: &dyn OracleChecker,
    budget: u64,
) -> Result<u8> {
    let anchors = anchor_sets(&input.header.family, &input.header.dims)?;
    let mut oracle = EngineOracle::new(engine, input);
    let f1 = validate_flag(
        unmetered(checker.check_with_probe(&input.header, answer, &anchors.y1, &mut oracle))?,
        checker.id(),
    )?;
    let f2 = validate_flag(
        unmetered(checker.check_with_probe(&input.header, answer, &anchors.y2, &mut oracle))?,
        checker.id(),
    )?;
    if f1 == f2 {
        return Ok(f1);
    }
    match verdict_extractor(engine, input, budget)? {
        VerdictOutcome::Verdict(1) => Ok(f1),
        VerdictOutcome::Verdict(_) => Ok(f2),
        VerdictOutcome::NotYet => Err(Error::BudgetExhausted(format!(
            "probe flags disagree and the verdict did not resolve within budget {budget}"
        ))),
    }
}

/// De-oracolises a probe-assisted solver the same way: evaluate at both
/// anchor probes, return the common answer, or the answer at the resolved
/// anchor's probe.
pub fn strip_oracle_solver(
    engine: &Engine<'_>,
    input: &MarkovInput,
    solver: &dyn OracleSolver,
    budget: u64,
) -> Result<QVec> {
    let anchors = anchor_sets(&input.header.family, &input.header.dims)?;
    let mut oracle = EngineOracle::new(engine, input);
    let a1 = unmetered(solver.solve_with_probe(&input.header, &anchors.y1, &mut oracle))?;
    let a2 = unmetered(solver.solve_with_probe(&input.header, &anchors.y2, &mut oracle))?;
    if a1 == a2 {
        return Ok(a1);
    }
    match verdict_extractor(engine, input, budget)? {
        VerdictOutcome::Verdict(1) => Ok(a1),
        VerdictOutcome::Verdict(_) => Ok(a2),
        VerdictOutcome::NotYet => Err(Error::BudgetExhausted(format!(
            "probe answers disagree and the verdict did not resolve within budget {budget}"
        ))),
    }
}

/// Exact distance check used by tests and reports: whether `answer` is at
/// exact distance zero from the point `target`.
pub fn answers_exactly(answer: &QVec, target: &QVec, header: &ProblemHeader) -> Result<bool> {
    Ok(dist_point(answer, target, header.family.p)?.le(&Rational::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::ProgramRegistry;
    use crate::problems::{default_theta, Dims, Family};

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn header(family: Family) -> ProblemHeader {
        ProblemHeader {
            family,
            dims: Dims::new(2, 1).unwrap(),
            theta: default_theta(),
        }
    }

    fn lp_header() -> ProblemHeader {
        header(Family::lp_default())
    }

    fn y(axis: usize) -> QVec {
        QVec::axis_scaled(2, axis, q("2/5")).unwrap()
    }

    #[test]
    fn gamma_fires_at_exactly_two_t_plus_two_on_schedules() {
        let reg = ProgramRegistry::new();
        let engine = Engine::new(&reg);
        for (j, t) in [(1u8, 1u64), (1, 3), (2, 1), (2, 5)] {
            let input = MarkovInput::schedule(lp_header(), j, t).unwrap();
            let fire = 2 * t + 2;
            let mut oracle = EngineOracle::new(&engine, &input);
            let below = gamma_star(&mut oracle, &input.header, fire - 1).unwrap();
            assert_eq!(below, GammaOutcome::NotYet, "j={j} t={t}");
            let mut oracle = EngineOracle::new(&engine, &input);
            let at = gamma_star(&mut oracle, &input.header, fire).unwrap();
            let expected = if j == 1 { y(0) } else { y(1) };
            assert_eq!(at, GammaOutcome::Answer(expected), "j={j} t={t}");
        }
    }

    #[test]
    fn gamma_on_exact_inputs() {
        let reg = ProgramRegistry::new();
        let engine = Engine::new(&reg);
        // Constant gap 1/4 = 2^{-2} crosses the strict threshold 2^{1-n}
        // first at n = 4.
        let input = MarkovInput::exact(lp_header(), q("1/2"), q("1/4")).unwrap();
        let mut oracle = EngineOracle::new(&engine, &input);
        assert_eq!(gamma_star(&mut oracle, &input.header, 3).unwrap(), GammaOutcome::NotYet);
        let mut oracle = EngineOracle::new(&engine, &input);
        assert_eq!(
            gamma_star(&mut oracle, &input.header, 4).unwrap(),
            GammaOutcome::Answer(y(0))
        );
        // The degenerate input never resolves.
        let input = MarkovInput::exact(lp_header(), q("1/2"), q("1/2")).unwrap();
        let mut oracle = EngineOracle::new(&engine, &input);
        assert_eq!(gamma_star(&mut oracle, &input.header, 64).unwrap(), GammaOutcome::NotYet);
        let mut oracle = EngineOracle::new(&engine, &input);
        assert!(!single_valued_indicator(&mut oracle, &input.header, 64).unwrap());
    }

    #[test]
    fn tower_is_monotone_and_never_wrong_on_schedules() {
        let reg = ProgramRegistry::new();
        let engine = Engine::new(&reg);
        for (j, t) in [(1u8, 2u64), (2, 4)] {
            let input = MarkovInput::schedule(lp_header(), j, t).unwrap();
            let truth = engine.ground_truth(&input).unwrap();
            let solution = crate::problems::solve_closed_form(&truth).unwrap();
            let fire = 2 * t + 2;
            let mut answered = false;
            for level in 1..=fire + 4 {
                let mut oracle = EngineOracle::new(&engine, &input);
                match tower_solve(&mut oracle, &input.header, level).unwrap() {
                    TrustworthyOutcome::Answer(a) => {
                        assert!(level >= fire, "answered too early at level {level}");
                        answered = true;
                        // Exact correctness: distance zero to the solution set.
                        assert!(solution.dist(&a, input.header.family.p).unwrap().le(&Rational::zero()));
                    }
                    TrustworthyOutcome::IDontKnow => {
                        assert!(!answered, "monotonicity violated at level {level}");
                        assert!(level < fire);
                    }
                }
            }
            assert!(answered);
        }
    }

    #[test]
    fn giving_up_combinator_reports_first_answer_level() {
        let reg = ProgramRegistry::new();
        let engine = Engine::new(&reg);
        let input = MarkovInput::schedule(lp_header(), 1, 3).unwrap();
        let mut oracle = EngineOracle::new(&engine, &input);
        let report = run_giving_up(&GammaTower, 12, &input.header, &mut oracle).unwrap();
        assert_eq!(report.outcome, TrustworthyOutcome::Answer(y(0)));
        assert_eq!(report.first_answer_level, Some(8));
        let mut oracle = EngineOracle::new(&engine, &input);
        let report = run_giving_up(&GammaTower, 7, &input.header, &mut oracle).unwrap();
        assert_eq!(report.outcome, TrustworthyOutcome::IDontKnow);
        assert_eq!(report.first_answer_level, None);
    }

    #[test]
    fn giving_up_combinator_detects_monotonicity_violations() {
        struct Flaky;
        impl GivingUpFamily for Flaky {
            fn id(&self) -> &str {
                "flaky"
            }
            fn solve_at(
                &self,
                level: u64,
                _h: &ProblemHeader,
                _o: &mut dyn CoordOracle,
            ) -> RunResult<TrustworthyOutcome> {
                Ok(if level == 3 || level >= 5 {
                    TrustworthyOutcome::Answer(QVec::zeros(2))
                } else {
                    TrustworthyOutcome::IDontKnow
                })
            }
        }
        let mut null_oracle = |_c: usize, _n: u64| -> RunResult<Rational> {
            Err(RunInterrupt::Fault(Error::Contract("no queries expected".into())))
        };
        let h = lp_header();
        // Level 3 answers and levels 1..3 scan cleanly (first = 3).
        let report = run_giving_up(&Flaky, 3, &h, &mut null_oracle).unwrap();
        assert_eq!(report.first_answer_level, Some(3));
        // Level 5 answers but the scan sees the level-4 hole.
        let err = run_giving_up(&Flaky, 5, &h, &mut null_oracle).unwrap_err();
        assert!(matches!(err, RunInterrupt::Fault(Error::Contract(_))));
        // Abstaining levels skip the scan.
        let report = run_giving_up(&Flaky, 2, &h, &mut null_oracle).unwrap();
        assert_eq!(report.outcome, TrustworthyOutcome::IDontKnow);
        assert_eq!(report.first_answer_level, None);
    }

    #[test]
    fn selective_solver_uses_registration_then_gamma() {
        let reg = ProgramRegistry::new();
        let engine = Engine::new(&reg);
        let degenerate = MarkovInput::exact(lp_header(), q("1/2"), q("1/2")).unwrap();
        let mut solver = SelectiveSolver::new(10);
        solver.register(&degenerate);
        // Registered: answered with y1, which lies in the degenerate
        // solution segment.
        assert_eq!(
            solver.solve(&engine, &degenerate).unwrap(),
            TrustworthyOutcome::Answer(y(0))
        );
        // Unregistered schedule within budget (fires at 8 ≤ 10).
        let near = MarkovInput::schedule(lp_header(), 1, 3).unwrap();
        assert_eq!(
            solver.solve(&engine, &near).unwrap(),
            TrustworthyOutcome::Answer(y(0))
        );
        // Unregistered schedule beyond budget (fires at 12 > 10).
        let far = MarkovInput::schedule(lp_header(), 2, 5).unwrap();
        assert_eq!(solver.solve(&engine, &far).unwrap(), TrustworthyOutcome::IDontKnow);
    }

    #[test]
    fn curated_solver_handles_exact_inputs_only() {
        let reg = ProgramRegistry::new();
        let engine = Engine::new(&reg);
        let mid = MarkovInput::exact(lp_header(), q("1/2"), q("1/2")).unwrap();
        assert_eq!(
            curated_solve(&engine, &mid).unwrap(),
            QVec::from_entries(vec![q("1/5"), q("1/5")])
        );
        let first = MarkovInput::exact(lp_header(), q("1/2"), q("1/4")).unwrap();
        assert_eq!(curated_solve(&engine, &first).unwrap(), y(0));
        let second = MarkovInput::exact(lp_header(), q("27/64"), q("1/2")).unwrap();
        assert_eq!(curated_solve(&engine, &second).unwrap(), y(1));
        let sched = MarkovInput::schedule(lp_header(), 1, 1).unwrap();
        assert!(matches!(
            curated_solve(&engine, &sched),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn verdict_extractor_rejects_non_diagonal_inputs() {
        let reg = ProgramRegistry::new();
        let engine = Engine::new(&reg);
        let input = MarkovInput::schedule(lp_header(), 1, 1).unwrap();
        assert!(matches!(
            verdict_extractor(&engine, &input, 8),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn gamma_works_for_all_default_families() {
        let reg = ProgramRegistry::new();
        let engine = Engine::new(&reg);
        for family in Family::all_defaults() {
            let h = header(family.clone());
            let input = MarkovInput::schedule(h.clone(), 2, 2).unwrap();
            let mut oracle = EngineOracle::new(&engine, &input);
            match gamma_star(&mut oracle, &h, 6).unwrap() {
                GammaOutcome::Answer(a) => {
                    let anchors = anchor_sets(&family, &h.dims).unwrap();
                    assert_eq!(a, anchors.y2, "family {}", family.kind.tag());
                }
                GammaOutcome::NotYet => panic!("should fire at 6 for {}", family.kind.tag()),
            }
        }
    }
}
