//! De-randomization of probabilistic subjects.
//!
//! A probabilistic subject consumes, besides its input, a one-way tape of
//! coin flips drawn from a computable measure on infinite bit sequences.
//! This module represents such subjects by their behavior on *finite*
//! flip prefixes — a run either halts using only the supplied flips or
//! reports that it needs more — and provides two majority-vote extraction
//! loops that turn them into deterministic subjects:
//!
//! * [`derandomize_single_valued`] handles subjects that produce one
//!   correct output with probability strictly above `1/2`. Stage `t`
//!   simulates all `2^t` flip prefixes and fires as soon as some output's
//!   cylinder mass provably exceeds `1/2`: the mass approximation at
//!   precision `t` must exceed `1/2 + 2^{-t}`.
//! * [`derandomize_multi_valued`] handles always-halting subjects that
//!   land in a (possibly multi-valued) solution set with probability at
//!   least `p > 1/2`. A fixed approximation precision `n₀` with
//!   `2^{-n₀} < p − 1/2` suffices: the loop fires on the first output
//!   whose approximate mass exceeds `1/2`, and when every length-`t`
//!   prefix has halted before that happens, it returns the designated
//!   fallback output (which is valid whenever the solution set is
//!   genuinely multi-valued).
//!
//! Both loops re-run every prefix at every stage and verify *prefix
//! consistency* — a subject that halts on a prefix must halt identically
//! on every extension — reporting violations as contract errors instead
//! of silently extracting garbage.
//!
//! [`DerandomizedSolver`] and [`DerandomizedChecker`] wrap randomized
//! subjects as ordinary deterministic [`SolverProgram`]s and
//! [`CheckerProgram`]s, so the diagonal attack machinery applies to them
//! unchanged: a randomized checker that is right with probability `p >
//! 1/2` everywhere would de-randomize into a deterministic checker that
//! is right everywhere, and no such checker survives the exit-flag
//! attack.

use std::sync::Arc;

use crate::exactnum::{dist_point, dist_segment, dyadic, QVec, Rational};
use crate::markov::{
    CheckerProgram, CoordOracle, ProblemHeader, RunInterrupt, RunResult, SolverProgram,
};
use crate::problems::anchor_sets;
use crate::trustworthy::{gamma_star, GammaOutcome};
use crate::{Error, Result};

/// A finite string of coin flips, ordered oldest first.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BitString {
    bits: Vec<bool>,
}

/// Stage budgets beyond this would enumerate more than 2^20 prefixes per
/// stage; extraction loops refuse to go further.
pub const MAX_STAGE: u64 = 20;

impl BitString {
    /// The empty string.
    pub fn empty() -> Self {
        BitString { bits: Vec::new() }
    }

    /// A string from explicit flips.
    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    /// Parses a string of `0`/`1` characters; the empty text is the empty
    /// string.
    pub fn parse(text: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(text.len());
        for c in text.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => {
                    return Err(Error::Parse(format!(
                        "bit strings contain only 0 and 1, found {c:?}"
                    )))
                }
            }
        }
        Ok(BitString { bits })
    }

    /// Number of flips.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    /// Whether the string is empty.
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// The `i`-th flip (0-indexed), if present.
    pub fn bit(&self, i: usize) -> Option<bool> {
        self.bits.get(i).copied()
    }

    /// Number of `1` flips.
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// All `2^t` strings of length `t`, in lexicographic order.
    pub fn all_of_length(t: u64) -> Result<Vec<BitString>> {
        if t > MAX_STAGE {
            return Err(Error::Domain(format!(
                "stage {t} would enumerate 2^{t} flip prefixes; the cap is {MAX_STAGE}"
            )));
        }
        let t = t as u32;
        let count: u64 = 1 << t;
        Ok((0..count)
            .map(|m| {
                let bits = (0..t).map(|i| (m >> (t - 1 - i)) & 1 == 1).collect();
                BitString { bits }
            })
            .collect())
    }
}

impl std::fmt::Display for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.bits {
            write!(f, "{}", u8::from(*b))?;
        }
        Ok(())
    }
}

/// A computable pre-measure on finite bit strings: `ρ(σ)` is the measure
/// of the set of infinite sequences extending `σ`, with `ρ(ε) = 1` and
/// `ρ(σ) = ρ(σ0) + ρ(σ1)`.
///
/// Implementations expose `ρ` through rational approximations:
/// [`approx`](Self::approx) must satisfy `|approx(σ, n) − ρ(σ)| ≤ 2^{-n}`.
pub trait PreMeasure: Send + Sync {
    /// Stable identifier.
    fn id(&self) -> &str;

    /// An approximation of `ρ(σ)` to within `2^{-precision}`.
    fn approx(&self, sigma: &BitString, precision: u64) -> Rational;
}

/// The Bernoulli pre-measure with parameter `p`: each flip is `1` with
/// probability `p` independently, so `ρ(σ) = p^k (1−p)^{|σ|−k}` where `k`
/// counts the `1` flips. For rational `p` the value is exact, so the
/// approximation ignores its precision argument.
#[derive(Clone, Debug)]
pub struct Bernoulli {
    p: Rational,
    id: String,
}

impl Bernoulli {
    /// A Bernoulli pre-measure with success parameter `p ∈ [0, 1]`.
    pub fn new(p: Rational) -> Result<Self> {
        if p.is_negative() || p > Rational::one() {
            return Err(Error::Domain(format!(
                "Bernoulli parameter must lie in [0, 1], got {p}"
            )));
        }
        let id = format!("bernoulli({p})");
        Ok(Bernoulli { p, id })
    }

    /// The fair coin, `p = 1/2`.
    pub fn fair() -> Self {
        Bernoulli::new(Rational::new(1, 2).expect("constant")).expect("constant")
    }

    /// Exact cylinder measure of one string.
    pub fn exact(&self, sigma: &BitString) -> Rational {
        let k = sigma.ones() as i32;
        let rest = (sigma.len() as i32) - k;
        self.p.pow(k) * (Rational::one() - &self.p).pow(rest)
    }
}

impl PreMeasure for Bernoulli {
    fn id(&self) -> &str {
        &self.id
    }

    fn approx(&self, sigma: &BitString, _precision: u64) -> Rational {
        self.exact(sigma)
    }
}

/// Approximates the measure of a disjoint union of cylinders to within
/// `2^{-precision}`: each of the `k` strings is approximated to precision
/// `precision + ⌈log₂ k⌉`, so the summed error stays below the target.
pub fn cylinder_mass(
    pre_measure: &dyn PreMeasure,
    strings: &[BitString],
    precision: u64,
) -> Rational {
    let k = strings.len() as u64;
    let boost = if k <= 1 { 0 } else { 64 - (k - 1).leading_zeros() as u64 };
    let per_string = precision + boost;
    strings
        .iter()
        .map(|s| pre_measure.approx(s, per_string))
        .fold(Rational::zero(), |acc, m| acc + m)
}

/// The smallest precision `n₀` with `2^{-n₀} < p − 1/2`, as required by
/// the multi-valued extraction loop.
pub fn n0_for_margin(p: &Rational) -> Result<u64> {
    let half = Rational::new(1, 2)?;
    if *p <= half || *p > Rational::one() {
        return Err(Error::Domain(format!(
            "success probability must lie in (1/2, 1], got {p}"
        )));
    }
    let margin = p - half;
    let mut n0 = 1u64;
    while dyadic(n0) >= margin {
        n0 += 1;
        if n0 > 4096 {
            return Err(Error::Domain(
                "success margin is too small to derive a usable precision".into(),
            ));
        }
    }
    Ok(n0)
}

/// Output of an extraction loop: the de-randomized output and the stage
/// (flip-prefix length) at which the loop fired.
#[derive(Clone, PartialEq, Debug)]
pub struct Derandomized<Y> {
    /// The extracted output.
    pub output: Y,
    /// The stage at which it was extracted.
    pub stage: u64,
}

/// One stage of simulation: outputs per lexicographic prefix, with prefix
/// consistency checked against the previous stage.
fn run_stage<Y, M>(
    machine: &mut M,
    t: u64,
    prev: Option<&[Option<Y>]>,
) -> RunResult<(Vec<BitString>, Vec<Option<Y>>)>
where
    Y: Clone + PartialEq,
    M: FnMut(&BitString) -> RunResult<Option<Y>>,
{
    let strings = BitString::all_of_length(t)?;
    let mut results = Vec::with_capacity(strings.len());
    for (m, sigma) in strings.iter().enumerate() {
        let out = machine(sigma)?;
        if let Some(prev) = prev {
            if let Some(parent) = &prev[m >> 1] {
                let consistent = matches!(&out, Some(y) if y == parent);
                if !consistent {
                    return Err(RunInterrupt::Fault(Error::Contract(
                        "prefix-inconsistent subject: a halted run changed its output when \
                         handed more flips"
                            .into(),
                    )));
                }
            }
        }
        results.push(out);
    }
    Ok((strings, results))
}

/// Groups halted prefixes by output, preserving first-seen order so the
/// extraction is deterministic.
fn group_outputs<Y: Clone + PartialEq>(
    strings: &[BitString],
    results: &[Option<Y>],
) -> Vec<(Y, Vec<BitString>)> {
    let mut groups: Vec<(Y, Vec<BitString>)> = Vec::new();
    for (sigma, out) in strings.iter().zip(results) {
        if let Some(y) = out {
            match groups.iter_mut().find(|(g, _)| g == y) {
                Some((_, members)) => members.push(sigma.clone()),
                None => groups.push((y.clone(), vec![sigma.clone()])),
            }
        }
    }
    groups
}

/// Majority-vote extraction for subjects computing a single-valued
/// function with success probability strictly above `1/2`.
///
/// The subject is its run function: handed a finite flip prefix, it
/// returns its output if it halts using only those flips and `None` if it
/// needs more. Stage `t` simulates all `2^t` prefixes and fires on the
/// first output whose cylinder mass at approximation precision `t`
/// strictly exceeds `1/2 + 2^{-t}`; such an output is the majority output.
///
/// Fails with a budget error if no stage up to `max_stage` fires — for a
/// subject meeting the probability premise, some stage always does.
pub fn derandomize_single_valued<Y, M>(
    mut machine: M,
    pre_measure: &dyn PreMeasure,
    max_stage: u64,
) -> RunResult<Derandomized<Y>>
where
    Y: Clone + PartialEq,
    M: FnMut(&BitString) -> RunResult<Option<Y>>,
{
    let half = Rational::new(1, 2)?;
    let mut prev: Option<Vec<Option<Y>>> = None;
    for t in 1..=max_stage {
        let (strings, results) = run_stage(&mut machine, t, prev.as_deref())?;
        let threshold = &half + dyadic(t);
        for (y, members) in group_outputs(&strings, &results) {
            if cylinder_mass(pre_measure, &members, t) > threshold {
                return Ok(Derandomized { output: y, stage: t });
            }
        }
        prev = Some(results);
    }
    Err(RunInterrupt::Fault(Error::BudgetExhausted(format!(
        "no majority output emerged within {max_stage} stages"
    ))))
}

/// Majority-vote extraction for always-halting subjects that land in a
/// possibly multi-valued solution set with probability at least
/// `success_probability > 1/2`.
///
/// Uses the fixed approximation precision `n₀` from [`n0_for_margin`].
/// Stage `t` fires on the first output whose approximate cylinder mass
/// strictly exceeds `1/2`; if instead every length-`t` prefix has halted,
/// the loop returns `fallback`, which must be a valid output whenever the
/// solution set has more than one element. An always-halting subject
/// reaches one of the two exits.
pub fn derandomize_multi_valued<Y, M>(
    mut machine: M,
    pre_measure: &dyn PreMeasure,
    success_probability: &Rational,
    fallback: Y,
    max_stage: u64,
) -> RunResult<Derandomized<Y>>
where
    Y: Clone + PartialEq,
    M: FnMut(&BitString) -> RunResult<Option<Y>>,
{
    let n0 = n0_for_margin(success_probability)?;
    let half = Rational::new(1, 2)?;
    let mut prev: Option<Vec<Option<Y>>> = None;
    for t in 1..=max_stage {
        let (strings, results) = run_stage(&mut machine, t, prev.as_deref())?;
        for (y, members) in group_outputs(&strings, &results) {
            if cylinder_mass(pre_measure, &members, n0) > half {
                return Ok(Derandomized { output: y, stage: t });
            }
        }
        if results.iter().all(Option::is_some) {
            return Ok(Derandomized {
                output: fallback,
                stage: t,
            });
        }
        prev = Some(results);
    }
    Err(RunInterrupt::Fault(Error::BudgetExhausted(format!(
        "subject did not halt on all prefixes within {max_stage} stages"
    ))))
}

/// A solver whose answer may consult coin flips. Handed a finite flip
/// prefix, it answers if the flips suffice and reports `None` otherwise;
/// honoring prefix consistency is part of the contract.
pub trait RandomizedSolver: Send + Sync {
    /// Stable identifier.
    fn id(&self) -> &str;

    /// One run on a finite flip prefix.
    fn solve_with_coins(
        &self,
        header: &ProblemHeader,
        coins: &BitString,
        oracle: &mut dyn CoordOracle,
    ) -> RunResult<Option<QVec>>;
}

/// A checker whose flag may consult coin flips; same contract as
/// [`RandomizedSolver`].
pub trait RandomizedChecker: Send + Sync {
    /// Stable identifier.
    fn id(&self) -> &str;

    /// One run on a finite flip prefix.
    fn check_with_coins(
        &self,
        header: &ProblemHeader,
        answer: &QVec,
        coins: &BitString,
        oracle: &mut dyn CoordOracle,
    ) -> RunResult<Option<u8>>;
}

/// Deterministic solver obtained from a randomized one by single-valued
/// majority extraction. Its id is the inner id prefixed with `d`.
pub struct DerandomizedSolver {
    inner: Arc<dyn RandomizedSolver>,
    pre_measure: Arc<dyn PreMeasure>,
    max_stage: u64,
    id: String,
}

impl DerandomizedSolver {
    /// Wraps `inner`, drawing flips from `pre_measure`.
    pub fn new(
        inner: Arc<dyn RandomizedSolver>,
        pre_measure: Arc<dyn PreMeasure>,
        max_stage: u64,
    ) -> Self {
        let id = format!("d{}", inner.id());
        DerandomizedSolver {
            inner,
            pre_measure,
            max_stage,
            id,
        }
    }
}

impl SolverProgram for DerandomizedSolver {
    fn id(&self) -> &str {
        &self.id
    }

    fn solve(&self, header: &ProblemHeader, oracle: &mut dyn CoordOracle) -> RunResult<QVec> {
        let machine = |coins: &BitString| self.inner.solve_with_coins(header, coins, oracle);
        let d = derandomize_single_valued(machine, &*self.pre_measure, self.max_stage)?;
        Ok(d.output)
    }
}

/// Deterministic checker obtained from a randomized one by multi-valued
/// majority extraction (checkers always halt, and correctness of a flag
/// is exactly the kind of guarantee the `p`-margin premise describes).
/// Its id is the inner id prefixed with `d`.
pub struct DerandomizedChecker {
    inner: Arc<dyn RandomizedChecker>,
    pre_measure: Arc<dyn PreMeasure>,
    success_probability: Rational,
    fallback_flag: u8,
    max_stage: u64,
    id: String,
}

impl DerandomizedChecker {
    /// Wraps `inner`, which must be right with probability at least
    /// `success_probability > 1/2`; `fallback_flag` is returned when the
    /// extraction loop exhausts all halting prefixes without a majority.
    pub fn new(
        inner: Arc<dyn RandomizedChecker>,
        pre_measure: Arc<dyn PreMeasure>,
        success_probability: Rational,
        fallback_flag: u8,
        max_stage: u64,
    ) -> Result<Self> {
        n0_for_margin(&success_probability)?;
        if fallback_flag > 1 {
            return Err(Error::Domain(format!(
                "checker flag must be 0 or 1, got {fallback_flag}"
            )));
        }
        let id = format!("d{}", inner.id());
        Ok(DerandomizedChecker {
            inner,
            pre_measure,
            success_probability,
            fallback_flag,
            max_stage,
            id,
        })
    }
}

impl CheckerProgram for DerandomizedChecker {
    fn id(&self) -> &str {
        &self.id
    }

    fn check(
        &self,
        header: &ProblemHeader,
        answer: &QVec,
        oracle: &mut dyn CoordOracle,
    ) -> RunResult<u8> {
        let machine =
            |coins: &BitString| self.inner.check_with_coins(header, answer, coins, oracle);
        let d = derandomize_multi_valued(
            machine,
            &*self.pre_measure,
            &self.success_probability,
            self.fallback_flag,
            self.max_stage,
        )?;
        Ok(d.output)
    }
}

/// A randomized solver that flips two coins and answers the second anchor
/// when at least one came up heads (probability `3/4` under the fair
/// coin), the first anchor otherwise. It never queries the input.
#[derive(Clone, Copy, Debug)]
pub struct CoinAnchorSolver;

impl RandomizedSolver for CoinAnchorSolver {
    fn id(&self) -> &str {
        "ory2"
    }

    fn solve_with_coins(
        &self,
        header: &ProblemHeader,
        coins: &BitString,
        _oracle: &mut dyn CoordOracle,
    ) -> RunResult<Option<QVec>> {
        let (Some(b0), Some(b1)) = (coins.bit(0), coins.bit(1)) else {
            return Ok(None);
        };
        let anchors = anchor_sets(&header.family, &header.dims)?;
        Ok(Some(if b0 || b1 { anchors.y2 } else { anchors.y1 }))
    }
}

/// A randomized checker that flips two coins: when at least one comes up
/// heads it audits the answer honestly (gap-detection loop, then an exact
/// distance check), and with probability `1/4` it rejects unconditionally
/// instead. On transparent inputs it is right whenever it audits, i.e.
/// with probability at least `3/4` under the fair coin.
#[derive(Clone, Copy, Debug)]
pub struct CoinAuditChecker {
    budget: u64,
}

impl CoinAuditChecker {
    /// An audit-or-reject checker with the given gap-detection budget.
    pub fn new(budget: u64) -> Self {
        CoinAuditChecker { budget }
    }
}

impl RandomizedChecker for CoinAuditChecker {
    fn id(&self) -> &str {
        "coin"
    }

    fn check_with_coins(
        &self,
        header: &ProblemHeader,
        answer: &QVec,
        coins: &BitString,
        oracle: &mut dyn CoordOracle,
    ) -> RunResult<Option<u8>> {
        let (Some(b0), Some(b1)) = (coins.bit(0), coins.bit(1)) else {
            return Ok(None);
        };
        if !(b0 || b1) {
            return Ok(Some(0));
        }
        let kappa = &header.family.kappa;
        let anchors = anchor_sets(&header.family, &header.dims)?;
        let ok = match gamma_star(oracle, header, self.budget)? {
            GammaOutcome::Answer(y) => dist_point(answer, &y, header.family.p)?.le(kappa),
            GammaOutcome::NotYet => {
                dist_segment(answer, &anchors.y1, &anchors.y2, header.family.p)?
                    .cmp
                    .le(kappa)
            }
        };
        Ok(Some(u8::from(ok)))
    }
}
