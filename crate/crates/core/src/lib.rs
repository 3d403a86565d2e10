//! Exact-arithmetic stress bench for numerical solvers whose inputs arrive
//! as approximation programs.
//!
//! The crate builds a small family of convex optimization problems (linear
//! programming, basis pursuit, LASSO) over exact rationals, presents their
//! data to solvers as *programs* that emit dyadic approximations on demand,
//! and provides three capabilities on top:
//!
//! * an attack engine ([`adversary`]) that, for any total deterministic
//!   solver — optionally paired with a hallucination checker — manufactures
//!   a concrete input on which the subject is provably wrong at desk scale,
//!   together with an exact, independently re-checkable failure certificate;
//! * a trustworthy solver ([`trustworthy`]) that answers exactly when the
//!   input is provably single-valued at the examined precision and says
//!   "I don't know" otherwise, plus combinators relating abstention to
//!   computability of the underlying decision;
//! * a de-randomization pass ([`randomized`]) that turns probabilistic
//!   subjects with a success-probability margin into deterministic ones, so
//!   the attack engine applies to them as well.
//!
//! # Design rules
//!
//! * **No floats in the core.** Every quantity is an exact rational; p-norm
//!   distances are compared through their p-th powers, never through roots.
//!   Floating point may appear only in CLI diagnostics.
//! * **Determinism.** Same inputs, same bytes out. Certificates carry no
//!   timestamps, no absolute paths, and no iteration-order artifacts.
//! * **Certificates re-verify from scratch.** A stored certificate contains
//!   everything needed to recompute the claimed failure exactly.
//!
//! # Module map
//!
//! * [`exactnum`] — rational scalars/vectors, p-norm comparison handles,
//!   exact point and segment distances.
//! * [`problems`] — the problem family: instances, closed-form solution
//!   sets, anchor geometry, objective evaluation, a brute-force grid oracle.
//! * [`markov`] — inputs as coordinate-approximation programs: descriptors,
//!   coordinate evaluation, the fuel-metered self-referential run engine.
//! * [`adversary`] — built-in subjects, the diagonal attack on solvers and
//!   on exit-flag checkers, oracle stripping, failure certificates.
//! * [`trustworthy`] — the abstaining solver tower and its combinators.
//! * [`randomized`] — pre-measures, probabilistic machines, and the two
//!   de-randomization constructions.

pub mod adversary;
pub mod exactnum;
pub mod markov;
pub mod problems;
pub mod randomized;
pub mod trustworthy;

/// Crate-wide error type.
///
/// Variants mirror the failure kinds surfaced at the public API: bad
/// parameters, inconsistent configuration, inputs outside an operation's
/// domain, broken subject contracts, and verification failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its documented domain (dimension mismatch,
    /// norm exponent below one, instance data outside the admissible box).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration is internally inconsistent (for example, family
    /// parameters that violate the required anchor separation).
    #[error("configuration error: {0}")]
    Config(String),

    /// The operation does not apply to this input (for example, verdict
    /// extraction on a non-diagonal descriptor).
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// A subject or combinator broke a documented behavioral contract
    /// (non-monotone indicator, prefix-inconsistent machine, fuel-contract
    /// violation).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A subject produced different behavior on an identical replay.
    #[error("determinism violation: {0}")]
    Determinism(String),

    /// A wire-protocol exchange with an external subject was malformed.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// An iteration cap was reached before the operation could conclude.
    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),

    /// Text could not be parsed as the expected canonical record.
    #[error("parse error: {0}")]
    Parse(String),

    /// A certificate failed its independent re-check.
    #[error("verification failed: {0}")]
    Verification(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
