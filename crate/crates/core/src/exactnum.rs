//! Exact rational scalars, vectors, and p-norm distance comparisons.
//!
//! Key types:
//!
//! * [`Rational`] — an arbitrary-precision rational in canonical form
//!   (positive denominator, reduced), serialized everywhere as `"num/den"`.
//! * [`QVec`] — a fixed-dimension vector of rationals.
//! * [`PNorm`] — a norm exponent: a finite integer `p ≥ 1` or infinity.
//! * [`DistCmp`] — a comparison handle for a distance value. For finite `p`
//!   the distance itself is usually irrational, so the handle stores the
//!   exact p-th power of the distance and answers `≤ r` / `> r` queries by
//!   comparing against `r^p`. No roots are ever taken.
//! * [`DistanceWitness`] — the serializable form of a comparison handle,
//!   embedded in certificates so claims re-verify from stored data alone.
//!
//! Point distances ([`dist_point`]) support every `p`. Segment distances
//! ([`dist_segment`]) are exact minimizations over the segment parameter and
//! support `p ∈ {1, 2, ∞}`: the Euclidean case minimizes a quadratic with a
//! clamped projection, the other two minimize a convex piecewise-linear
//! envelope by enumerating its candidate vertices.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Index, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Rational
// ---------------------------------------------------------------------------

/// An exact rational number in canonical form.
///
/// Canonical means the denominator is positive and the fraction is fully
/// reduced; the zero value is `0/1`. Construction always canonicalizes, so
/// two equal rationals are structurally identical. The display form is
/// always `"num/den"`, including for integers (`"3/1"`) and zero (`"0/1"`).
///
/// ```
/// use gauntlet_core::exactnum::Rational;
///
/// let half = Rational::new(4, 8).unwrap();
/// assert_eq!(half.to_string(), "1/2");
/// assert_eq!(&half + &half, Rational::one());
/// ```
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

impl Rational {
    /// Builds `num/den`, canonicalizing. Fails if `den == 0`.
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Domain("rational with zero denominator".into()));
        }
        Ok(Rational(BigRational::new(BigInt::from(num), BigInt::from(den))))
    }

    /// Builds from big integers, canonicalizing. Fails if `den` is zero.
    pub fn from_big(num: BigInt, den: BigInt) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::Domain("rational with zero denominator".into()));
        }
        Ok(Rational(BigRational::new(num, den)))
    }

    /// The integer `n` as a rational.
    pub fn from_int(n: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// `0/1`.
    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    /// `1/1`.
    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    /// Numerator of the canonical form (sign lives here).
    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    /// Denominator of the canonical form (always positive).
    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    /// Absolute value.
    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    /// Integer power; negative exponents invert. Panics on `0^negative`.
    pub fn pow(&self, exp: i32) -> Self {
        Rational(self.0.pow(exp))
    }

    /// True for `0/1`.
    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// True for strictly negative values.
    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// True for strictly positive values.
    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    /// Division that fails on a zero divisor instead of panicking.
    pub fn checked_div(&self, rhs: &Rational) -> Result<Self> {
        if rhs.is_zero() {
            return Err(Error::Domain("division by zero".into()));
        }
        Ok(Rational(&self.0 / &rhs.0))
    }

    /// Parses the strict canonical form `"num/den"` and rejects anything
    /// that would not serialize back to the identical string: `"2/4"`,
    /// `"1/-2"`, `"+1/2"`, `"007/1"`, and plain integers are all errors.
    ///
    /// The wire protocol and every stored artifact use this parser, so a
    /// non-canonical rational anywhere is a hard protocol error rather than
    /// a silent normalization.
    pub fn parse_canonical(s: &str) -> Result<Self> {
        let r: Rational = s.parse()?;
        if r.to_string() != s {
            return Err(Error::Parse(format!(
                "non-canonical rational {s:?} (canonical form is {r})"
            )));
        }
        Ok(r)
    }

    /// Lossy conversion for human-facing diagnostics only. Never feed the
    /// result back into any computation.
    pub fn approx_f64(&self) -> f64 {
        let num = self.0.numer().to_string().parse::<f64>().unwrap_or(f64::NAN);
        let den = self.0.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
        num / den
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Rational {
    type Err = Error;

    /// Lenient parse: `"num/den"` or a bare integer. Normalizes to
    /// canonical form; use [`Rational::parse_canonical`] to reject
    /// non-canonical spellings.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |_| Error::Parse(format!("not a rational: {s:?}"));
        match s.split_once('/') {
            Some((num, den)) => {
                let num = BigInt::from_str(num).map_err(bad)?;
                let den = BigInt::from_str(den).map_err(bad)?;
                Rational::from_big(num, den)
            }
            None => Ok(Rational(BigRational::from_integer(
                BigInt::from_str(s).map_err(bad)?,
            ))),
        }
    }
}

macro_rules! rational_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
    };
}

rational_binop!(Add, add);
rational_binop!(Sub, sub);
rational_binop!(Mul, mul);
// Division panics on a zero divisor, matching integer division; use
// `checked_div` where the divisor is data-dependent.
rational_binop!(Div, div);

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Rational::parse_canonical(&s).map_err(serde::de::Error::custom)
    }
}

/// `2^{-n}`, the dyadic precision bound used throughout coordinate queries.
pub fn dyadic(n: u64) -> Rational {
    let exp = i32::try_from(n).expect("dyadic exponent far beyond practical range");
    Rational::from_int(2).pow(-exp)
}

// ---------------------------------------------------------------------------
// PNorm
// ---------------------------------------------------------------------------

/// A norm exponent: finite `p ≥ 1` or `∞`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum PNorm {
    /// Finite exponent, at least one.
    Finite(u32),
    /// The max norm.
    Infinity,
}

impl PNorm {
    /// Validated constructor for finite exponents.
    pub fn finite(p: u32) -> Result<Self> {
        if p < 1 {
            return Err(Error::Domain("norm exponent must be at least 1".into()));
        }
        Ok(PNorm::Finite(p))
    }
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PNorm::Finite(p) => write!(f, "{p}"),
            PNorm::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for PNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "inf" {
            return Ok(PNorm::Infinity);
        }
        let p: u32 = s
            .parse()
            .map_err(|_| Error::Parse(format!("not a norm exponent: {s:?}")))?;
        PNorm::finite(p)
    }
}

impl Serialize for PNorm {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PNorm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// QVec
// ---------------------------------------------------------------------------

/// A fixed-dimension vector of rationals.
///
/// Entries are 0-indexed at this API; modules that expose 1-indexed
/// coordinate numbers (the program-input view) translate at their boundary.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QVec(Vec<Rational>);

impl QVec {
    /// Wraps the given entries.
    pub fn from_entries(entries: Vec<Rational>) -> Self {
        QVec(entries)
    }

    /// The zero vector of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        QVec(vec![Rational::zero(); dim])
    }

    /// `scale · e_axis` in the given dimension (`axis` is 0-indexed).
    pub fn axis_scaled(dim: usize, axis: usize, scale: Rational) -> Result<Self> {
        if axis >= dim {
            return Err(Error::Domain(format!(
                "axis {axis} out of range for dimension {dim}"
            )));
        }
        let mut v = QVec::zeros(dim);
        v.0[axis] = scale;
        Ok(v)
    }

    /// Number of entries.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Borrow all entries.
    pub fn entries(&self) -> &[Rational] {
        &self.0
    }

    /// Componentwise sum with a dimension check.
    pub fn try_add(&self, rhs: &QVec) -> Result<QVec> {
        self.zip_with(rhs, |a, b| a + b)
    }

    /// Componentwise difference with a dimension check.
    pub fn try_sub(&self, rhs: &QVec) -> Result<QVec> {
        self.zip_with(rhs, |a, b| a - b)
    }

    /// Scales every entry by `c`.
    pub fn scaled(&self, c: &Rational) -> QVec {
        QVec(self.0.iter().map(|x| x * c).collect())
    }

    /// The midpoint `(a + b) / 2`.
    pub fn midpoint(a: &QVec, b: &QVec) -> Result<QVec> {
        let half = Rational::new(1, 2).expect("constant");
        Ok(a.try_add(b)?.scaled(&half))
    }

    fn zip_with(&self, rhs: &QVec, f: impl Fn(&Rational, &Rational) -> Rational) -> Result<QVec> {
        if self.dim() != rhs.dim() {
            return Err(Error::Domain(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                rhs.dim()
            )));
        }
        Ok(QVec(
            self.0.iter().zip(rhs.0.iter()).map(|(a, b)| f(a, b)).collect(),
        ))
    }
}

impl Index<usize> for QVec {
    type Output = Rational;
    fn index(&self, i: usize) -> &Rational {
        &self.0[i]
    }
}

impl fmt::Display for QVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for QVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for QVec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QVec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        Ok(QVec(Vec::<Rational>::deserialize(deserializer)?))
    }
}

// ---------------------------------------------------------------------------
// Distance comparison handles
// ---------------------------------------------------------------------------

/// Exact comparison handle for a distance value.
///
/// The handle never stores the distance itself when that would require a
/// root. Queries against a rational threshold `r` are decided exactly:
/// for the stored p-th power `v = dist^p`, `dist ≤ r` holds iff `r ≥ 0` and
/// `v ≤ r^p`.
#[derive(Clone, Debug)]
pub struct DistCmp {
    /// Power to which the stored value is raised (1 when the distance is
    /// itself rational, `p` otherwise).
    power: u32,
    /// `dist^power`, exact and nonnegative.
    value: Rational,
    /// The norm this distance was measured in (carried for witnesses).
    p: PNorm,
}

impl DistCmp {
    fn exact(p: PNorm, value: Rational) -> Self {
        DistCmp { power: 1, value, p }
    }

    fn powered(p: PNorm, power: u32, value: Rational) -> Self {
        DistCmp { power, value, p }
    }

    /// `dist ≤ r`, exactly.
    pub fn le(&self, r: &Rational) -> bool {
        if r.is_negative() {
            return false;
        }
        self.value <= r.pow(self.power as i32)
    }

    /// `dist < r`, exactly.
    pub fn lt(&self, r: &Rational) -> bool {
        if r.is_negative() || r.is_zero() {
            return false;
        }
        self.value < r.pow(self.power as i32)
    }

    /// `dist > r`, exactly.
    pub fn gt(&self, r: &Rational) -> bool {
        !self.le(r)
    }

    /// `dist ≥ r`, exactly.
    pub fn ge(&self, r: &Rational) -> bool {
        !self.lt(r)
    }

    /// The exact distance, available only when no root was avoided
    /// (`power == 1`).
    pub fn exact_value(&self) -> Option<&Rational> {
        (self.power == 1).then_some(&self.value)
    }

    /// Serializable record of this handle for certificates.
    pub fn witness(&self) -> DistanceWitness {
        DistanceWitness {
            p: self.p,
            power: self.power,
            value: self.value.clone(),
        }
    }
}

/// Serializable distance claim: `value = dist^power` measured in norm `p`.
///
/// Certificates store one of these next to the vectors it was computed
/// from; re-verification recomputes the handle from the vectors and demands
/// an identical record before trusting any threshold comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceWitness {
    /// Norm exponent the distance was measured in.
    pub p: PNorm,
    /// Power applied to both sides of every comparison.
    pub power: u32,
    /// `dist^power`, exact.
    pub value: Rational,
}

impl DistanceWitness {
    /// `dist > r`, exactly.
    pub fn exceeds(&self, r: &Rational) -> bool {
        if r.is_negative() {
            return true;
        }
        self.value > r.pow(self.power as i32)
    }

    /// `dist ≤ r`, exactly.
    pub fn within(&self, r: &Rational) -> bool {
        !self.exceeds(r)
    }
}

/// Exact distance between two points of equal dimension.
///
/// Supports every [`PNorm`]. For finite `p` the returned handle stores
/// `Σ|xᵢ−yᵢ|^p`; for `p = ∞` it stores the max coordinate gap directly.
pub fn dist_point(x: &QVec, y: &QVec, p: PNorm) -> Result<DistCmp> {
    if x.dim() != y.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    let diffs = x.entries().iter().zip(y.entries()).map(|(a, b)| (a - b).abs());
    match p {
        PNorm::Infinity => {
            let mut max = Rational::zero();
            for d in diffs {
                if d > max {
                    max = d;
                }
            }
            Ok(DistCmp::exact(p, max))
        }
        PNorm::Finite(k) => {
            let mut sum = Rational::zero();
            for d in diffs {
                sum = sum + d.pow(k as i32);
            }
            Ok(DistCmp::powered(p, k, sum))
        }
    }
}

/// Result of an exact point-to-segment distance minimization.
#[derive(Clone, Debug)]
pub struct SegDist {
    /// Comparison handle for the minimal distance.
    pub cmp: DistCmp,
    /// A segment parameter attaining the minimum: the closest point is
    /// `t·a + (1−t)·b`. When several parameters attain it, the smallest
    /// candidate is returned, so the witness is deterministic.
    pub t_star: Rational,
}

/// Exact distance from `x` to the segment `{t·a + (1−t)·b : t ∈ [0,1]}`.
///
/// Supported norms: `p ∈ {1, 2, ∞}`.
///
/// * `p = 2`: the squared distance is a quadratic in `t`; the minimizer is
///   the clamped projection and the handle stores the minimal *squared*
///   distance.
/// * `p ∈ {1, ∞}`: the distance is a convex piecewise-linear function of
///   `t`; the minimum over `[0,1]` is attained at an interval endpoint, a
///   kink, or a crossing of two active coordinate lines. All candidates
///   are enumerated and the exact minimum is taken.
pub fn dist_segment(x: &QVec, a: &QVec, b: &QVec, p: PNorm) -> Result<SegDist> {
    if x.dim() != a.dim() || x.dim() != b.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {} vs {}",
            x.dim(),
            a.dim(),
            b.dim()
        )));
    }
    // Offsets relative to endpoint b: the point on the segment at parameter
    // t is b + t·w, and the coordinate gaps are d_i − t·w_i.
    let d = x.try_sub(b)?;
    let w = a.try_sub(b)?;
    match p {
        PNorm::Finite(2) => Ok(seg_dist_l2(&d, &w)),
        PNorm::Finite(1) => Ok(seg_dist_piecewise(&d, &w, p)),
        PNorm::Infinity => Ok(seg_dist_piecewise(&d, &w, p)),
        other => Err(Error::Domain(format!(
            "segment distance supports p in {{1, 2, inf}}, got {other}"
        ))),
    }
}

/// Euclidean case: minimize `Σ (d_i − t·w_i)²` over `t ∈ [0,1]` with the
/// clamped projection `t* = clamp(⟨d,w⟩ / ⟨w,w⟩)`.
fn seg_dist_l2(d: &QVec, w: &QVec) -> SegDist {
    let dot =
        |u: &QVec, v: &QVec| -> Rational {
            u.entries()
                .iter()
                .zip(v.entries())
                .fold(Rational::zero(), |acc, (a, b)| acc + a * b)
        };
    let ww = dot(w, w);
    let t_star = if ww.is_zero() {
        // Degenerate segment: both endpoints coincide.
        Rational::zero()
    } else {
        clamp01(dot(d, w).checked_div(&ww).expect("nonzero checked above"))
    };
    let mut min_sq = Rational::zero();
    for (di, wi) in d.entries().iter().zip(w.entries()) {
        let gap = di - &(wi * &t_star);
        min_sq = min_sq + gap.pow(2);
    }
    SegDist {
        cmp: DistCmp::powered(PNorm::Finite(2), 2, min_sq),
        t_star,
    }
}

/// `p ∈ {1, ∞}` case: the objective is a maximum (or sum) of absolute
/// linear functions `|d_i − t·w_i|`, hence convex piecewise linear in `t`.
/// Candidate minimizers: 0, 1, and every crossing of two of the signed
/// lines `±(d_i − t·w_i)` inside (0,1). Kinks are crossings of a line with
/// its own negation, so they are covered.
fn seg_dist_piecewise(d: &QVec, w: &QVec, p: PNorm) -> SegDist {
    // Signed lines as (alpha, beta) meaning alpha + beta·t.
    let mut lines: Vec<(Rational, Rational)> = Vec::with_capacity(2 * d.dim());
    for (di, wi) in d.entries().iter().zip(w.entries()) {
        lines.push((di.clone(), -wi));
        lines.push((-di, wi.clone()));
    }

    let mut candidates = vec![Rational::zero(), Rational::one()];
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let (ref a1, ref b1) = lines[i];
            let (ref a2, ref b2) = lines[j];
            if b1 == b2 {
                continue; // parallel
            }
            let t = (a2 - a1).checked_div(&(b1 - b2)).expect("slopes differ");
            if t.is_positive() && t < Rational::one() {
                candidates.push(t);
            }
        }
    }
    candidates.sort();
    candidates.dedup();

    let eval = |t: &Rational| -> Rational {
        let gaps = d
            .entries()
            .iter()
            .zip(w.entries())
            .map(|(di, wi)| (di - &(wi * t)).abs());
        match p {
            PNorm::Infinity => {
                let mut max = Rational::zero();
                for g in gaps {
                    if g > max {
                        max = g;
                    }
                }
                max
            }
            _ => gaps.fold(Rational::zero(), |acc, g| acc + g),
        }
    };

    let mut best_t = candidates[0].clone();
    let mut best = eval(&best_t);
    for t in &candidates[1..] {
        let v = eval(t);
        if v < best {
            best = v;
            best_t = t.clone();
        }
    }
    SegDist {
        cmp: DistCmp::exact(p, best),
        t_star: best_t,
    }
}

fn clamp01(t: Rational) -> Rational {
    if t.is_negative() {
        Rational::zero()
    } else if t > Rational::one() {
        Rational::one()
    } else {
        t
    }
}

/// Total order helper for sorting rationals stored elsewhere.
pub fn cmp_rationals(a: &Rational, b: &Rational) -> Ordering {
    a.cmp(b)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
