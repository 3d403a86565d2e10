//! The problem family: exact instances, closed-form solution sets, anchor
//! geometry, objective evaluation, and a brute-force grid oracle.
//!
//! Every instance lives on a two-parameter slice. The data matrix `U` has
//! first row `(u1, u2, 0, …, 0)`; row `i ∈ {2, …, N2}` is all zeros except
//! a `1` in column `i+1` (which is why `N1 ≥ N2+1` is required). The right
//! hand side is `b = 2κ·e1`. The admissible parameter box is
//!
//! ```text
//! L_θ = { (u1, u2) ∈ [θ, 1/2]² : at most one uᵢ ≠ 1/2 } ∩ ℚ²,  θ ∈ [1/8, 1/4].
//! ```
//!
//! Because at most one parameter moves off `1/2`, `max(u1, u2) = 1/2` on
//! the whole box, and each family's solution set is always one of exactly
//! three objects: the anchor point `y1` (first axis), the anchor point `y2`
//! (second axis), or — in the degenerate case `u1 = u2 = 1/2` — the full
//! segment between them. Solvers that answer are therefore judged against
//! exact anchor geometry, never against a tolerance cloud.
//!
//! Key operations:
//!
//! * [`build_instance`] — validated construction.
//! * [`solve_closed_form`] — the exact solution set.
//! * [`anchor_sets`] — `y1`, `y2`, and the degenerate segment `S0`.
//! * [`iota_anchor`] — the parameter schedules `ι⁰`, `ι¹_t`, `ι²_t` feeding
//!   the program-input machinery.
//! * [`objective_value`] — exact objective and feasibility of any vector.
//! * [`brute_force_oracle`] — an independent grid minimizer used to verify
//!   the closed forms; it shares no code with them.
//! * [`validate_separation`] — the exact anchor-separation gate
//!   `dist_p(y1, y2) > 2κ` that makes failure certificates unambiguous.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::exactnum::{dist_point, dist_segment, DistCmp, PNorm, QVec, Rational};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

/// Which objective the family minimizes, with its family-specific constant.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FamilyKind {
    /// `min ⟨x, 1⟩  s.t.  Ux = b, x ≥ 0`.
    Lp,
    /// `min ‖x‖₁  s.t.  ‖Ux − b‖₂ ≤ η`.
    Bp {
        /// Noise radius `η`, `0 < η ≤ 2κ`.
        eta: Rational,
    },
    /// `min λ‖x‖₁ + ‖Ux − b‖₂²` (unconstrained).
    Lasso {
        /// Regularization weight `λ`, `0 < λ ≤ 2κ`.
        lambda: Rational,
    },
}

impl FamilyKind {
    /// Short lowercase tag used in records: `lp`, `bp`, `lasso`.
    pub fn tag(&self) -> &'static str {
        match self {
            FamilyKind::Lp => "lp",
            FamilyKind::Bp { .. } => "bp",
            FamilyKind::Lasso { .. } => "lasso",
        }
    }
}

/// A fully parameterized problem family.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Family {
    /// Objective kind plus its constant.
    pub kind: FamilyKind,
    /// Scale constant `κ > 0`; the right hand side is `b = 2κ·e1` and `κ`
    /// is also the judgment radius for answers.
    pub kappa: Rational,
    /// Norm used to judge answers against solution sets.
    pub p: PNorm,
}

/// Default scale constant `κ = 1/10`.
pub fn default_kappa() -> Rational {
    Rational::new(1, 10).expect("constant")
}

/// Default noise radius / regularization weight `1/20`.
pub fn default_eta() -> Rational {
    Rational::new(1, 20).expect("constant")
}

/// Default admissible-box floor `θ = 1/4`.
pub fn default_theta() -> Rational {
    Rational::new(1, 4).expect("constant")
}

impl Family {
    /// Validated constructor; see the field docs for the constraints.
    pub fn new(kind: FamilyKind, kappa: Rational, p: PNorm) -> Result<Self> {
        if !kappa.is_positive() {
            return Err(Error::Domain("kappa must be positive".into()));
        }
        let two_kappa = Rational::from_int(2) * &kappa;
        match &kind {
            FamilyKind::Lp => {}
            FamilyKind::Bp { eta } => {
                if !eta.is_positive() || *eta > two_kappa {
                    return Err(Error::Domain("bp requires 0 < eta <= 2*kappa".into()));
                }
            }
            FamilyKind::Lasso { lambda } => {
                if !lambda.is_positive() || *lambda > two_kappa {
                    return Err(Error::Domain("lasso requires 0 < lambda <= 2*kappa".into()));
                }
            }
        }
        Ok(Family { kind, kappa, p })
    }

    /// The LP family at the default parameters (`κ = 1/10`, max norm).
    pub fn lp_default() -> Family {
        Family::new(FamilyKind::Lp, default_kappa(), PNorm::Infinity).expect("valid defaults")
    }

    /// The basis-pursuit family at the defaults (`η = 1/20`).
    pub fn bp_default() -> Family {
        Family::new(
            FamilyKind::Bp { eta: default_eta() },
            default_kappa(),
            PNorm::Infinity,
        )
        .expect("valid defaults")
    }

    /// The LASSO family at the defaults (`λ = 1/20`).
    pub fn lasso_default() -> Family {
        Family::new(
            FamilyKind::Lasso {
                lambda: default_eta(),
            },
            default_kappa(),
            PNorm::Infinity,
        )
        .expect("valid defaults")
    }

    /// All three families at default parameters.
    pub fn all_defaults() -> Vec<Family> {
        vec![Family::lp_default(), Family::bp_default(), Family::lasso_default()]
    }

    /// The magnitude of the nonzero coordinate of the exact minimizer when
    /// the larger parameter is `umax`:
    ///
    /// * LP: `2κ / umax`
    /// * BP: `(2κ − η) / umax`
    /// * LASSO: `(4·umax·κ − λ) / (2·umax²)`
    pub fn solution_scale(&self, umax: &Rational) -> Result<Rational> {
        if !umax.is_positive() {
            return Err(Error::Domain("umax must be positive".into()));
        }
        let two_kappa = Rational::from_int(2) * &self.kappa;
        match &self.kind {
            FamilyKind::Lp => two_kappa.checked_div(umax),
            FamilyKind::Bp { eta } => (two_kappa - eta).checked_div(umax),
            FamilyKind::Lasso { lambda } => {
                let four_umax_kappa = Rational::from_int(4) * umax * &self.kappa;
                if four_umax_kappa < *lambda {
                    return Err(Error::Domain(
                        "lasso closed form requires umax >= lambda / (4*kappa)".into(),
                    ));
                }
                (four_umax_kappa - lambda)
                    .checked_div(&(Rational::from_int(2) * umax * umax))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Dimensions and parameters
// ---------------------------------------------------------------------------

/// Problem dimensions: `N1` unknowns and `N2` rows.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Dims {
    /// Number of unknowns, `N1 ≥ 2`.
    pub n1: u32,
    /// Number of rows, `1 ≤ N2 ≤ N1 − 1`.
    pub n2: u32,
}

impl Dims {
    /// Validated constructor.
    pub fn new(n1: u32, n2: u32) -> Result<Self> {
        if n1 < 2 {
            return Err(Error::Domain("n1 must be at least 2".into()));
        }
        if n2 < 1 {
            return Err(Error::Domain("n2 must be at least 1".into()));
        }
        if n1 < n2 + 1 {
            return Err(Error::Domain(format!(
                "n1 must be at least n2 + 1 (got n1={n1}, n2={n2})"
            )));
        }
        Ok(Dims { n1, n2 })
    }

    /// Total coordinate count of the program-input view of an instance:
    /// every matrix entry plus every right-hand-side entry,
    /// `k = N2·N1 + N2`.
    pub fn coord_count(&self) -> usize {
        (self.n2 as usize) * (self.n1 as usize) + self.n2 as usize
    }
}

/// The two moving parameters of an instance plus the box floor.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct InstanceParams {
    /// First-row coefficient of `x1`.
    pub u1: Rational,
    /// First-row coefficient of `x2`.
    pub u2: Rational,
    /// Box floor `θ ∈ [1/8, 1/4]`; both parameters live in `[θ, 1/2]`.
    pub theta: Rational,
}

impl InstanceParams {
    /// Validated constructor enforcing membership in the admissible box:
    /// `θ ∈ [1/8, 1/4]`, both parameters in `[θ, 1/2]`, and at most one of
    /// them off `1/2`.
    pub fn new(u1: Rational, u2: Rational, theta: Rational) -> Result<Self> {
        let half = Rational::new(1, 2).expect("constant");
        let th_lo = Rational::new(1, 8).expect("constant");
        let th_hi = Rational::new(1, 4).expect("constant");
        if theta < th_lo || theta > th_hi {
            return Err(Error::Domain(format!(
                "theta must lie in [1/8, 1/4], got {theta}"
            )));
        }
        for (name, u) in [("u1", &u1), ("u2", &u2)] {
            if *u < theta || *u > half {
                return Err(Error::Domain(format!(
                    "{name} must lie in [theta, 1/2] = [{theta}, 1/2], got {u}"
                )));
            }
        }
        if u1 != half && u2 != half {
            return Err(Error::Domain(
                "at most one parameter may differ from 1/2".into(),
            ));
        }
        Ok(InstanceParams { u1, u2, theta })
    }

    /// `max(u1, u2)` — always `1/2` on the admissible box.
    pub fn umax(&self) -> Rational {
        if self.u1 >= self.u2 {
            self.u1.clone()
        } else {
            self.u2.clone()
        }
    }
}

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

/// A fully validated problem instance.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ProblemInstance {
    /// The family this instance belongs to.
    pub family: Family,
    /// Dimensions.
    pub dims: Dims,
    /// The moving parameters.
    pub params: InstanceParams,
}

/// Validated instance construction.
pub fn build_instance(family: Family, dims: Dims, params: InstanceParams) -> Result<ProblemInstance> {
    // Constructors of the pieces already validated themselves; nothing
    // joint remains to check, but route through one place for clarity.
    Ok(ProblemInstance { family, dims, params })
}

impl ProblemInstance {
    /// Matrix entry `U[row][col]` (1-indexed). Row 1 is `(u1, u2, 0, …)`;
    /// row `i ≥ 2` has a single `1` in column `i+1`.
    pub fn u_entry(&self, row: u32, col: u32) -> Result<Rational> {
        if row < 1 || row > self.dims.n2 || col < 1 || col > self.dims.n1 {
            return Err(Error::Domain(format!(
                "matrix index ({row}, {col}) out of range for {}x{}",
                self.dims.n2, self.dims.n1
            )));
        }
        Ok(if row == 1 {
            match col {
                1 => self.params.u1.clone(),
                2 => self.params.u2.clone(),
                _ => Rational::zero(),
            }
        } else if col == row + 1 {
            Rational::one()
        } else {
            Rational::zero()
        })
    }

    /// Right-hand-side entry `b[i]` (1-indexed): `2κ` for `i = 1`, else 0.
    pub fn b_entry(&self, i: u32) -> Result<Rational> {
        if i < 1 || i > self.dims.n2 {
            return Err(Error::Domain(format!(
                "rhs index {i} out of range for {}",
                self.dims.n2
            )));
        }
        Ok(if i == 1 {
            Rational::from_int(2) * &self.family.kappa
        } else {
            Rational::zero()
        })
    }

    /// The program-input coordinate map: coordinates `1..=k` list every
    /// matrix entry in row-major order and then every right-hand-side
    /// entry. In particular coordinate 1 is `u1` and coordinate 2 is `u2`.
    pub fn coord(&self, i: usize) -> Result<Rational> {
        let n1 = self.dims.n1 as usize;
        let n2 = self.dims.n2 as usize;
        let k = self.dims.coord_count();
        if i < 1 || i > k {
            return Err(Error::Domain(format!(
                "coordinate {i} out of range 1..={k}"
            )));
        }
        let idx = i - 1;
        if idx < n1 * n2 {
            let row = (idx / n1 + 1) as u32;
            let col = (idx % n1 + 1) as u32;
            self.u_entry(row, col)
        } else {
            self.b_entry((idx - n1 * n2 + 1) as u32)
        }
    }

    /// `U·x` as an exact vector of length `N2`.
    pub fn apply_u(&self, x: &QVec) -> Result<QVec> {
        if x.dim() != self.dims.n1 as usize {
            return Err(Error::Domain(format!(
                "vector dimension {} does not match n1 = {}",
                x.dim(),
                self.dims.n1
            )));
        }
        let mut rows = Vec::with_capacity(self.dims.n2 as usize);
        // Row 1: u1·x1 + u2·x2. Rows 2..: x_{row+1}.
        rows.push(&self.params.u1 * &x[0] + &self.params.u2 * &x[1]);
        for row in 2..=self.dims.n2 {
            rows.push(x[row as usize].clone()); // column row+1, 0-indexed row
        }
        Ok(QVec::from_entries(rows))
    }

    /// The exact right hand side `b = 2κ·e1` of length `N2`.
    pub fn b_vector(&self) -> QVec {
        let mut b = QVec::zeros(self.dims.n2 as usize);
        let two_kappa = Rational::from_int(2) * &self.family.kappa;
        // Single nonzero entry; QVec has no mutable index, rebuild.
        let mut entries: Vec<Rational> = b.entries().to_vec();
        entries[0] = two_kappa;
        b = QVec::from_entries(entries);
        b
    }
}

// ---------------------------------------------------------------------------
// Solution sets and anchors
// ---------------------------------------------------------------------------

/// An exact solution set: a single point or a segment.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum SolutionSet {
    /// A unique minimizer.
    Point {
        /// The minimizer.
        point: QVec,
    },
    /// Every point of the segment `{t·a + (1−t)·b}` is a minimizer; occurs
    /// exactly in the degenerate case `u1 = u2`.
    Segment {
        /// One endpoint (first-axis side).
        a: QVec,
        /// Other endpoint (second-axis side).
        b: QVec,
    },
}

impl SolutionSet {
    /// Exact distance handle from `x` to this set.
    pub fn dist(&self, x: &QVec, p: PNorm) -> Result<DistCmp> {
        match self {
            SolutionSet::Point { point } => dist_point(x, point, p),
            SolutionSet::Segment { a, b } => Ok(dist_segment(x, a, b, p)?.cmp),
        }
    }

    /// A deterministic representative point of the set (the point itself,
    /// or the first endpoint of a segment).
    pub fn representative(&self) -> &QVec {
        match self {
            SolutionSet::Point { point } => point,
            SolutionSet::Segment { a, .. } => a,
        }
    }

    /// True if this is a single point.
    pub fn is_single_valued(&self) -> bool {
        matches!(self, SolutionSet::Point { .. })
    }
}

/// The anchor geometry of a family at given dimensions.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct AnchorSets {
    /// First-axis anchor: the solution point of every instance with
    /// `u1 = 1/2 > u2`.
    pub y1: QVec,
    /// Second-axis anchor.
    pub y2: QVec,
}

impl AnchorSets {
    /// The degenerate solution segment `S0` from `y1` to `y2`.
    pub fn s0(&self) -> SolutionSet {
        SolutionSet::Segment {
            a: self.y1.clone(),
            b: self.y2.clone(),
        }
    }

    /// The singleton `S1 = {y1}`.
    pub fn s1(&self) -> SolutionSet {
        SolutionSet::Point { point: self.y1.clone() }
    }

    /// The singleton `S2 = {y2}`.
    pub fn s2(&self) -> SolutionSet {
        SolutionSet::Point { point: self.y2.clone() }
    }

    /// Exact membership of `x` in the closed `κ`-ball around `y2`, in the
    /// family norm — the predicate the attack engine's verdict uses.
    pub fn in_kappa_ball_of_y2(&self, x: &QVec, p: PNorm, kappa: &Rational) -> Result<bool> {
        Ok(dist_point(x, &self.y2, p)?.le(kappa))
    }
}

/// The two anchor points of a family at the given dimensions.
///
/// Both are the closed-form solutions at the extreme parameter settings
/// (`umax = 1/2` on one axis), so their nonzero coordinate is
/// `solution_scale(1/2)`.
pub fn anchor_sets(family: &Family, dims: &Dims) -> Result<AnchorSets> {
    let half = Rational::new(1, 2)?;
    let scale = family.solution_scale(&half)?;
    let n1 = dims.n1 as usize;
    Ok(AnchorSets {
        y1: QVec::axis_scaled(n1, 0, scale.clone())?,
        y2: QVec::axis_scaled(n1, 1, scale)?,
    })
}

/// Exact anchor-separation gate: requires `dist_p(y1, y2) > 2κ`, which is
/// what makes a wrong answer near one anchor provably far from the other.
pub fn validate_separation(family: &Family) -> Result<()> {
    let dims = Dims::new(2, 1)?; // separation only involves the first two axes
    let anchors = anchor_sets(family, &dims)?;
    let two_kappa = Rational::from_int(2) * &family.kappa;
    let d = dist_point(&anchors.y1, &anchors.y2, family.p)?;
    if d.gt(&two_kappa) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "anchor separation violated: dist(y1, y2) <= 2*kappa = {two_kappa} for family {}",
            family.kind.tag()
        )))
    }
}

// ---------------------------------------------------------------------------
// Parameter schedules (the ι anchors)
// ---------------------------------------------------------------------------

/// The three parameter schedules used by program inputs:
///
/// * `j = 0`: the degenerate instance `u = (1/2, 1/2)`;
/// * `j = 1`: `u = (1/2, 1/2 − 4^{−t})` — solution set `{y1}`;
/// * `j = 2`: `u = (1/2 − 4^{−t}, 1/2)` — solution set `{y2}`.
///
/// `t ≥ 1` is required so the perturbed parameter stays inside `[θ, 1/2]`
/// for every admissible `θ`.
pub fn iota_anchor(
    family: &Family,
    dims: &Dims,
    j: u8,
    t: u64,
    theta: &Rational,
) -> Result<ProblemInstance> {
    let half = Rational::new(1, 2)?;
    let (u1, u2) = match j {
        0 => (half.clone(), half),
        1 | 2 => {
            if t < 1 {
                return Err(Error::Domain("schedule index t must be at least 1".into()));
            }
            let exp = i32::try_from(t)
                .map_err(|_| Error::Domain("schedule index t out of range".into()))?;
            let perturbed = &half - &Rational::from_int(4).pow(-exp);
            if perturbed < *theta {
                return Err(Error::Domain(format!(
                    "perturbed parameter {perturbed} falls below theta = {theta}"
                )));
            }
            if j == 1 {
                (half, perturbed)
            } else {
                (perturbed, half)
            }
        }
        other => {
            return Err(Error::Domain(format!(
                "schedule selector must be 0, 1, or 2; got {other}"
            )))
        }
    };
    build_instance(
        family.clone(),
        *dims,
        InstanceParams::new(u1, u2, theta.clone())?,
    )
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// The exact solution set of an instance, by closed form.
///
/// With `s = solution_scale(umax)`: the minimizer is `s·e1` when
/// `u1 > u2`, `s·e2` when `u2 > u1`, and the full segment between the two
/// when `u1 = u2`.
pub fn solve_closed_form(inst: &ProblemInstance) -> Result<SolutionSet> {
    let umax = inst.params.umax();
    let scale = inst.family.solution_scale(&umax)?;
    let n1 = inst.dims.n1 as usize;
    let on_axis = |axis: usize| QVec::axis_scaled(n1, axis, scale.clone());
    Ok(match inst.params.u1.cmp(&inst.params.u2) {
        std::cmp::Ordering::Greater => SolutionSet::Point { point: on_axis(0)? },
        std::cmp::Ordering::Less => SolutionSet::Point { point: on_axis(1)? },
        std::cmp::Ordering::Equal => SolutionSet::Segment {
            a: on_axis(0)?,
            b: on_axis(1)?,
        },
    })
}

/// The optimal objective value of an instance (objective of the closed-form
/// solution; for a degenerate segment every point has the same value).
pub fn optimal_value(inst: &ProblemInstance) -> Result<Rational> {
    let sol = solve_closed_form(inst)?;
    let report = objective_value(inst, sol.representative())?;
    if !report.feasible {
        // The closed form always lands exactly on the feasible set; hitting
        // this indicates corrupted family parameters.
        return Err(Error::Config(
            "closed-form solution evaluated as infeasible".into(),
        ));
    }
    Ok(report.value)
}

// ---------------------------------------------------------------------------
// Objective evaluation
// ---------------------------------------------------------------------------

/// Exact objective value and feasibility of a candidate vector.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ObjectiveReport {
    /// The objective value. For infeasible LP/BP candidates this is still
    /// the raw objective (sum / l1 norm), reported for diagnostics.
    pub value: Rational,
    /// Exact feasibility: `Ux = b ∧ x ≥ 0` for LP, `‖Ux − b‖₂ ≤ η` for BP
    /// (compared through squares), always true for LASSO.
    pub feasible: bool,
}

/// Evaluates a candidate exactly.
pub fn objective_value(inst: &ProblemInstance, x: &QVec) -> Result<ObjectiveReport> {
    let residual = inst.apply_u(x)?.try_sub(&inst.b_vector())?;
    let res_sq = residual
        .entries()
        .iter()
        .fold(Rational::zero(), |acc, r| acc + r.pow(2));
    let l1 = x
        .entries()
        .iter()
        .fold(Rational::zero(), |acc, e| acc + e.abs());
    Ok(match &inst.family.kind {
        FamilyKind::Lp => {
            let sum = x
                .entries()
                .iter()
                .fold(Rational::zero(), |acc, e| acc + e);
            let nonneg = x.entries().iter().all(|e| !e.is_negative());
            ObjectiveReport {
                value: sum,
                feasible: nonneg && res_sq.is_zero(),
            }
        }
        FamilyKind::Bp { eta } => ObjectiveReport {
            value: l1,
            feasible: res_sq <= eta.pow(2),
        },
        FamilyKind::Lasso { lambda } => ObjectiveReport {
            value: lambda * &l1 + res_sq,
            feasible: true,
        },
    })
}

// ---------------------------------------------------------------------------
// Brute-force grid oracle
// ---------------------------------------------------------------------------

/// Independent grid minimizer over the box `[0, 6κ/θ]²` (coordinates past
/// the second are pinned to zero, which is optimal for every family since
/// the remaining rows force them against zero right-hand sides).
///
/// * LP walks the exactly-feasible line: `x1` on the grid, `x2` solved from
///   the first row, candidates kept only when `x2 ≥ 0`.
/// * BP and LASSO scan the full two-dimensional grid; BP feasibility is the
///   exact slab test `(u1x1 + u2x2 − 2κ)² ≤ η²`.
///
/// Ties break toward the lexicographically smallest grid point, so the
/// result is deterministic. The scan clears denominators once and runs in
/// scaled `i128` integers when every bound fits (it does at all default
/// parameters), otherwise in exact big integers; both paths are exact.
pub fn brute_force_oracle(inst: &ProblemInstance, grid_step: &Rational) -> Result<QVec> {
    if !grid_step.is_positive() {
        return Err(Error::Domain("grid step must be positive".into()));
    }
    let box_hi = (Rational::from_int(6) * &inst.family.kappa)
        .checked_div(&inst.params.theta)?;
    // Number of grid cells along one axis: floor(box_hi / step).
    let cells_q = box_hi.checked_div(grid_step)?;
    let cells: u64 = (cells_q.numer() / cells_q.denom())
        .to_u64()
        .ok_or_else(|| Error::Domain("grid too fine: cell count overflows".into()))?;
    if cells == 0 {
        return Err(Error::Domain("grid step exceeds the search box".into()));
    }
    if cells > 1 << 24 {
        return Err(Error::Domain(
            "grid too fine: more than 2^24 cells per axis".into(),
        ));
    }

    let n1 = inst.dims.n1 as usize;
    let embed = |x1: Rational, x2: Rational| -> QVec {
        let mut entries = vec![Rational::zero(); n1];
        entries[0] = x1;
        entries[1] = x2;
        QVec::from_entries(entries)
    };

    match &inst.family.kind {
        FamilyKind::Lp => {
            // One-dimensional exactly-feasible walk.
            let two_kappa = Rational::from_int(2) * &inst.family.kappa;
            let mut best: Option<(Rational, QVec)> = None;
            for j in 0..=cells {
                let x1 = Rational::from_int(j as i64) * grid_step;
                let x2 = (&two_kappa - &(&inst.params.u1 * &x1))
                    .checked_div(&inst.params.u2)?;
                if x2.is_negative() {
                    continue;
                }
                let value = &x1 + &x2;
                let better = match &best {
                    None => true,
                    Some((bv, _)) => value < *bv,
                };
                if better {
                    best = Some((value, embed(x1, x2)));
                }
            }
            best.map(|(_, x)| x)
                .ok_or_else(|| Error::Domain("no feasible grid point found".into()))
        }
        FamilyKind::Bp { .. } | FamilyKind::Lasso { .. } => grid_scan_2d(inst, grid_step, cells),
    }
}

/// Two-dimensional scan shared by BP and LASSO, in cleared-denominator
/// integer arithmetic.
///
/// With common denominator `M` (of the step, both parameters, `2κ`, and the
/// family constant), every linear quantity times `M²` is an integer:
/// `r·M² = (u1·M)(x1·M) + (u2·M)(x2·M) − (2κ·M)·M`. Comparisons are made at
/// scale `M⁴`: BP feasibility `(r·M²)² ≤ (η·M²)²`, BP objective
/// `(x1+x2)·M·M³`, LASSO objective `(λ·M)((x1+x2)·M)·M² + (r·M²)²`.
fn grid_scan_2d(inst: &ProblemInstance, grid_step: &Rational, cells: u64) -> Result<QVec> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mode {
        Bp,
        Lasso,
    }
    let (mode, constant) = match &inst.family.kind {
        FamilyKind::Bp { eta } => (Mode::Bp, eta.clone()),
        FamilyKind::Lasso { lambda } => (Mode::Lasso, lambda.clone()),
        FamilyKind::Lp => unreachable!("grid_scan_2d is only called for bp/lasso"),
    };
    let two_kappa = Rational::from_int(2) * &inst.family.kappa;

    // Common denominator M.
    let mut m = BigInt::from(1);
    for q in [grid_step, &inst.params.u1, &inst.params.u2, &two_kappa, &constant] {
        m = m.lcm(q.denom());
    }

    // Scaled integers.
    let scaled = |q: &Rational| -> BigInt { q.numer() * (&m / q.denom()) };
    let step_m = scaled(grid_step);
    let u1_m = scaled(&inst.params.u1);
    let u2_m = scaled(&inst.params.u2);
    let two_kappa_m2 = scaled(&two_kappa) * &m;
    let const_m = scaled(&constant);

    // Try the i128 fast path: every intermediate is bounded by
    // ~8·M⁴·cells², so demand M·(cells+1) < 2^26 which keeps fourth powers
    // far below i128::MAX.
    let fits = {
        let bound = BigInt::from(1u64 << 26);
        &step_m * (cells + 1) < bound && m < bound
    };

    let n1 = inst.dims.n1 as usize;
    let embed = |i: u64, j: u64| -> QVec {
        let x1 = Rational::from_int(i as i64) * grid_step;
        let x2 = Rational::from_int(j as i64) * grid_step;
        let mut entries = vec![Rational::zero(); n1];
        entries[0] = x1;
        entries[1] = x2;
        QVec::from_entries(entries)
    };

    if fits {
        let to = |b: &BigInt| -> i128 { b.to_i128().expect("bounded by fit check") };
        let (step_m, u1_m, u2_m, two_kappa_m2, const_m, m_i) = (
            to(&step_m),
            to(&u1_m),
            to(&u2_m),
            to(&two_kappa_m2),
            to(&const_m),
            to(&m),
        );
        let const_m2 = const_m * m_i; // η·M², used only by the BP slab test
        let mut best: Option<(i128, u64, u64)> = None;
        for i in 0..=cells {
            let x1_m = step_m * i as i128;
            let a1 = u1_m * x1_m; // u1·x1·M²
            for j in 0..=cells {
                let x2_m = step_m * j as i128;
                let r_m2 = a1 + u2_m * x2_m - two_kappa_m2;
                let value_m4 = match mode {
                    Mode::Bp => {
                        if r_m2 * r_m2 > const_m2 * const_m2 {
                            continue; // outside the slab
                        }
                        (x1_m + x2_m) * m_i * m_i * m_i
                    }
                    Mode::Lasso => const_m * (x1_m + x2_m) * m_i * m_i + r_m2 * r_m2,
                };
                let better = match best {
                    None => true,
                    Some((bv, _, _)) => value_m4 < bv,
                };
                if better {
                    best = Some((value_m4, i, j));
                }
            }
        }
        best.map(|(_, i, j)| embed(i, j))
            .ok_or_else(|| Error::Domain("no feasible grid point found".into()))
    } else {
        // Exact big-integer fallback, same formulas.
        let const_m2 = &const_m * &m;
        let mut best: Option<(BigInt, u64, u64)> = None;
        for i in 0..=cells {
            let x1_m = &step_m * i;
            let a1 = &u1_m * &x1_m;
            for j in 0..=cells {
                let x2_m = &step_m * j;
                let r_m2 = &a1 + &u2_m * &x2_m - &two_kappa_m2;
                let value_m4 = match mode {
                    Mode::Bp => {
                        if &r_m2 * &r_m2 > &const_m2 * &const_m2 {
                            continue;
                        }
                        (&x1_m + &x2_m) * &m * &m * &m
                    }
                    Mode::Lasso => &const_m * (&x1_m + &x2_m) * &m * &m + &r_m2 * &r_m2,
                };
                let better = match &best {
                    None => true,
                    Some((bv, _, _)) => value_m4 < *bv,
                };
                if better {
                    best = Some((value_m4, i, j));
                }
            }
        }
        best.map(|(_, i, j)| embed(i, j))
            .ok_or_else(|| Error::Domain("no feasible grid point found".into()))
    }
}

/// Analytic bound on `objective(grid best) − optimum` for
/// [`brute_force_oracle`] at the given step, per family:
///
/// * LP: `|1 − u1/u2| · h` — the feasible-line objective is linear in `x1`
///   with that slope, and some feasible grid abscissa lies within `h` of
///   the minimizer.
/// * BP: `h` — rounding the minimizer's nonzero coordinate up to the grid
///   stays inside the slab (requires `umax·h ≤ 2η`, checked) and costs at
///   most `h`.
/// * LASSO: `2·(λ + 2·umax·R)·h` with `R = max(2κ, (u1+u2)·B − 2κ)`,
///   `B = 6κ/θ` — a gradient bound on the box times the per-coordinate
///   grid offset.
pub fn grid_gap_bound(inst: &ProblemInstance, grid_step: &Rational) -> Result<Rational> {
    let h = grid_step;
    if !h.is_positive() {
        return Err(Error::Domain("grid step must be positive".into()));
    }
    let umax = inst.params.umax();
    match &inst.family.kind {
        FamilyKind::Lp => {
            let slope = (Rational::one()
                - inst.params.u1.checked_div(&inst.params.u2)?)
            .abs();
            Ok(slope * h)
        }
        FamilyKind::Bp { eta } => {
            if &umax * h > Rational::from_int(2) * eta {
                return Err(Error::Domain(
                    "grid too coarse for the bp gap bound (umax*h > 2*eta)".into(),
                ));
            }
            Ok(h.clone())
        }
        FamilyKind::Lasso { lambda } => {
            let two_kappa = Rational::from_int(2) * &inst.family.kappa;
            let box_hi = (Rational::from_int(6) * &inst.family.kappa)
                .checked_div(&inst.params.theta)?;
            let r_far = (&inst.params.u1 + &inst.params.u2) * &box_hi - &two_kappa;
            let r_max = if r_far > two_kappa {
                r_far
            } else {
                two_kappa
            };
            let grad = lambda + &(Rational::from_int(2) * &umax * &r_max);
            Ok(Rational::from_int(2) * grad * h)
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn v(entries: &[&str]) -> QVec {
        QVec::from_entries(entries.iter().map(|s| q(s)).collect())
    }

    fn params(u1: &str, u2: &str) -> InstanceParams {
        InstanceParams::new(q(u1), q(u2), default_theta()).unwrap()
    }

    fn lp(u1: &str, u2: &str, n1: u32, n2: u32) -> ProblemInstance {
        build_instance(Family::lp_default(), Dims::new(n1, n2).unwrap(), params(u1, u2)).unwrap()
    }

    #[test]
    fn admissible_box_is_enforced() {
        assert!(params("1/2", "1/4").u1.is_positive());
        assert!(InstanceParams::new(q("1/2"), q("1/2"), default_theta()).is_ok());
        // Both parameters off 1/2 is rejected.
        assert!(InstanceParams::new(q("1/4"), q("1/4"), default_theta()).is_err());
        // Below theta.
        assert!(InstanceParams::new(q("1/5"), q("1/2"), default_theta()).is_err());
        // Above 1/2.
        assert!(InstanceParams::new(q("3/5"), q("1/2"), default_theta()).is_err());
        // Theta outside [1/8, 1/4].
        assert!(InstanceParams::new(q("1/2"), q("1/2"), q("1/16")).is_err());
        assert!(InstanceParams::new(q("1/2"), q("1/2"), q("1/3")).is_err());
        // Theta = 1/8 admits parameters down to 1/8.
        assert!(InstanceParams::new(q("1/8"), q("1/2"), q("1/8")).is_ok());
    }

    #[test]
    fn dims_validation() {
        assert!(Dims::new(2, 1).is_ok());
        assert!(Dims::new(3, 2).is_ok());
        assert!(Dims::new(2, 2).is_err()); // needs n1 >= n2 + 1
        assert!(Dims::new(1, 1).is_err());
        assert!(Dims::new(4, 0).is_err());
        assert_eq!(Dims::new(3, 2).unwrap().coord_count(), 8);
        assert_eq!(Dims::new(2, 1).unwrap().coord_count(), 3);
    }

    #[test]
    fn matrix_and_rhs_layout() {
        let inst = lp("1/2", "1/4", 3, 2);
        let expect = [
            ["1/2", "1/4", "0/1"],
            ["0/1", "0/1", "1/1"],
        ];
        for (r, row) in expect.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                assert_eq!(inst.u_entry(r as u32 + 1, c as u32 + 1).unwrap(), q(cell));
            }
        }
        assert_eq!(inst.b_entry(1).unwrap(), q("1/5"));
        assert_eq!(inst.b_entry(2).unwrap(), q("0/1"));
        assert!(inst.u_entry(3, 1).is_err());
        assert!(inst.b_entry(0).is_err());
    }

    #[test]
    fn coordinate_map_is_row_major_then_rhs() {
        let inst = lp("1/2", "1/4", 3, 2);
        let coords: Vec<Rational> = (1..=8).map(|i| inst.coord(i).unwrap()).collect();
        let expect = ["1/2", "1/4", "0/1", "0/1", "0/1", "1/1", "1/5", "0/1"];
        for (i, e) in expect.iter().enumerate() {
            assert_eq!(coords[i], q(e), "coordinate {}", i + 1);
        }
        assert!(inst.coord(0).is_err());
        assert!(inst.coord(9).is_err());
    }

    #[test]
    fn closed_forms_land_on_anchors() {
        // LP, first axis.
        let sol = solve_closed_form(&lp("1/2", "1/4", 3, 1)).unwrap();
        assert_eq!(sol, SolutionSet::Point { point: v(&["2/5", "0/1", "0/1"]) });
        // LP, second axis.
        let sol = solve_closed_form(&lp("1/4", "1/2", 2, 1)).unwrap();
        assert_eq!(sol, SolutionSet::Point { point: v(&["0/1", "2/5"]) });
        // LP, degenerate segment.
        let sol = solve_closed_form(&lp("1/2", "1/2", 2, 1)).unwrap();
        assert_eq!(
            sol,
            SolutionSet::Segment { a: v(&["2/5", "0/1"]), b: v(&["0/1", "2/5"]) }
        );
        // BP at defaults: scale (2κ−η)/umax = (3/20)/(1/2) = 3/10.
        let bp = build_instance(Family::bp_default(), Dims::new(2, 1).unwrap(), params("1/4", "1/2")).unwrap();
        assert_eq!(
            solve_closed_form(&bp).unwrap(),
            SolutionSet::Point { point: v(&["0/1", "3/10"]) }
        );
        // LASSO at defaults: scale (4·umax·κ−λ)/(2·umax²) = 3/10.
        let lasso = build_instance(Family::lasso_default(), Dims::new(2, 1).unwrap(), params("1/2", "1/2")).unwrap();
        assert_eq!(
            solve_closed_form(&lasso).unwrap(),
            SolutionSet::Segment { a: v(&["3/10", "0/1"]), b: v(&["0/1", "3/10"]) }
        );
    }

    #[test]
    fn anchors_match_solution_scale_at_half() {
        for family in Family::all_defaults() {
            let dims = Dims::new(4, 2).unwrap();
            let anchors = anchor_sets(&family, &dims).unwrap();
            let scale = family.solution_scale(&q("1/2")).unwrap();
            assert_eq!(anchors.y1, QVec::axis_scaled(4, 0, scale.clone()).unwrap());
            assert_eq!(anchors.y2, QVec::axis_scaled(4, 1, scale).unwrap());
        }
        // Frozen values: LP 2/5, BP and LASSO 3/10 at the defaults.
        let lp_anchor = anchor_sets(&Family::lp_default(), &Dims::new(2, 1).unwrap()).unwrap();
        assert_eq!(lp_anchor.y1, v(&["2/5", "0/1"]));
        let bp_anchor = anchor_sets(&Family::bp_default(), &Dims::new(2, 1).unwrap()).unwrap();
        assert_eq!(bp_anchor.y2, v(&["0/1", "3/10"]));
    }

    #[test]
    fn separation_gate() {
        for family in Family::all_defaults() {
            validate_separation(&family).unwrap();
        }
        // η = κ drives the BP anchor scale down to exactly 2κ, which the
        // strict gate rejects.
        let tight = Family::new(
            FamilyKind::Bp { eta: default_kappa() },
            default_kappa(),
            PNorm::Infinity,
        )
        .unwrap();
        assert!(matches!(validate_separation(&tight), Err(Error::Config(_))));
    }

    #[test]
    fn iota_schedules() {
        let fam = Family::lp_default();
        let dims = Dims::new(2, 1).unwrap();
        let th = default_theta();
        let i0 = iota_anchor(&fam, &dims, 0, 1, &th).unwrap();
        assert_eq!((i0.params.u1.clone(), i0.params.u2.clone()), (q("1/2"), q("1/2")));
        let i1 = iota_anchor(&fam, &dims, 1, 3, &th).unwrap();
        assert_eq!((i1.params.u1.clone(), i1.params.u2.clone()), (q("1/2"), q("31/64")));
        let i2 = iota_anchor(&fam, &dims, 2, 1, &th).unwrap();
        assert_eq!((i2.params.u1.clone(), i2.params.u2.clone()), (q("1/4"), q("1/2")));
        assert!(iota_anchor(&fam, &dims, 1, 0, &th).is_err());
        assert!(iota_anchor(&fam, &dims, 3, 1, &th).is_err());
        // Solutions of the perturbed schedules are exactly the anchors.
        assert_eq!(
            solve_closed_form(&i1).unwrap(),
            SolutionSet::Point { point: v(&["2/5", "0/1"]) }
        );
        assert_eq!(
            solve_closed_form(&i2).unwrap(),
            SolutionSet::Point { point: v(&["0/1", "2/5"]) }
        );
    }

    #[test]
    fn objective_values_and_feasibility() {
        // LASSO frozen value: λ‖x‖₁ + ‖Ux−b‖₂² at x = (3/10)e1, u = (1/2,1/2):
        // (1/20)(3/10) + (1/5 − 3/20)² = 3/200 + 1/400 = 7/400.
        let lasso = build_instance(Family::lasso_default(), Dims::new(2, 1).unwrap(), params("1/2", "1/2")).unwrap();
        let rep = objective_value(&lasso, &v(&["3/10", "0/1"])).unwrap();
        assert_eq!(rep.value, q("7/400"));
        assert!(rep.feasible);
        // BP feasibility is exact at the slab boundary.
        let bp = build_instance(Family::bp_default(), Dims::new(2, 1).unwrap(), params("1/4", "1/2")).unwrap();
        let rep = objective_value(&bp, &v(&["0/1", "3/10"])).unwrap();
        assert_eq!(rep.value, q("3/10"));
        assert!(rep.feasible); // residual norm is exactly η
        let rep = objective_value(&bp, &v(&["0/1", "31/100"])).unwrap();
        assert!(rep.feasible); // strictly inside
        let rep = objective_value(&bp, &v(&["0/1", "1/2"])).unwrap();
        assert!(rep.feasible); // residual exactly +η — the other slab boundary
        let rep = objective_value(&bp, &v(&["0/1", "3/5"])).unwrap();
        assert!(!rep.feasible); // residual 1/10 exceeds η
        // LP: exact equality plus nonnegativity.
        let lp_inst = lp("1/2", "1/4", 2, 1);
        let rep = objective_value(&lp_inst, &v(&["2/5", "0/1"])).unwrap();
        assert!(rep.feasible);
        assert_eq!(rep.value, q("2/5"));
        let rep = objective_value(&lp_inst, &v(&["1/5", "2/5"])).unwrap();
        assert!(rep.feasible); // (1/2)(1/5) + (1/4)(2/5) = 1/5 = 2κ
        assert_eq!(rep.value, q("3/5"));
        let rep = objective_value(&lp_inst, &v(&["2/5", "1/100"])).unwrap();
        assert!(!rep.feasible);
    }

    #[test]
    fn optimal_values() {
        assert_eq!(optimal_value(&lp("1/2", "1/4", 2, 1)).unwrap(), q("2/5"));
        let bp = build_instance(Family::bp_default(), Dims::new(2, 1).unwrap(), params("1/2", "1/2")).unwrap();
        assert_eq!(optimal_value(&bp).unwrap(), q("3/10"));
        let lasso = build_instance(Family::lasso_default(), Dims::new(2, 1).unwrap(), params("1/2", "1/2")).unwrap();
        assert_eq!(optimal_value(&lasso).unwrap(), q("7/400"));
    }

    #[test]
    fn grid_oracle_matches_closed_forms_exactly_on_grid_minimizers() {
        // All three default families have their minimizers on the 1/100 and
        // 1/200 grids, so the oracle must reproduce them exactly.
        let step = q("1/100");
        let lp_inst = lp("1/2", "1/4", 2, 1);
        assert_eq!(brute_force_oracle(&lp_inst, &step).unwrap(), v(&["2/5", "0/1"]));

        let bp = build_instance(Family::bp_default(), Dims::new(2, 1).unwrap(), params("1/4", "1/2")).unwrap();
        assert_eq!(brute_force_oracle(&bp, &step).unwrap(), v(&["0/1", "3/10"]));

        // Degenerate LASSO: every grid point with x1 + x2 = 3/10 is optimal;
        // the deterministic tie-break picks the lexicographically smallest,
        // (0, 3/10).
        let lasso = build_instance(Family::lasso_default(), Dims::new(2, 1).unwrap(), params("1/2", "1/2")).unwrap();
        let best = brute_force_oracle(&lasso, &q("1/200")).unwrap();
        assert_eq!(best, v(&["0/1", "3/10"]));
        assert_eq!(objective_value(&lasso, &best).unwrap().value, q("7/400"));
    }

    #[test]
    fn grid_oracle_never_beats_the_closed_form() {
        let step = q("1/50");
        for family in Family::all_defaults() {
            for (u1, u2) in [("1/2", "1/4"), ("1/4", "1/2"), ("1/2", "1/2"), ("1/2", "27/64")] {
                let inst = build_instance(family.clone(), Dims::new(2, 1).unwrap(), params(u1, u2)).unwrap();
                let best = brute_force_oracle(&inst, &step).unwrap();
                let got = objective_value(&inst, &best).unwrap();
                assert!(got.feasible, "{} grid point infeasible", family.kind.tag());
                let opt = optimal_value(&inst).unwrap();
                assert!(got.value >= opt, "grid beat the closed form");
                let bound = grid_gap_bound(&inst, &step).unwrap();
                assert!(
                    got.value - opt <= bound,
                    "gap exceeded the analytic bound for {}",
                    family.kind.tag()
                );
            }
        }
    }

    #[test]
    fn bigint_fallback_agrees_with_frozen_optimum() {
        // A parameter with denominator 2^27 pushes the common denominator
        // past the i128 fit check, forcing the big-integer branch. The
        // instance still has umax = 1/2, so the BP minimizer is (0, 3/10),
        // which sits on the coarse 1/10 grid.
        let u1 = Rational::from_big(num_bigint::BigInt::from((1u64 << 26) - 1), num_bigint::BigInt::from(1u64 << 27)).unwrap();
        let inst = build_instance(
            Family::bp_default(),
            Dims::new(2, 1).unwrap(),
            InstanceParams::new(u1, q("1/2"), default_theta()).unwrap(),
        )
        .unwrap();
        let best = brute_force_oracle(&inst, &q("1/10")).unwrap();
        assert_eq!(best, v(&["0/1", "3/10"]));
        assert_eq!(objective_value(&inst, &best).unwrap().value, q("3/10"));
    }

    #[test]
    fn family_constructor_guards() {
        assert!(Family::new(FamilyKind::Lp, q("0/1"), PNorm::Infinity).is_err());
        assert!(Family::new(FamilyKind::Bp { eta: q("0/1") }, default_kappa(), PNorm::Infinity).is_err());
        assert!(Family::new(FamilyKind::Bp { eta: q("1/4") }, default_kappa(), PNorm::Infinity).is_err());
        assert!(Family::new(FamilyKind::Lasso { lambda: q("1/4") }, default_kappa(), PNorm::Infinity).is_err());
        assert!(Family::new(FamilyKind::Bp { eta: q("1/5") }, default_kappa(), PNorm::Infinity).is_ok());
    }

    #[test]
    fn solution_set_distances() {
        let anchors = anchor_sets(&Family::lp_default(), &Dims::new(2, 1).unwrap()).unwrap();
        let s0 = anchors.s0();
        let d = s0.dist(&v(&["1/5", "1/5"]), PNorm::Infinity).unwrap();
        assert!(d.le(&Rational::zero()));
        let d = s0.dist(&v(&["1/2", "1/2"]), PNorm::Infinity).unwrap();
        assert!(d.ge(&q("3/10")) && d.le(&q("3/10")));
        assert!(anchors
            .in_kappa_ball_of_y2(&v(&["0/1", "2/5"]), PNorm::Infinity, &default_kappa())
            .unwrap());
        assert!(!anchors
            .in_kappa_ball_of_y2(&v(&["2/5", "0/1"]), PNorm::Infinity, &default_kappa())
            .unwrap());
        assert!(!s0.is_single_valued());
        assert!(anchors.s1().is_single_valued());
    }
}
