//! Finite input descriptors with a canonical one-line serialization.
//!
//! A descriptor pins down a program input completely:
//!
//! * `exact` — both parameters given as rationals; the input's coordinates
//!   are answered exactly.
//! * `schedule` — an anchor schedule `ι^j_t`: the perturbed parameter is
//!   revealed only to queries at precision `≥ t`; coarser queries see the
//!   degenerate instance.
//! * `diagonal` — a self-referential input whose coordinates are defined by
//!   running the named subject program against this very input under a
//!   fuel cap (see [`crate::markov::engine`]).
//!
//! The canonical line is the descriptor's identity: byte-for-byte equal
//! lines denote the same input, and [`MarkovInput::parse_line`] rejects
//! anything that does not round-trip to itself (non-lowest-terms rationals,
//! extra spaces, reordered fields). Descriptors serialize into records as
//! this line, which is what makes stored certificates replayable.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::exactnum::{PNorm, Rational};
use crate::markov::{CheckerProgram, ProblemHeader, SolverProgram};
use crate::problems::{iota_anchor, Dims, Family, FamilyKind, InstanceParams};
use crate::{Error, Result};

/// How a diagonal input judges its subject's run.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DiagonalMode {
    /// Judge the solver's answer alone (verdicts 1 and 2).
    Plain,
    /// Run a checker after the solver and fold its exit flag into the
    /// verdict (verdicts 1, 2, and 3).
    ExitFlag,
}

impl DiagonalMode {
    /// Canonical field value.
    pub fn tag(&self) -> &'static str {
        match self {
            DiagonalMode::Plain => "plain",
            DiagonalMode::ExitFlag => "exitflag",
        }
    }
}

/// Reference to a subject program by id and declared size.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ProgramRef {
    /// Registry id.
    pub id: String,
    /// Declared program length in bytes.
    pub size: u64,
}

impl ProgramRef {
    /// Capture a reference from a live solver.
    pub fn of_solver(solver: &dyn SolverProgram) -> Self {
        ProgramRef {
            id: solver.id().to_string(),
            size: solver.declared_size(),
        }
    }

    /// Capture a reference from a live checker.
    pub fn of_checker(checker: &dyn CheckerProgram) -> Self {
        ProgramRef {
            id: checker.id().to_string(),
            size: checker.declared_size(),
        }
    }
}

/// The input-specific part of a descriptor.
#[derive(Clone, PartialEq, Debug)]
pub enum InputKind {
    /// Fixed parameters; queries are answered exactly.
    Exact {
        /// First parameter.
        u1: Rational,
        /// Second parameter.
        u2: Rational,
    },
    /// Anchor schedule `ι^j_t`, `j ∈ {1, 2}`, `t ≥ 1`.
    Schedule {
        /// Which axis the schedule resolves to.
        j: u8,
        /// Precision threshold at which the perturbation becomes visible.
        t: u64,
    },
    /// Self-referential input targeting a named subject.
    Diagonal {
        /// Judging mode.
        mode: DiagonalMode,
        /// The attacked solver.
        solver: ProgramRef,
        /// The attacked checker; present exactly in exit-flag mode.
        checker: Option<ProgramRef>,
    },
}

/// A complete program-input descriptor.
#[derive(Clone, PartialEq, Debug)]
pub struct MarkovInput {
    /// Family, dimensions, and box floor.
    pub header: ProblemHeader,
    /// Input-specific data.
    pub kind: InputKind,
}

impl MarkovInput {
    /// Exact input; validates box membership of `(u1, u2)`.
    pub fn exact(header: ProblemHeader, u1: Rational, u2: Rational) -> Result<Self> {
        InstanceParams::new(u1.clone(), u2.clone(), header.theta.clone())?;
        Ok(MarkovInput {
            header,
            kind: InputKind::Exact { u1, u2 },
        })
    }

    /// Anchor schedule `ι^j_t`; validates `j ∈ {1, 2}`, `t ≥ 1`, and that
    /// the perturbed parameter stays inside the box.
    pub fn schedule(header: ProblemHeader, j: u8, t: u64) -> Result<Self> {
        if !(j == 1 || j == 2) {
            return Err(Error::Domain(format!(
                "schedule axis must be 1 or 2, got {j}"
            )));
        }
        iota_anchor(&header.family, &header.dims, j, t, &header.theta)?;
        Ok(MarkovInput {
            header,
            kind: InputKind::Schedule { j, t },
        })
    }

    /// Plain diagonal input against a solver.
    pub fn diagonal_plain(header: ProblemHeader, solver: &dyn SolverProgram) -> Self {
        MarkovInput {
            header,
            kind: InputKind::Diagonal {
                mode: DiagonalMode::Plain,
                solver: ProgramRef::of_solver(solver),
                checker: None,
            },
        }
    }

    /// Exit-flag diagonal input against a solver/checker pair.
    pub fn diagonal_exitflag(
        header: ProblemHeader,
        solver: &dyn SolverProgram,
        checker: &dyn CheckerProgram,
    ) -> Self {
        MarkovInput {
            header,
            kind: InputKind::Diagonal {
                mode: DiagonalMode::ExitFlag,
                solver: ProgramRef::of_solver(solver),
                checker: Some(ProgramRef::of_checker(checker)),
            },
        }
    }

    /// The canonical one-line form; this string is the descriptor's
    /// identity.
    pub fn canonical_line(&self) -> String {
        let h = &self.header;
        let mut tokens: Vec<String> = Vec::new();
        tokens.push(
            match self.kind {
                InputKind::Exact { .. } => "exact",
                InputKind::Schedule { .. } => "schedule",
                InputKind::Diagonal { .. } => "diagonal",
            }
            .to_string(),
        );
        tokens.push(h.family.kind.tag().to_string());
        tokens.push(format!("kappa={}", h.family.kappa));
        match &h.family.kind {
            FamilyKind::Lp => {}
            FamilyKind::Bp { eta } => tokens.push(format!("eta={eta}")),
            FamilyKind::Lasso { lambda } => tokens.push(format!("lambda={lambda}")),
        }
        tokens.push(format!("p={}", h.family.p));
        tokens.push(format!("n1={}", h.dims.n1));
        tokens.push(format!("n2={}", h.dims.n2));
        tokens.push(format!("theta={}", h.theta));
        match &self.kind {
            InputKind::Exact { u1, u2 } => {
                tokens.push(format!("u1={u1}"));
                tokens.push(format!("u2={u2}"));
            }
            InputKind::Schedule { j, t } => {
                tokens.push(format!("j={j}"));
                tokens.push(format!("t={t}"));
            }
            InputKind::Diagonal { mode, solver, checker } => {
                tokens.push(format!("mode={}", mode.tag()));
                tokens.push(format!("solver={}", escape_id(&solver.id)));
                tokens.push(format!("size={}", solver.size));
                if let Some(c) = checker {
                    tokens.push(format!("checker={}", escape_id(&c.id)));
                    tokens.push(format!("csize={}", c.size));
                }
            }
        }
        tokens.join(" ")
    }

    /// Byte length of the canonical line.
    pub fn len_bytes(&self) -> u64 {
        self.canonical_line().len() as u64
    }

    /// Strict parse: accepts exactly the canonical form. Any line that does
    /// not re-serialize to itself is rejected, so equality of descriptors
    /// coincides with equality of their lines.
    pub fn parse_line(line: &str) -> Result<Self> {
        let tokens: Vec<&str> = line.split(' ').collect();
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::Parse("empty token in descriptor line".into()));
        }
        let mut cur = tokens.iter();
        let mut next = |what: &str| -> Result<&str> {
            cur.next()
                .copied()
                .ok_or_else(|| Error::Parse(format!("descriptor line ended before {what}")))
        };
        let tag = next("input tag")?;
        let family_tag = next("family tag")?;
        let kappa = parse_rational_field(next("kappa")?, "kappa")?;
        let kind = match family_tag {
            "lp" => FamilyKind::Lp,
            "bp" => FamilyKind::Bp {
                eta: parse_rational_field(next("eta")?, "eta")?,
            },
            "lasso" => FamilyKind::Lasso {
                lambda: parse_rational_field(next("lambda")?, "lambda")?,
            },
            other => return Err(Error::Parse(format!("unknown family tag {other:?}"))),
        };
        let p: PNorm = field_value(next("p")?, "p")?
            .parse()
            .map_err(|e: Error| Error::Parse(format!("bad p field: {e}")))?;
        let family = Family::new(kind, kappa, p)?;
        let n1: u32 = parse_int_field(next("n1")?, "n1")?;
        let n2: u32 = parse_int_field(next("n2")?, "n2")?;
        let dims = Dims::new(n1, n2)?;
        let theta = parse_rational_field(next("theta")?, "theta")?;
        let header = ProblemHeader { family, dims, theta };

        let input = match tag {
            "exact" => {
                let u1 = parse_rational_field(next("u1")?, "u1")?;
                let u2 = parse_rational_field(next("u2")?, "u2")?;
                MarkovInput::exact(header, u1, u2)?
            }
            "schedule" => {
                let j: u8 = parse_int_field(next("j")?, "j")?;
                let t: u64 = parse_int_field(next("t")?, "t")?;
                MarkovInput::schedule(header, j, t)?
            }
            "diagonal" => {
                let mode = match field_value(next("mode")?, "mode")? {
                    "plain" => DiagonalMode::Plain,
                    "exitflag" => DiagonalMode::ExitFlag,
                    other => return Err(Error::Parse(format!("unknown mode {other:?}"))),
                };
                let solver = ProgramRef {
                    id: unescape_id(field_value(next("solver")?, "solver")?)?,
                    size: parse_int_field(next("size")?, "size")?,
                };
                let checker = match mode {
                    DiagonalMode::Plain => None,
                    DiagonalMode::ExitFlag => Some(ProgramRef {
                        id: unescape_id(field_value(next("checker")?, "checker")?)?,
                        size: parse_int_field(next("csize")?, "csize")?,
                    }),
                };
                MarkovInput {
                    header,
                    kind: InputKind::Diagonal { mode, solver, checker },
                }
            }
            other => return Err(Error::Parse(format!("unknown input tag {other:?}"))),
        };
        if cur.next().is_some() {
            return Err(Error::Parse("trailing tokens in descriptor line".into()));
        }
        let canonical = input.canonical_line();
        if canonical != line {
            return Err(Error::Parse(format!(
                "descriptor is not in canonical form (canonical: {canonical:?})"
            )));
        }
        Ok(input)
    }
}

impl std::fmt::Display for MarkovInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.canonical_line())
    }
}

impl Serialize for MarkovInput {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical_line())
    }
}

impl<'de> Deserialize<'de> for MarkovInput {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let line = String::deserialize(deserializer)?;
        MarkovInput::parse_line(&line).map_err(D::Error::custom)
    }
}

/// The fixed byte overhead the descriptor encoding adds to a plain diagonal
/// input at the given family, box floor, and row count: the length of a
/// probe descriptor with an empty solver id, a single-digit size, and a
/// single-digit `n1`, minus the one `n1` digit.
///
/// For any solver whose declared size has a single digit (every built-in),
/// the canonical plain diagonal descriptor then measures exactly
/// `engine_constant + |id| + digits(n1)` bytes. Requires `n2 ≤ 8` so the
/// probe's `n1 = n2 + 1` and `n2` both stay single-digit.
pub fn engine_constant(family: &Family, theta: &Rational, n2: u32) -> Result<u64> {
    if n2 > 8 {
        return Err(Error::Domain(
            "engine constant is only defined for n2 <= 8".into(),
        ));
    }
    let probe = MarkovInput {
        header: ProblemHeader {
            family: family.clone(),
            dims: Dims::new(n2.max(1) + 1, n2.max(1))?,
            theta: theta.clone(),
        },
        kind: InputKind::Diagonal {
            mode: DiagonalMode::Plain,
            solver: ProgramRef {
                id: String::new(),
                size: 0,
            },
            checker: None,
        },
    };
    Ok(probe.len_bytes() - 1)
}

/// Count of decimal digits, for the descriptor length law.
pub fn decimal_digits(n: u32) -> u64 {
    n.to_string().len() as u64
}

fn field_value<'a>(token: &'a str, key: &str) -> Result<&'a str> {
    token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| Error::Parse(format!("expected field {key}=..., got {token:?}")))
}

fn parse_rational_field(token: &str, key: &str) -> Result<Rational> {
    field_value(token, key)?
        .parse()
        .map_err(|e: Error| Error::Parse(format!("bad {key} field: {e}")))
}

fn parse_int_field<T: std::str::FromStr>(token: &str, key: &str) -> Result<T> {
    field_value(token, key)?
        .parse()
        .map_err(|_| Error::Parse(format!("bad {key} field")))
}

/// Escape a program id for embedding as a descriptor token: `%`, space,
/// and newline become `%25`, `%20`, `%0A`.
fn escape_id(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for ch in id.chars() {
        match ch {
            '%' => out.push_str("%25"),
            ' ' => out.push_str("%20"),
            '\n' => out.push_str("%0A"),
            other => out.push(other),
        }
    }
    out
}

fn unescape_id(escaped: &str) -> Result<String> {
    let mut out = String::with_capacity(escaped.len());
    let mut chars = escaped.chars();
    while let Some(ch) = chars.next() {
        if ch != '%' {
            out.push(ch);
            continue;
        }
        let hi = chars.next();
        let lo = chars.next();
        match (hi, lo) {
            (Some('2'), Some('5')) => out.push('%'),
            (Some('2'), Some('0')) => out.push(' '),
            (Some('0'), Some('A')) => out.push('\n'),
            _ => {
                return Err(Error::Parse(format!(
                    "bad escape sequence in program id {escaped:?}"
                )))
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::default_theta;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn header(family: Family, n1: u32, n2: u32) -> ProblemHeader {
        ProblemHeader {
            family,
            dims: Dims::new(n1, n2).unwrap(),
            theta: default_theta(),
        }
    }

    fn diag_plain(id: &str, n1: u32) -> MarkovInput {
        MarkovInput {
            header: header(Family::lp_default(), n1, 1),
            kind: InputKind::Diagonal {
                mode: DiagonalMode::Plain,
                solver: ProgramRef {
                    id: id.to_string(),
                    size: id.len() as u64,
                },
                checker: None,
            },
        }
    }

    #[test]
    fn canonical_lines_are_frozen() {
        let exact = MarkovInput::exact(header(Family::lp_default(), 2, 1), q("1/2"), q("1/4")).unwrap();
        assert_eq!(
            exact.canonical_line(),
            "exact lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 u1=1/2 u2=1/4"
        );
        let sched = MarkovInput::schedule(header(Family::bp_default(), 3, 2), 2, 7).unwrap();
        assert_eq!(
            sched.canonical_line(),
            "schedule bp kappa=1/10 eta=1/20 p=inf n1=3 n2=2 theta=1/4 j=2 t=7"
        );
        let diag = MarkovInput {
            header: header(Family::lasso_default(), 2, 1),
            kind: InputKind::Diagonal {
                mode: DiagonalMode::Plain,
                solver: ProgramRef { id: "blind".into(), size: 5 },
                checker: None,
            },
        };
        assert_eq!(
            diag.canonical_line(),
            "diagonal lasso kappa=1/10 lambda=1/20 p=inf n1=2 n2=1 theta=1/4 mode=plain solver=blind size=5"
        );
        let diag_ef = MarkovInput {
            header: header(Family::lp_default(), 2, 1),
            kind: InputKind::Diagonal {
                mode: DiagonalMode::ExitFlag,
                solver: ProgramRef { id: "blind".into(), size: 5 },
                checker: Some(ProgramRef { id: "resolve".into(), size: 7 }),
            },
        };
        assert_eq!(
            diag_ef.canonical_line(),
            "diagonal lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 mode=exitflag solver=blind size=5 checker=resolve csize=7"
        );
    }

    #[test]
    fn parse_round_trips() {
        let lines = [
            "exact lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 u1=1/2 u2=1/4",
            "schedule bp kappa=1/10 eta=1/20 p=inf n1=3 n2=2 theta=1/4 j=2 t=7",
            "schedule lp kappa=1/10 p=2 n1=8 n2=1 theta=1/8 j=1 t=1",
            "diagonal lasso kappa=1/10 lambda=1/20 p=inf n1=2 n2=1 theta=1/4 mode=plain solver=blind size=5",
            "diagonal lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 mode=exitflag solver=blind size=5 checker=resolve csize=7",
        ];
        for line in lines {
            let parsed = MarkovInput::parse_line(line).unwrap();
            assert_eq!(parsed.canonical_line(), line);
            assert_eq!(parsed.len_bytes(), line.len() as u64);
        }
    }

    #[test]
    fn parse_rejects_non_canonical_lines() {
        let bad = [
            // double space
            "exact lp  kappa=1/10 p=inf n1=2 n2=1 theta=1/4 u1=1/2 u2=1/4",
            // non-canonical rational
            "exact lp kappa=2/20 p=inf n1=2 n2=1 theta=1/4 u1=1/2 u2=1/4",
            // integer spelled without denominator
            "exact lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 u1=1/2 u2=0",
            // leading zero in an integer field
            "exact lp kappa=1/10 p=inf n1=02 n2=1 theta=1/4 u1=1/2 u2=1/4",
            // trailing space
            "exact lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 u1=1/2 u2=1/4 ",
            // fields out of order
            "exact lp p=inf kappa=1/10 n1=2 n2=1 theta=1/4 u1=1/2 u2=1/4",
            // missing eta on bp
            "schedule bp kappa=1/10 p=inf n1=3 n2=2 theta=1/4 j=2 t=7",
            // eta on lp
            "schedule lp kappa=1/10 eta=1/20 p=inf n1=3 n2=2 theta=1/4 j=2 t=7",
            // bad axis
            "schedule lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 j=3 t=7",
            // t = 0
            "schedule lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 j=1 t=0",
            // out-of-box parameters
            "exact lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 u1=1/4 u2=1/4",
            // plain mode with checker fields
            "diagonal lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 mode=plain solver=blind size=5 checker=resolve csize=7",
            // exitflag without checker fields
            "diagonal lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 mode=exitflag solver=blind size=5",
            // unknown tag
            "mystery lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 u1=1/2 u2=1/4",
            // truncated
            "exact lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 u1=1/2",
            // bad escape
            "diagonal lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 mode=plain solver=bl%9Xd size=5",
            // dims violating n1 >= n2 + 1
            "exact lp kappa=1/10 p=inf n1=2 n2=2 theta=1/4 u1=1/2 u2=1/4",
        ];
        for line in bad {
            assert!(
                MarkovInput::parse_line(line).is_err(),
                "line should be rejected: {line:?}"
            );
        }
    }

    #[test]
    fn id_escaping_round_trips() {
        let id = "run solver --flag 50%\nsecond line";
        let escaped = escape_id(id);
        assert_eq!(escaped, "run%20solver%20--flag%2050%25%0Asecond%20line");
        assert_eq!(unescape_id(&escaped).unwrap(), id);
        let input = MarkovInput {
            header: header(Family::lp_default(), 2, 1),
            kind: InputKind::Diagonal {
                mode: DiagonalMode::Plain,
                solver: ProgramRef { id: id.to_string(), size: id.len() as u64 },
                checker: None,
            },
        };
        let line = input.canonical_line();
        assert!(!line.contains('\n'));
        assert_eq!(MarkovInput::parse_line(&line).unwrap(), input);
    }

    #[test]
    fn serde_uses_the_canonical_line() {
        let input = MarkovInput::schedule(header(Family::lp_default(), 2, 1), 1, 3).unwrap();
        let json = serde_json::to_string(&input).unwrap();
        assert_eq!(
            json,
            "\"schedule lp kappa=1/10 p=inf n1=2 n2=1 theta=1/4 j=1 t=3\""
        );
        let back: MarkovInput = serde_json::from_str(&json).unwrap();
        assert_eq!(back, input);
        assert!(serde_json::from_str::<MarkovInput>("\"exact lp kappa=2/20 p=inf n1=2 n2=1 theta=1/4 u1=1/2 u2=1/4\"").is_err());
    }

    #[test]
    fn descriptor_length_law() {
        let c = engine_constant(&Family::lp_default(), &default_theta(), 1).unwrap();
        for id in ["blind", "alwaysy2", "onequery", "snap4"] {
            for n1 in [2u32, 9, 10, 64, 100, 4096] {
                let input = diag_plain(id, n1);
                assert_eq!(
                    input.len_bytes(),
                    c + id.len() as u64 + decimal_digits(n1),
                    "length law failed for id={id} n1={n1}"
                );
            }
        }
        // Lengths of same-solver descriptors differ only in the dimension
        // digits.
        let a = diag_plain("blind", 2).len_bytes();
        let b = diag_plain("blind", 10).len_bytes();
        assert_eq!(b - a, 1);
    }

    #[test]
    fn engine_constant_varies_only_with_family_fields() {
        let lp = engine_constant(&Family::lp_default(), &default_theta(), 1).unwrap();
        let bp = engine_constant(&Family::bp_default(), &default_theta(), 1).unwrap();
        // bp inserts " eta=1/20" (9 bytes); the family tags have equal length.
        assert_eq!(bp, lp + 9);
        assert!(engine_constant(&Family::lp_default(), &default_theta(), 9).is_err());
    }
}
