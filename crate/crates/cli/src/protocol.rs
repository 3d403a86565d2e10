//! The line-delimited JSON wire protocol spoken to external subjects.
//!
//! Each record is one JSON object per line, discriminated by a `type`
//! field. The harness opens a run by sending a `problem` record (checkers
//! additionally receive the answer under judgment); the subject then
//! queries coordinates with `query`/`value` exchanges and terminates with
//! an `answer` (solvers) or `flag` (checkers) record. Randomized subjects
//! may interleave `need_bits`/`bits` exchanges to draw coin flips.
//!
//! Rationals travel as canonical `"num/den"` strings (vectors as
//! `["num", "den"]` pairs); anything that does not parse back canonically
//! is a protocol error — `"2/4"` is rejected, not normalized. Fuel is
//! never part of the conversation: the harness meters queries on its side
//! of the pipe, which keeps external runs deterministic whenever the
//! subject process is.
//!
//! This module also contains the subject-side servers used by the hidden
//! `subject` subcommand, which exposes a built-in program as an external
//! process for protocol and equivalence testing.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use gauntlet_core::exactnum::{QVec, Rational};
use gauntlet_core::markov::{
    CheckerProgram, CoordOracle, ProblemHeader, RunInterrupt, RunResult, SolverProgram,
};
use gauntlet_core::problems::{Dims, Family, FamilyKind};
use gauntlet_core::randomized::{BitString, RandomizedChecker, RandomizedSolver};
use gauntlet_core::{Error, Result};

/// One wire record. The serialized form is the protocol; field names and
/// the `type` discriminator are load-bearing.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WireRecord {
    /// Handshake from the harness: the full problem header, plus the
    /// answer under judgment when the subject is a checker.
    Problem {
        /// Family tag: `lp`, `bp`, or `lasso`.
        family: String,
        /// Solution-space dimension.
        #[serde(rename = "N1")]
        n1: u32,
        /// Constraint count.
        #[serde(rename = "N2")]
        n2: u32,
        /// Correctness radius, canonical `num/den`.
        kappa: String,
        /// Relaxation level; present exactly for `bp`.
        #[serde(skip_serializing_if = "Option::is_none")]
        eta: Option<String>,
        /// Regularization weight; present exactly for `lasso`.
        #[serde(skip_serializing_if = "Option::is_none")]
        lambda: Option<String>,
        /// Norm tag: `inf` or a positive integer.
        p: String,
        /// Box floor of the admissible parameter set.
        theta: String,
        /// The solver answer a checker must judge; absent for solvers.
        #[serde(skip_serializing_if = "Option::is_none")]
        answer: Option<Vec<[String; 2]>>,
    },
    /// Subject asks for one coordinate at one dyadic precision.
    Query {
        /// 1-indexed coordinate.
        coord: u64,
        /// Requested precision `n ≥ 1`.
        precision: u64,
    },
    /// Harness answers a query.
    Value {
        /// Canonical `num/den`.
        q: String,
    },
    /// Terminal record of a solver run.
    Answer {
        /// The candidate minimizer, entrywise `[num, den]`.
        vector: Vec<[String; 2]>,
    },
    /// Terminal record of a checker run.
    Flag {
        /// Exit flag, `0` or `1`.
        value: u8,
    },
    /// Randomized subject requests `count` further coin flips.
    NeedBits {
        /// How many flips beyond those already delivered.
        count: u64,
    },
    /// Harness delivers requested flips, oldest first.
    Bits {
        /// Flip characters `0`/`1`.
        s: String,
    },
}

/// Serializes one record as its wire line (no trailing newline).
pub fn encode(record: &WireRecord) -> String {
    serde_json::to_string(record).expect("wire records always serialize")
}

/// Parses one wire line; anything malformed is a protocol error.
pub fn decode(line: &str) -> Result<WireRecord> {
    serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Protocol(format!("malformed wire record {line:?}: {e}")))
}

/// Writes one record and flushes, so the peer can act on it immediately.
pub fn write_record(w: &mut dyn Write, record: &WireRecord) -> Result<()> {
    let line = encode(record);
    writeln!(w, "{line}")
        .and_then(|()| w.flush())
        .map_err(|e| Error::Protocol(format!("writing wire record: {e}")))
}

/// Reads one record; `None` means the peer closed the stream between
/// records.
pub fn read_record(r: &mut dyn BufRead) -> Result<Option<WireRecord>> {
    let mut line = String::new();
    let n = r
        .read_line(&mut line)
        .map_err(|e| Error::Protocol(format!("reading wire record: {e}")))?;
    if n == 0 {
        return Ok(None);
    }
    decode(&line).map(Some)
}

/// Renders a vector for the wire: entrywise `[numerator, denominator]`.
pub fn vec_to_wire(v: &QVec) -> Vec<[String; 2]> {
    v.entries()
        .iter()
        .map(|q| [q.numer().to_string(), q.denom().to_string()])
        .collect()
}

/// Parses a wire vector, insisting on canonical entries and the expected
/// dimension.
pub fn wire_to_vec(pairs: &[[String; 2]], dim: usize) -> Result<QVec> {
    if pairs.len() != dim {
        return Err(Error::Protocol(format!(
            "wire vector has dimension {}, expected {dim}",
            pairs.len()
        )));
    }
    let mut entries = Vec::with_capacity(pairs.len());
    for [num, den] in pairs {
        let q = Rational::parse_canonical(&format!("{num}/{den}"))
            .map_err(|e| Error::Protocol(format!("non-canonical wire rational: {e}")))?;
        entries.push(q);
    }
    Ok(QVec::from_entries(entries))
}

/// The handshake record for a header, with the answer under judgment when
/// the subject is a checker.
pub fn problem_record(header: &ProblemHeader, answer: Option<&QVec>) -> WireRecord {
    let (eta, lambda) = match &header.family.kind {
        FamilyKind::Lp => (None, None),
        FamilyKind::Bp { eta } => (Some(eta.to_string()), None),
        FamilyKind::Lasso { lambda } => (None, Some(lambda.to_string())),
    };
    WireRecord::Problem {
        family: header.family.kind.tag().to_string(),
        n1: header.dims.n1,
        n2: header.dims.n2,
        kappa: header.family.kappa.to_string(),
        eta,
        lambda,
        p: header.family.p.to_string(),
        theta: header.theta.to_string(),
        answer: answer.map(vec_to_wire),
    }
}

fn parse_wire_rational(s: &str, what: &str) -> Result<Rational> {
    Rational::parse_canonical(s)
        .map_err(|e| Error::Protocol(format!("non-canonical {what} in problem record: {e}")))
}

/// Reconstructs the header (and checker answer, if present) from a
/// handshake record.
pub fn header_from_problem(record: &WireRecord) -> Result<(ProblemHeader, Option<QVec>)> {
    let WireRecord::Problem {
        family,
        n1,
        n2,
        kappa,
        eta,
        lambda,
        p,
        theta,
        answer,
    } = record
    else {
        return Err(Error::Protocol(format!(
            "expected a problem record, got {record:?}"
        )));
    };
    let kappa = parse_wire_rational(kappa, "kappa")?;
    let kind = match (family.as_str(), eta, lambda) {
        ("lp", None, None) => FamilyKind::Lp,
        ("bp", Some(eta), None) => FamilyKind::Bp {
            eta: parse_wire_rational(eta, "eta")?,
        },
        ("lasso", None, Some(lambda)) => FamilyKind::Lasso {
            lambda: parse_wire_rational(lambda, "lambda")?,
        },
        _ => {
            return Err(Error::Protocol(format!(
                "problem record family {family:?} with eta={eta:?} lambda={lambda:?} is invalid"
            )))
        }
    };
    let p = p
        .parse()
        .map_err(|e| Error::Protocol(format!("bad p in problem record: {e}")))?;
    let family = Family::new(kind, kappa, p).map_err(|e| Error::Protocol(e.to_string()))?;
    let dims = Dims::new(*n1, *n2).map_err(|e| Error::Protocol(e.to_string()))?;
    let theta = parse_wire_rational(theta, "theta")?;
    let header = ProblemHeader { family, dims, theta };
    let answer = match answer {
        None => None,
        Some(pairs) => Some(wire_to_vec(pairs, header.dims.n1 as usize)?),
    };
    Ok((header, answer))
}

/// The oracle a served subject sees: every query crosses the pipe to the
/// harness, which meters it and either answers or hangs up.
struct WireOracle<'a> {
    input: &'a mut dyn BufRead,
    output: &'a mut dyn Write,
}

impl CoordOracle for WireOracle<'_> {
    fn query(&mut self, coord: usize, precision: u64) -> RunResult<Rational> {
        write_record(
            self.output,
            &WireRecord::Query {
                coord: coord as u64,
                precision,
            },
        )?;
        match read_record(self.input)? {
            // The harness hangs up mid-run exactly when its fuel meter
            // aborts the run; unwind cooperatively.
            None => Err(RunInterrupt::Fuel),
            Some(WireRecord::Value { q }) => {
                Ok(parse_wire_rational(&q, "oracle value").map_err(RunInterrupt::Fault)?)
            }
            Some(other) => Err(RunInterrupt::Fault(Error::Protocol(format!(
                "expected a value record, got {other:?}"
            )))),
        }
    }
}

fn read_handshake(
    input: &mut dyn BufRead,
    expect_answer: bool,
) -> Result<(ProblemHeader, Option<QVec>)> {
    let record = read_record(input)?
        .ok_or_else(|| Error::Protocol("stream closed before the problem record".into()))?;
    let (header, answer) = header_from_problem(&record)?;
    if expect_answer != answer.is_some() {
        return Err(Error::Protocol(format!(
            "problem record {} an answer",
            if expect_answer {
                "is missing"
            } else {
                "unexpectedly carries"
            }
        )));
    }
    Ok((header, answer))
}

/// Exposes a solver on a stream pair: one handshake, one run, one answer.
/// A fuel hang-up from the harness ends the run silently.
pub fn serve_solver(
    solver: &dyn SolverProgram,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<()> {
    let (header, _) = read_handshake(input, false)?;
    let mut oracle = WireOracle {
        input: &mut *input,
        output: &mut *output,
    };
    match solver.solve(&header, &mut oracle) {
        Ok(answer) => write_record(
            output,
            &WireRecord::Answer {
                vector: vec_to_wire(&answer),
            },
        ),
        Err(RunInterrupt::Fuel) => Ok(()),
        Err(RunInterrupt::Fault(e)) => Err(e),
    }
}

/// Exposes a checker on a stream pair; the handshake carries the answer
/// under judgment.
pub fn serve_checker(
    checker: &dyn CheckerProgram,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<()> {
    let (header, answer) = read_handshake(input, true)?;
    let answer = answer.expect("handshake validated the answer's presence");
    let mut oracle = WireOracle {
        input: &mut *input,
        output: &mut *output,
    };
    match checker.check(&header, &answer, &mut oracle) {
        Ok(value) => write_record(output, &WireRecord::Flag { value }),
        Err(RunInterrupt::Fuel) => Ok(()),
        Err(RunInterrupt::Fault(e)) => Err(e),
    }
}

/// Asks the harness for one more flip and returns the extended prefix;
/// `None` when the harness hangs up because the current run's flip budget
/// is spent.
fn request_flip(
    flips: &mut Vec<bool>,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<Option<()>> {
    write_record(output, &WireRecord::NeedBits { count: 1 })?;
    match read_record(input)? {
        None => Ok(None),
        Some(WireRecord::Bits { s }) => {
            let new = BitString::parse(&s).map_err(|e| Error::Protocol(e.to_string()))?;
            if new.len() != 1 {
                return Err(Error::Protocol(format!(
                    "requested 1 flip, received {}",
                    new.len()
                )));
            }
            flips.push(new.bit(0).expect("length checked"));
            Ok(Some(()))
        }
        Some(other) => Err(Error::Protocol(format!(
            "expected a bits record, got {other:?}"
        ))),
    }
}

/// Exposes a randomized solver: flips are drawn one at a time through
/// `need_bits` exchanges until the machine halts on the delivered prefix.
/// The harness hangs up the flip supply to end a run whose prefix is
/// exhausted, which the served subject treats as a clean exit.
pub fn serve_randomized_solver(
    solver: &dyn RandomizedSolver,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<()> {
    let (header, _) = read_handshake(input, false)?;
    let mut flips: Vec<bool> = Vec::new();
    loop {
        let coins = BitString::from_bits(flips.clone());
        let mut oracle = WireOracle {
            input: &mut *input,
            output: &mut *output,
        };
        match solver.solve_with_coins(&header, &coins, &mut oracle) {
            Ok(Some(answer)) => {
                return write_record(
                    output,
                    &WireRecord::Answer {
                        vector: vec_to_wire(&answer),
                    },
                )
            }
            Ok(None) => {
                if request_flip(&mut flips, input, output)?.is_none() {
                    return Ok(());
                }
            }
            Err(RunInterrupt::Fuel) => return Ok(()),
            Err(RunInterrupt::Fault(e)) => return Err(e),
        }
    }
}

/// Exposes a randomized checker; see [`serve_randomized_solver`].
pub fn serve_randomized_checker(
    checker: &dyn RandomizedChecker,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<()> {
    let (header, answer) = read_handshake(input, true)?;
    let answer = answer.expect("handshake validated the answer's presence");
    let mut flips: Vec<bool> = Vec::new();
    loop {
        let coins = BitString::from_bits(flips.clone());
        let mut oracle = WireOracle {
            input: &mut *input,
            output: &mut *output,
        };
        match checker.check_with_coins(&header, &answer, &coins, &mut oracle) {
            Ok(Some(value)) => return write_record(output, &WireRecord::Flag { value }),
            Ok(None) => {
                if request_flip(&mut flips, input, output)?.is_none() {
                    return Ok(());
                }
            }
            Err(RunInterrupt::Fuel) => return Ok(()),
            Err(RunInterrupt::Fault(e)) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gauntlet_core::problems::default_theta;

    fn lp_header() -> ProblemHeader {
        ProblemHeader {
            family: Family::lp_default(),
            dims: Dims::new(2, 1).unwrap(),
            theta: default_theta(),
        }
    }

    #[test]
    fn record_lines_are_frozen() {
        let header = lp_header();
        let answer = QVec::axis_scaled(2, 0, Rational::new(2, 5).unwrap()).unwrap();
        assert_eq!(
            encode(&problem_record(&header, None)),
            r#"{"type":"problem","family":"lp","N1":2,"N2":1,"kappa":"1/10","p":"inf","theta":"1/4"}"#
        );
        assert_eq!(
            encode(&problem_record(&header, Some(&answer))),
            r#"{"type":"problem","family":"lp","N1":2,"N2":1,"kappa":"1/10","p":"inf","theta":"1/4","answer":[["2","5"],["0","1"]]}"#
        );
        assert_eq!(
            encode(&WireRecord::Query { coord: 1, precision: 4 }),
            r#"{"type":"query","coord":1,"precision":4}"#
        );
        assert_eq!(
            encode(&WireRecord::Value { q: "31/64".into() }),
            r#"{"type":"value","q":"31/64"}"#
        );
        assert_eq!(
            encode(&WireRecord::Flag { value: 0 }),
            r#"{"type":"flag","value":0}"#
        );
        assert_eq!(
            encode(&WireRecord::NeedBits { count: 1 }),
            r#"{"type":"need_bits","count":1}"#
        );
        assert_eq!(
            encode(&WireRecord::Bits { s: "01".into() }),
            r#"{"type":"bits","s":"01"}"#
        );
    }

    #[test]
    fn problem_records_round_trip_for_all_families() {
        for family in Family::all_defaults() {
            let header = ProblemHeader {
                family,
                dims: Dims::new(3, 2).unwrap(),
                theta: default_theta(),
            };
            let record = problem_record(&header, None);
            let line = encode(&record);
            let decoded = decode(&line).unwrap();
            let (back, answer) = header_from_problem(&decoded).unwrap();
            assert_eq!(back, header);
            assert!(answer.is_none());
        }
    }

    #[test]
    fn non_canonical_rationals_are_protocol_errors() {
        let bad = wire_to_vec(&[["2".into(), "4".into()], ["0".into(), "1".into()]], 2);
        assert!(matches!(bad, Err(Error::Protocol(_))));
        let negative_den = wire_to_vec(&[["1".into(), "-2".into()], ["0".into(), "1".into()]], 2);
        assert!(matches!(negative_den, Err(Error::Protocol(_))));
        let short = wire_to_vec(&[["1".into(), "2".into()]], 2);
        assert!(matches!(short, Err(Error::Protocol(_))));
    }

    #[test]
    fn malformed_lines_are_protocol_errors() {
        for line in [
            "",
            "{",
            r#"{"type":"mystery"}"#,
            r#"{"type":"value"}"#,
            r#"{"type":"query","coord":1,"precision":4,"extra":true}"#,
        ] {
            assert!(matches!(decode(line), Err(Error::Protocol(_))));
        }
    }

    #[test]
    fn eta_and_lambda_are_tied_to_their_families() {
        // An eta field on the lp family does not form a valid header.
        let tampered = WireRecord::Problem {
            family: "lp".into(),
            n1: 2,
            n2: 1,
            kappa: "1/10".into(),
            eta: Some("1/20".into()),
            lambda: None,
            p: "inf".into(),
            theta: "1/4".into(),
            answer: None,
        };
        assert!(matches!(
            header_from_problem(&tampered),
            Err(Error::Protocol(_))
        ));
    }
}
