//! Subcommand implementations and the argument surface of the binary.
//!
//! Every command returns the process exit code on success; errors bubble
//! to the binary, which maps them through [`crate::exit_code_for`]. The
//! convention: 0 success, 1 for an attack that ended in a recorded
//! alpha-range violation, 2 configuration or usage, 3 wire-protocol
//! violation, 4 failure of the harness's own re-checks.

use std::io::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gauntlet_core::adversary::{batch_attack, exit_flag_attack, ExitFlagAttack};
use gauntlet_core::exactnum::{DistanceWitness, QVec, Rational};
use gauntlet_core::markov::descriptor::{decimal_digits, engine_constant, InputKind, MarkovInput};
use gauntlet_core::markov::engine::Engine;
use gauntlet_core::markov::ProblemHeader;
use gauntlet_core::problems::{
    brute_force_oracle, build_instance, grid_gap_bound, objective_value, optimal_value, Dims,
    Family, InstanceParams,
};
use gauntlet_core::randomized::{n0_for_margin, Bernoulli, DerandomizedChecker};
use gauntlet_core::trustworthy::{run_giving_up, unmetered, EngineOracle, GammaTower, TrustworthyOutcome};
use gauntlet_core::{Error, Result};

use crate::config::HarnessConfig;
use crate::protocol;
use crate::store::{CertificateStore, StoredCertificate};

/// Adversarial test harness for numerical solvers on exact rational
/// problem instances.
#[derive(Parser, Debug)]
#[command(name = "gauntlet", version, about)]
pub struct Cli {
    /// Configuration file (TOML); defaults to gauntlet.toml when present.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: CommandKind,
}

/// The subcommands.
#[derive(Subcommand, Debug)]
pub enum CommandKind {
    /// Manufacture failure certificates against a registered solver
    /// across a ladder of problem dimensions.
    Attack(AttackArgs),
    /// Manufacture an exit-flag certificate against a solver/checker pair.
    AttackExitflag(AttackExitflagArgs),
    /// Derandomize a randomized checker, then attack the result.
    AttackRandomChecker(AttackRandomCheckerArgs),
    /// Run the abstaining solver tower on one input descriptor.
    Trustworthy(TrustworthyArgs),
    /// Cross-check the closed-form optima against the grid oracle.
    VerifyFormulas(VerifyFormulasArgs),
    /// Re-verify and tabulate the certificate store.
    Report(ReportArgs),
    /// Serve a registered subject on stdin/stdout (wire protocol).
    #[command(hide = true)]
    Subject(SubjectArgs),
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    /// Registered solver id to attack.
    #[arg(long)]
    pub solver: String,
    /// Number of certificates; dimensions run n1, n1+1, … with one row.
    #[arg(long, default_value_t = 1)]
    pub count: u32,
    /// Base dimension of the ladder (default: the configured n1).
    #[arg(long)]
    pub n1: Option<u32>,
}

#[derive(Args, Debug)]
pub struct AttackExitflagArgs {
    /// Registered solver id.
    #[arg(long)]
    pub solver: String,
    /// Registered checker id.
    #[arg(long)]
    pub checker: String,
    /// Plausibility tolerance (default: the configured alpha).
    #[arg(long)]
    pub alpha: Option<String>,
}

#[derive(Args, Debug)]
pub struct AttackRandomCheckerArgs {
    /// Registered solver id.
    #[arg(long)]
    pub solver: String,
    /// Configured randomized checker name.
    #[arg(long)]
    pub checker: String,
    /// Success probability the checker is claimed to have (> 1/2).
    #[arg(long)]
    pub p: String,
    /// Flag to fall back to when extraction exhausts all halting prefixes.
    #[arg(long, default_value_t = 0)]
    pub fallback: u8,
    /// Stage cap for the extraction loop.
    #[arg(long, default_value_t = crate::config::DEFAULT_STAGES)]
    pub stages: u64,
    /// Plausibility tolerance (default: the configured alpha).
    #[arg(long)]
    pub alpha: Option<String>,
}

#[derive(Args, Debug)]
pub struct TrustworthyArgs {
    /// Input descriptor line.
    #[arg(long, value_name = "LINE", conflicts_with = "file")]
    pub descriptor: Option<String>,
    /// File whose first line is the input descriptor.
    #[arg(long, value_name = "PATH")]
    pub file: Option<PathBuf>,
    /// Abstention level: the solver answers only when the gap resolves
    /// within this many levels (default: the configured gamma budget).
    #[arg(long)]
    pub budget: Option<u64>,
}

#[derive(Args, Debug)]
pub struct VerifyFormulasArgs {
    /// Sampled parameter pairs per family.
    #[arg(long, default_value_t = 20)]
    pub samples: u32,
    /// Grid step of the brute-force oracle.
    #[arg(long, default_value = "1/200")]
    pub step: String,
    /// Seed for the (deterministic) parameter sampler.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Emit CSV instead of the aligned table.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args, Debug)]
pub struct SubjectArgs {
    /// Serve a registered solver.
    #[arg(long)]
    pub solver: Option<String>,
    /// Serve a registered checker.
    #[arg(long)]
    pub checker: Option<String>,
    /// Serve a configured randomized solver.
    #[arg(long)]
    pub randomized_solver: Option<String>,
    /// Serve a configured randomized checker.
    #[arg(long)]
    pub randomized_checker: Option<String>,
}

/// Runs a parsed invocation and returns the exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let config = HarnessConfig::load(cli.config.as_deref())?;
    match cli.command {
        CommandKind::Attack(args) => cmd_attack(&config, &args),
        CommandKind::AttackExitflag(args) => cmd_attack_exitflag(&config, &args),
        CommandKind::AttackRandomChecker(args) => cmd_attack_random_checker(config, &args),
        CommandKind::Trustworthy(args) => cmd_trustworthy(&config, &args),
        CommandKind::VerifyFormulas(args) => cmd_verify_formulas(&config, &args),
        CommandKind::Report(args) => cmd_report(&config, &args),
        CommandKind::Subject(args) => cmd_subject(&config, &args),
    }
}

/// Renders a rational for tables: integers without the denominator.
fn render_q(q: &Rational) -> String {
    if q.denom() == &1.into() {
        q.numer().to_string()
    } else {
        q.to_string()
    }
}

/// Renders a vector as `(a,b,…)`.
fn render_vec(v: &QVec) -> String {
    let entries: Vec<String> = v.entries().iter().map(render_q).collect();
    format!("({})", entries.join(","))
}

/// Renders a distance witness; non-unit powers report the stored power.
fn render_distance(w: &DistanceWitness) -> String {
    if w.power == 1 {
        render_q(&w.value)
    } else {
        format!("({})^(1/{})", render_q(&w.value), w.power)
    }
}

fn cmd_attack(config: &HarnessConfig, args: &AttackArgs) -> Result<i32> {
    let base_n1 = args.n1.unwrap_or(config.dims.n1);
    let engine = Engine::new(&config.registry);
    let store = CertificateStore::open(&config.store_dir)?;
    let solver = config.registry.solver(&args.solver)?;
    let constant = engine_constant(&config.family, &config.theta, 1)?;

    // Reference descriptor at the ladder base: every rung must measure the
    // same except for the dimension digits.
    let reference = MarkovInput::diagonal_plain(
        ProblemHeader {
            family: config.family.clone(),
            dims: Dims::new(base_n1, 1)?,
            theta: config.theta.clone(),
        },
        &*solver,
    );
    let base_bytes = reference.len_bytes() - decimal_digits(base_n1);

    println!(
        "attacking solver {:?} ({} family, ladder n1={}..={}, one row)",
        args.solver,
        config.family.kind.tag(),
        base_n1,
        base_n1 + args.count.saturating_sub(1),
    );
    let certs = batch_attack(
        &engine,
        &args.solver,
        config.family.clone(),
        base_n1,
        args.count,
        config.theta.clone(),
    )?;
    for cert in &certs {
        // Independent re-check before anything is persisted or printed as
        // evidence; a failure here is a harness defect, not a finding.
        cert.verify(&engine)?;
        let n1 = cert.input.header.dims.n1;
        let bytes = cert.input.len_bytes();
        let expected = base_bytes + decimal_digits(n1);
        if bytes != expected {
            return Err(Error::Verification(format!(
                "descriptor length {bytes} at n1={n1} differs from the ladder law \
                 {base_bytes}+digits(n1)={expected}"
            )));
        }
        let file = store.append(&StoredCertificate::Failure(cert.clone()))?;
        println!(
            "n1={n1} verdict={} fuel={} distance={} bytes={bytes} file={file}",
            cert.verdict,
            cert.fuel,
            render_distance(&cert.distance),
        );
    }
    println!(
        "engine constant C={constant}; ladder lengths differ only in the dimension digits; \
         {} certificate(s) re-verified into {}",
        certs.len(),
        store.dir().display(),
    );
    Ok(0)
}

fn resolve_alpha(config: &HarnessConfig, flag: &Option<String>) -> Result<Rational> {
    match flag {
        Some(s) => Rational::parse_canonical(s)
            .map_err(|e| Error::Config(format!("bad alpha {s:?}: {e}"))),
        None => Ok(config.alpha.clone()),
    }
}

fn run_exit_flag_attack(
    config: &HarnessConfig,
    solver: &str,
    checker: &str,
    alpha: &Rational,
) -> Result<i32> {
    let engine = Engine::new(&config.registry);
    let store = CertificateStore::open(&config.store_dir)?;
    println!(
        "attacking pair ({solver:?}, {checker:?}) at n1={} n2={} ({} family, alpha={})",
        config.dims.n1,
        config.dims.n2,
        config.family.kind.tag(),
        render_q(alpha),
    );
    let outcome = exit_flag_attack(
        &engine,
        solver,
        checker,
        config.family.clone(),
        config.dims,
        config.theta.clone(),
        alpha,
    )?;
    match outcome {
        ExitFlagAttack::Certificate(cert) => {
            cert.verify(&engine)?;
            let file = store.append(&StoredCertificate::ExitFlag(cert.clone()))?;
            println!(
                "certificate: verdict={} fuel={} checker flag={} truth flag={} distance={} file={file}",
                cert.verdict,
                cert.fuel,
                cert.flag,
                cert.truth_flag,
                render_distance(&cert.distance),
            );
            Ok(0)
        }
        ExitFlagAttack::RangeViolation(record) => {
            record.verify(&engine)?;
            let file = store.append(&StoredCertificate::RangeViolation(record.clone()))?;
            println!(
                "alpha-range violation: on the rejecting branch the solver answered {} from \
                 the degenerate solution segment, beyond alpha={}; the exit-flag attack does \
                 not apply to this pair (recorded as {file})",
                render_distance(&record.distance),
                render_q(&record.alpha),
            );
            Ok(1)
        }
    }
}

fn cmd_attack_exitflag(config: &HarnessConfig, args: &AttackExitflagArgs) -> Result<i32> {
    let alpha = resolve_alpha(config, &args.alpha)?;
    run_exit_flag_attack(config, &args.solver, &args.checker, &alpha)
}

fn cmd_attack_random_checker(
    mut config: HarnessConfig,
    args: &AttackRandomCheckerArgs,
) -> Result<i32> {
    let alpha = resolve_alpha(&config, &args.alpha)?;
    let p = Rational::parse_canonical(&args.p)
        .map_err(|e| Error::Config(format!("bad success probability {:?}: {e}", args.p)))?;
    let inner = config
        .randomized_checkers
        .get(&args.checker)
        .cloned()
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown randomized checker {:?} (configured: {:?})",
                args.checker,
                config.randomized_checkers.keys().collect::<Vec<_>>(),
            ))
        })?;
    let n0 = n0_for_margin(&p)?;
    let wrapped = DerandomizedChecker::new(
        inner,
        Arc::new(Bernoulli::fair()),
        p.clone(),
        args.fallback,
        args.stages,
    )?;
    let id = {
        use gauntlet_core::markov::CheckerProgram as _;
        wrapped.id().to_string()
    };
    println!(
        "derandomizing checker {:?} under the fair coin: success p={} (cylinder precision \
         n0={n0}), fallback flag {}, stage cap {}; registered as {id:?}",
        args.checker,
        render_q(&p),
        args.fallback,
        args.stages,
    );
    // The wrap replaces any configured checker of the same id, so the flags
    // passed here always win over a stale entry; stored certificates verify
    // relative to whatever the configuration binds to the id later.
    config.registry.replace_checker(Arc::new(wrapped))?;
    run_exit_flag_attack(&config, &args.solver, &id, &alpha)
}

fn cmd_trustworthy(config: &HarnessConfig, args: &TrustworthyArgs) -> Result<i32> {
    let line = match (&args.descriptor, &args.file) {
        (Some(line), None) => line.clone(),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            text.lines()
                .next()
                .ok_or_else(|| Error::Parse("descriptor file is empty".into()))?
                .to_string()
        }
        _ => {
            return Err(Error::Config(
                "pass exactly one of --descriptor or --file".into(),
            ))
        }
    };
    let input = MarkovInput::parse_line(&line)?;
    let budget = args.budget.unwrap_or(config.gamma_budget);
    let engine = Engine::new(&config.registry);
    let mut oracle = EngineOracle::new(&engine, &input);
    let report = unmetered(run_giving_up(
        &GammaTower,
        budget,
        &input.header,
        &mut oracle,
    ))?;
    match report.outcome {
        TrustworthyOutcome::Answer(y) => {
            let level = report
                .first_answer_level
                .expect("answers carry their first level");
            println!("Answer {} at n'={level}", render_vec(&y));
        }
        TrustworthyOutcome::IDontKnow => println!("I don't know"),
    }
    Ok(0)
}

/// Draws one parameter pair from `L_θ`: at most one coordinate moves off
/// `1/2`, on an even 4096-step lattice over `[θ, 1/2]`.
fn sample_params(rng: &mut ChaCha8Rng, theta: &Rational) -> (Rational, Rational) {
    let half = Rational::new(1, 2).expect("constant");
    let lattice = Rational::from_int(rng.gen_range(0..=4096));
    let span = &half - theta;
    let value = theta + &(span * lattice / Rational::from_int(4096));
    match rng.gen_range(0..3u8) {
        0 => (half.clone(), half),
        1 => (value, half),
        _ => (half, value),
    }
}

fn cmd_verify_formulas(config: &HarnessConfig, args: &VerifyFormulasArgs) -> Result<i32> {
    if args.samples == 0 {
        return Err(Error::Config("samples must be positive".into()));
    }
    let step = Rational::parse_canonical(&args.step)
        .map_err(|e| Error::Config(format!("bad grid step {:?}: {e}", args.step)))?;
    let dims = Dims::new(2, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    for family in Family::all_defaults() {
        let mut max_gap = Rational::zero();
        for _ in 0..args.samples {
            let (u1, u2) = sample_params(&mut rng, &config.theta);
            let inst = build_instance(
                family.clone(),
                dims,
                InstanceParams::new(u1, u2, config.theta.clone())?,
            )?;
            let optimum = optimal_value(&inst)?;
            let grid_point = brute_force_oracle(&inst, &step)?;
            let grid = objective_value(&inst, &grid_point)?;
            if !grid.feasible {
                return Err(Error::Verification(
                    "grid oracle returned an infeasible point".into(),
                ));
            }
            let gap = &grid.value - &optimum;
            if gap.is_negative() {
                return Err(Error::Verification(format!(
                    "grid objective {} undercuts the closed-form optimum {} on {} at u=({}, {})",
                    render_q(&grid.value),
                    render_q(&optimum),
                    family.kind.tag(),
                    render_q(&inst.params.u1),
                    render_q(&inst.params.u2),
                )));
            }
            let bound = grid_gap_bound(&inst, &step)?;
            if gap > bound {
                return Err(Error::Verification(format!(
                    "grid gap {} exceeds the Lipschitz bound {} on {} at u=({}, {})",
                    render_q(&gap),
                    render_q(&bound),
                    family.kind.tag(),
                    render_q(&inst.params.u1),
                    render_q(&inst.params.u2),
                )));
            }
            if gap > max_gap {
                max_gap = gap;
            }
        }
        println!(
            "family={} samples={} step={} max_gap={} (within the per-instance grid bound)",
            family.kind.tag(),
            args.samples,
            render_q(&step),
            render_q(&max_gap),
        );
    }
    println!("closed forms confirmed against the grid oracle");
    Ok(0)
}

/// One table row of the report, already rendered.
struct ReportRow {
    cells: Vec<String>,
}

const REPORT_COLUMNS: [&str; 13] = [
    "file", "kind", "family", "n1", "n2", "solver", "checker", "verdict", "fuel", "flag",
    "truth", "distance", "alpha",
];

fn report_row(file: &str, cert: &StoredCertificate) -> ReportRow {
    let input = cert.input();
    let header = &input.header;
    let (solver, checker) = match &input.kind {
        InputKind::Diagonal { solver, checker, .. } => (
            solver.id.clone(),
            checker.as_ref().map(|c| c.id.clone()),
        ),
        _ => (String::from("-"), None),
    };
    let dash = || String::from("-");
    let (verdict, fuel, flag, truth, distance, alpha) = match cert {
        StoredCertificate::Failure(c) => (
            c.verdict.to_string(),
            c.fuel.to_string(),
            dash(),
            dash(),
            render_distance(&c.distance),
            dash(),
        ),
        StoredCertificate::ExitFlag(c) => (
            c.verdict.to_string(),
            c.fuel.to_string(),
            c.flag.to_string(),
            c.truth_flag.to_string(),
            render_distance(&c.distance),
            render_q(&c.alpha),
        ),
        StoredCertificate::RangeViolation(c) => (
            c.verdict.to_string(),
            c.fuel.to_string(),
            c.flag.to_string(),
            dash(),
            render_distance(&c.distance),
            render_q(&c.alpha),
        ),
    };
    ReportRow {
        cells: vec![
            file.to_string(),
            cert.kind_tag().to_string(),
            header.family.kind.tag().to_string(),
            header.dims.n1.to_string(),
            header.dims.n2.to_string(),
            solver,
            checker.unwrap_or_else(dash),
            verdict,
            fuel,
            flag,
            truth,
            distance,
            alpha,
        ],
    }
}

fn csv_escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

fn cmd_report(config: &HarnessConfig, args: &ReportArgs) -> Result<i32> {
    let store = CertificateStore::open(&config.store_dir)?;
    let engine = Engine::new(&config.registry);
    let records = store.load_all()?;
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for (file, cert) in &records {
        if let Err(e) = cert.verify(&engine) {
            failures.push(format!("{file}: {e}"));
        }
        rows.push(report_row(file, cert));
    }

    let out = std::io::stdout();
    let mut out = out.lock();
    if args.csv {
        writeln!(out, "{}", REPORT_COLUMNS.join(",")).ok();
        for row in &rows {
            let line: Vec<String> = row.cells.iter().map(|c| csv_escape(c)).collect();
            writeln!(out, "{}", line.join(",")).ok();
        }
    } else {
        let mut widths: Vec<usize> = REPORT_COLUMNS.iter().map(|c| c.len()).collect();
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(&row.cells) {
                *w = (*w).max(cell.len());
            }
        }
        let render = |cells: Vec<String>| -> String {
            cells
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        writeln!(
            out,
            "{}",
            render(REPORT_COLUMNS.iter().map(|c| c.to_string()).collect())
        )
        .ok();
        for row in &rows {
            writeln!(out, "{}", render(row.cells.clone())).ok();
        }
        writeln!(out, "{} record(s), {} failed re-verification", rows.len(), failures.len()).ok();
    }
    drop(out);

    if failures.is_empty() {
        Ok(0)
    } else {
        Err(Error::Verification(format!(
            "{} stored certificate(s) failed re-verification: {}",
            failures.len(),
            failures.join("; ")
        )))
    }
}

fn cmd_subject(config: &HarnessConfig, args: &SubjectArgs) -> Result<i32> {
    let picks = [
        &args.solver,
        &args.checker,
        &args.randomized_solver,
        &args.randomized_checker,
    ];
    if picks.iter().filter(|p| p.is_some()).count() != 1 {
        return Err(Error::Config(
            "pass exactly one of --solver, --checker, --randomized-solver, \
             --randomized-checker"
                .into(),
        ));
    }
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut input = stdin.lock();
    let mut output = stdout.lock();
    if let Some(id) = &args.solver {
        let solver = config.registry.solver(id)?;
        protocol::serve_solver(&*solver, &mut input, &mut output)?;
    } else if let Some(id) = &args.checker {
        let checker = config.registry.checker(id)?;
        protocol::serve_checker(&*checker, &mut input, &mut output)?;
    } else if let Some(id) = &args.randomized_solver {
        let solver = config
            .randomized_solvers
            .get(id)
            .ok_or_else(|| Error::Config(format!("unknown randomized solver {id:?}")))?;
        protocol::serve_randomized_solver(&**solver, &mut input, &mut output)?;
    } else if let Some(id) = &args.randomized_checker {
        let checker = config
            .randomized_checkers
            .get(id)
            .ok_or_else(|| Error::Config(format!("unknown randomized checker {id:?}")))?;
        protocol::serve_randomized_checker(&**checker, &mut input, &mut output)?;
    }
    Ok(0)
}
