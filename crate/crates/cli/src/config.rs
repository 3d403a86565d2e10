//! Harness configuration.
//!
//! Configuration is a TOML file; every section is optional and omitted
//! sections fall back to the defaults described on [`HarnessConfig`].
//! Rationals are written as canonical `"num/den"` strings throughout.
//!
//! ```toml
//! theta = "1/4"
//!
//! [family]
//! kind = "bp"        # lp | bp | lasso
//! kappa = "1/10"
//! eta = "1/20"       # bp only; lasso uses lambda
//! p = "inf"
//!
//! [dims]
//! n1 = 2
//! n2 = 1
//!
//! [store]
//! dir = "certs"
//!
//! [limits]
//! gamma_budget = 64
//! alpha = "1/20"
//!
//! [solvers.blind]
//! builtin = "blind"
//!
//! [solvers.mysolver]
//! command = "./mysolver"
//! args = ["--fast"]
//! size = 120
//! timeout_ms = 5000
//!
//! [checkers.resolve]
//! builtin = "resolve"
//! guards = "blind"   # the solver it re-runs
//! budget = 10
//! ```
//!
//! A subject section (`solvers`, `checkers`, `randomized_solvers`,
//! `randomized_checkers`), when present, *replaces* the default set for
//! that kind. Every entry names either a `builtin` (whose id must equal
//! the entry key) or an external `command`; the separation gate for the
//! configured family is enforced at load time, so no command ever runs
//! on a family whose anchors are too close to tell wrong answers apart.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use gauntlet_core::adversary::builtin::{add_resolve, AlwaysFlag, AlwaysY2, Blind, OneQuery, SnapAt};
use gauntlet_core::adversary::default_alpha;
use gauntlet_core::exactnum::{PNorm, Rational};
use gauntlet_core::markov::ProgramRegistry;
use gauntlet_core::problems::{
    default_kappa, default_eta, default_theta, validate_separation, Dims, Family, FamilyKind,
};
use gauntlet_core::randomized::{
    Bernoulli, CoinAnchorSolver, CoinAuditChecker, DerandomizedChecker, DerandomizedSolver,
    RandomizedChecker, RandomizedSolver,
};
use gauntlet_core::{Error, Result};

use crate::external::{
    ExternalChecker, ExternalCommand, ExternalRandomizedChecker, ExternalRandomizedSolver,
    ExternalSolver,
};

/// Default gap-detection budget for commands that resolve inputs.
pub const DEFAULT_GAMMA_BUDGET: u64 = 64;

/// Default stage cap for derandomization loops.
pub const DEFAULT_STAGES: u64 = 10;

/// Default audit budget for the built-in `resolve` and `coin` checkers.
pub const DEFAULT_AUDIT_BUDGET: u64 = 10;

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    family: Option<RawFamily>,
    dims: Option<RawDims>,
    theta: Option<String>,
    store: Option<RawStore>,
    limits: Option<RawLimits>,
    solvers: Option<BTreeMap<String, SubjectEntry>>,
    checkers: Option<BTreeMap<String, SubjectEntry>>,
    randomized_solvers: Option<BTreeMap<String, SubjectEntry>>,
    randomized_checkers: Option<BTreeMap<String, SubjectEntry>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    kind: String,
    kappa: Option<String>,
    eta: Option<String>,
    lambda: Option<String>,
    p: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDims {
    n1: u32,
    n2: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStore {
    dir: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLimits {
    gamma_budget: Option<u64>,
    alpha: Option<String>,
}

/// One subject registration: a built-in by id, or an external command.
#[derive(Deserialize, Clone, Default, Debug)]
#[serde(deny_unknown_fields)]
pub struct SubjectEntry {
    /// Built-in id; must equal the entry key.
    pub builtin: Option<String>,
    /// External program to run (mutually exclusive with `builtin`).
    pub command: Option<String>,
    /// Arguments for the external program.
    #[serde(default)]
    pub args: Vec<String>,
    /// Declared byte size for external programs (default: id length).
    pub size: Option<u64>,
    /// Wall-clock guard per run, milliseconds (external only).
    pub timeout_ms: Option<u64>,
    /// For `resolve`: the solver id it re-runs.
    pub guards: Option<String>,
    /// Audit budget for `resolve`, `coin`, and `dcoin`.
    pub budget: Option<u64>,
    /// Success probability for `dcoin`.
    pub p: Option<String>,
    /// Fallback flag for `dcoin`.
    pub fallback: Option<u8>,
    /// Stage cap for `dory2` and `dcoin`.
    pub stages: Option<u64>,
}

impl SubjectEntry {
    fn builtin(id: &str) -> Self {
        SubjectEntry {
            builtin: Some(id.to_string()),
            ..SubjectEntry::default()
        }
    }

    fn external_command(&self) -> ExternalCommand {
        let mut cmd = ExternalCommand::new(self.command.clone().expect("caller checked"))
            .args(self.args.iter().cloned());
        if let Some(ms) = self.timeout_ms {
            cmd = cmd.timeout_ms(ms);
        }
        cmd
    }

    /// Exactly one of `builtin`/`command`, and builtin ids must match the
    /// entry key so descriptor references resolve to what was configured.
    fn validate(&self, name: &str) -> Result<()> {
        match (&self.builtin, &self.command) {
            (Some(id), None) => {
                if id != name {
                    Err(Error::Config(format!(
                        "entry {name:?} names builtin {id:?}; built-ins must be registered \
                         under their own id"
                    )))
                } else {
                    Ok(())
                }
            }
            (None, Some(_)) => Ok(()),
            _ => Err(Error::Config(format!(
                "entry {name:?} must set exactly one of `builtin` or `command`"
            ))),
        }
    }
}

/// Fully resolved harness configuration: validated parameters plus the
/// program registry built from the subject sections.
///
/// Defaults when a section is absent: the LP family at `κ = 1/10`, `p = ∞`;
/// dimensions `(2, 1)`; `θ = 1/4`; store directory `certs`; `α = 1/20`;
/// gap budget 64; solvers `blind`, `alwaysy2`, `onequery`, `snap4`,
/// `snap8`, `dory2`; checkers `always0`, `always1`, and `resolve` guarding
/// `blind` with budget 10; randomized solver `ory2`; randomized checker
/// `coin` with budget 10.
pub struct HarnessConfig {
    /// Problem family, separation-validated.
    pub family: Family,
    /// Default dimensions for attacks.
    pub dims: Dims,
    /// Box floor.
    pub theta: Rational,
    /// Certificate store directory.
    pub store_dir: PathBuf,
    /// Plausibility tolerance for exit-flag attacks.
    pub alpha: Rational,
    /// Budget for gap-detection loops run by harness commands.
    pub gamma_budget: u64,
    /// Deterministic subjects, resolvable by diagonal descriptors.
    pub registry: ProgramRegistry,
    /// Randomized solvers, by name.
    pub randomized_solvers: BTreeMap<String, Arc<dyn RandomizedSolver>>,
    /// Randomized checkers, by name.
    pub randomized_checkers: BTreeMap<String, Arc<dyn RandomizedChecker>>,
}

fn parse_rational(s: &str, what: &str) -> Result<Rational> {
    Rational::parse_canonical(s)
        .map_err(|e| Error::Config(format!("bad {what} {s:?}: {e} (write rationals as num/den)")))
}

fn resolve_family(raw: Option<RawFamily>) -> Result<Family> {
    let Some(raw) = raw else {
        return Ok(Family::lp_default());
    };
    let kappa = match &raw.kappa {
        Some(s) => parse_rational(s, "kappa")?,
        None => default_kappa(),
    };
    let p: PNorm = match &raw.p {
        Some(s) => s
            .parse()
            .map_err(|e: Error| Error::Config(format!("bad p {s:?}: {e}")))?,
        None => PNorm::Infinity,
    };
    let kind = match raw.kind.as_str() {
        "lp" => {
            if raw.eta.is_some() || raw.lambda.is_some() {
                return Err(Error::Config(
                    "the lp family takes neither eta nor lambda".into(),
                ));
            }
            FamilyKind::Lp
        }
        "bp" => {
            if raw.lambda.is_some() {
                return Err(Error::Config("the bp family takes eta, not lambda".into()));
            }
            FamilyKind::Bp {
                eta: match &raw.eta {
                    Some(s) => parse_rational(s, "eta")?,
                    None => default_eta(),
                },
            }
        }
        "lasso" => {
            if raw.eta.is_some() {
                return Err(Error::Config("the lasso family takes lambda, not eta".into()));
            }
            FamilyKind::Lasso {
                lambda: match &raw.lambda {
                    Some(s) => parse_rational(s, "lambda")?,
                    None => default_eta(),
                },
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown family kind {other:?} (expected lp, bp, or lasso)"
            )))
        }
    };
    Family::new(kind, kappa, p).map_err(|e| Error::Config(e.to_string()))
}

fn default_solver_entries() -> BTreeMap<String, SubjectEntry> {
    ["blind", "alwaysy2", "onequery", "snap4", "snap8", "dory2"]
        .into_iter()
        .map(|id| (id.to_string(), SubjectEntry::builtin(id)))
        .collect()
}

fn default_checker_entries() -> BTreeMap<String, SubjectEntry> {
    let mut entries: BTreeMap<String, SubjectEntry> = ["always0", "always1", "dcoin"]
        .into_iter()
        .map(|id| (id.to_string(), SubjectEntry::builtin(id)))
        .collect();
    entries.insert(
        "resolve".to_string(),
        SubjectEntry {
            guards: Some("blind".to_string()),
            ..SubjectEntry::builtin("resolve")
        },
    );
    entries
}

fn default_randomized_solver_entries() -> BTreeMap<String, SubjectEntry> {
    [("ory2".to_string(), SubjectEntry::builtin("ory2"))]
        .into_iter()
        .collect()
}

fn default_randomized_checker_entries() -> BTreeMap<String, SubjectEntry> {
    [("coin".to_string(), SubjectEntry::builtin("coin"))]
        .into_iter()
        .collect()
}

fn reject_size_on_builtin(name: &str, entry: &SubjectEntry) -> Result<()> {
    if entry.size.is_some() {
        return Err(Error::Config(format!(
            "entry {name:?}: built-ins declare their own size; `size` is for external commands"
        )));
    }
    Ok(())
}

/// Registers the solvers of one entry map into `registry`.
fn build_solvers(
    registry: &mut ProgramRegistry,
    entries: &BTreeMap<String, SubjectEntry>,
) -> Result<()> {
    for (name, entry) in entries {
        entry.validate(name)?;
        if let Some(id) = &entry.builtin {
            reject_size_on_builtin(name, entry)?;
            let handle: Arc<dyn gauntlet_core::markov::SolverProgram> = match id.as_str() {
                "blind" => Arc::new(Blind),
                "alwaysy2" => Arc::new(AlwaysY2),
                "onequery" => Arc::new(OneQuery),
                "dory2" => Arc::new(DerandomizedSolver::new(
                    Arc::new(CoinAnchorSolver),
                    Arc::new(Bernoulli::fair()),
                    entry.stages.unwrap_or(DEFAULT_STAGES),
                )),
                snap if snap.starts_with("snap") => {
                    let precision: u64 = snap["snap".len()..].parse().map_err(|_| {
                        Error::Config(format!("bad snap precision in builtin id {id:?}"))
                    })?;
                    Arc::new(SnapAt::new(precision))
                }
                other => {
                    return Err(Error::Config(format!(
                        "unknown builtin solver {other:?} (known: blind, alwaysy2, onequery, \
                         snap<precision>, dory2)"
                    )))
                }
            };
            registry.register_solver(handle)?;
        } else {
            registry.register_solver(Arc::new(ExternalSolver::new(
                name.clone(),
                entry.external_command(),
                entry.size,
            )))?;
        }
    }
    Ok(())
}

/// Registers the checkers of one entry map; `resolve` references a solver
/// already present in `registry`.
fn build_checkers(
    registry: &mut ProgramRegistry,
    entries: &BTreeMap<String, SubjectEntry>,
) -> Result<()> {
    for (name, entry) in entries {
        entry.validate(name)?;
        if let Some(id) = &entry.builtin {
            reject_size_on_builtin(name, entry)?;
            match id.as_str() {
                "always0" => registry.register_checker(Arc::new(AlwaysFlag::new(0)?))?,
                "always1" => registry.register_checker(Arc::new(AlwaysFlag::new(1)?))?,
                "resolve" => {
                    let guards = entry.guards.as_ref().ok_or_else(|| {
                        Error::Config(
                            "the resolve checker needs `guards = \"<solver id>\"`".into(),
                        )
                    })?;
                    add_resolve(
                        registry,
                        guards,
                        entry.budget.unwrap_or(DEFAULT_AUDIT_BUDGET),
                    )
                    .map_err(|e| {
                        Error::Config(format!(
                            "checker {name:?} guards solver {guards:?}: {e}"
                        ))
                    })?;
                }
                "dcoin" => {
                    let p = match &entry.p {
                        Some(s) => parse_rational(s, "success probability")?,
                        None => Rational::new(3, 4)?,
                    };
                    registry.register_checker(Arc::new(DerandomizedChecker::new(
                        Arc::new(CoinAuditChecker::new(
                            entry.budget.unwrap_or(DEFAULT_AUDIT_BUDGET),
                        )),
                        Arc::new(Bernoulli::fair()),
                        p,
                        entry.fallback.unwrap_or(0),
                        entry.stages.unwrap_or(DEFAULT_STAGES),
                    )?))?;
                }
                other => {
                    return Err(Error::Config(format!(
                        "unknown builtin checker {other:?} (known: always0, always1, resolve, \
                         dcoin)"
                    )))
                }
            }
        } else {
            registry.register_checker(Arc::new(ExternalChecker::new(
                name.clone(),
                entry.external_command(),
                entry.size,
            )))?;
        }
    }
    Ok(())
}

fn build_randomized_solvers(
    entries: &BTreeMap<String, SubjectEntry>,
) -> Result<BTreeMap<String, Arc<dyn RandomizedSolver>>> {
    let mut out: BTreeMap<String, Arc<dyn RandomizedSolver>> = BTreeMap::new();
    for (name, entry) in entries {
        entry.validate(name)?;
        let handle: Arc<dyn RandomizedSolver> = if let Some(id) = &entry.builtin {
            match id.as_str() {
                "ory2" => Arc::new(CoinAnchorSolver),
                other => {
                    return Err(Error::Config(format!(
                        "unknown builtin randomized solver {other:?} (known: ory2)"
                    )))
                }
            }
        } else {
            Arc::new(ExternalRandomizedSolver::new(
                name.clone(),
                entry.external_command(),
            ))
        };
        out.insert(name.clone(), handle);
    }
    Ok(out)
}

fn build_randomized_checkers(
    entries: &BTreeMap<String, SubjectEntry>,
) -> Result<BTreeMap<String, Arc<dyn RandomizedChecker>>> {
    let mut out: BTreeMap<String, Arc<dyn RandomizedChecker>> = BTreeMap::new();
    for (name, entry) in entries {
        entry.validate(name)?;
        let handle: Arc<dyn RandomizedChecker> = if let Some(id) = &entry.builtin {
            match id.as_str() {
                "coin" => Arc::new(CoinAuditChecker::new(
                    entry.budget.unwrap_or(DEFAULT_AUDIT_BUDGET),
                )),
                other => {
                    return Err(Error::Config(format!(
                        "unknown builtin randomized checker {other:?} (known: coin)"
                    )))
                }
            }
        } else {
            Arc::new(ExternalRandomizedChecker::new(
                name.clone(),
                entry.external_command(),
            ))
        };
        out.insert(name.clone(), handle);
    }
    Ok(out)
}

impl HarnessConfig {
    /// Loads the configuration. An explicit path must exist; without one,
    /// `gauntlet.toml` in the working directory is used when present and
    /// the defaults otherwise.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => Some(fs::read_to_string(p).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", p.display()))
            })?),
            None => {
                let fallback = Path::new("gauntlet.toml");
                if fallback.exists() {
                    Some(fs::read_to_string(fallback).map_err(|e| {
                        Error::Config(format!("cannot read config gauntlet.toml: {e}"))
                    })?)
                } else {
                    None
                }
            }
        };
        let raw = match text {
            Some(text) => {
                toml::from_str(&text).map_err(|e| Error::Config(format!("config: {e}")))?
            }
            None => RawConfig::default(),
        };
        Self::resolve(raw)
    }

    /// The built-in defaults, independent of any file.
    pub fn defaults() -> Result<Self> {
        Self::resolve(RawConfig::default())
    }

    fn resolve(raw: RawConfig) -> Result<Self> {
        let family = resolve_family(raw.family)?;
        validate_separation(&family)?;

        let dims = match raw.dims {
            Some(d) => Dims::new(d.n1, d.n2).map_err(|e| Error::Config(e.to_string()))?,
            None => Dims::new(2, 1).expect("valid default"),
        };
        let theta = match &raw.theta {
            Some(s) => parse_rational(s, "theta")?,
            None => default_theta(),
        };
        if !theta.is_positive() || theta > Rational::new(1, 4).expect("constant") {
            return Err(Error::Config(format!(
                "theta must lie in (0, 1/4] so every anchor schedule stays inside the box; \
                 got {theta}"
            )));
        }
        let limits = raw.limits.unwrap_or(RawLimits {
            gamma_budget: None,
            alpha: None,
        });
        let alpha = match &limits.alpha {
            Some(s) => parse_rational(s, "alpha")?,
            None => default_alpha(),
        };
        if alpha.is_negative() || alpha >= family.kappa {
            return Err(Error::Config(format!(
                "alpha must satisfy 0 <= alpha < kappa, got {alpha}"
            )));
        }
        let gamma_budget = limits.gamma_budget.unwrap_or(DEFAULT_GAMMA_BUDGET);
        if gamma_budget == 0 {
            return Err(Error::Config("gamma_budget must be positive".into()));
        }
        let store_dir = raw
            .store
            .map(|s| s.dir)
            .unwrap_or_else(|| PathBuf::from("certs"));

        let mut registry = ProgramRegistry::new();
        build_solvers(
            &mut registry,
            &raw.solvers.unwrap_or_else(default_solver_entries),
        )?;
        build_checkers(
            &mut registry,
            &raw.checkers.unwrap_or_else(default_checker_entries),
        )?;
        let randomized_solvers = build_randomized_solvers(
            &raw.randomized_solvers
                .unwrap_or_else(default_randomized_solver_entries),
        )?;
        let randomized_checkers = build_randomized_checkers(
            &raw.randomized_checkers
                .unwrap_or_else(default_randomized_checker_entries),
        )?;

        Ok(HarnessConfig {
            family,
            dims,
            theta,
            store_dir,
            alpha,
            gamma_budget,
            registry,
            randomized_solvers,
            randomized_checkers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_text(text: &str) -> Result<HarnessConfig> {
        let raw = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        HarnessConfig::resolve(raw)
    }

    #[test]
    fn defaults_register_the_builtin_suite() {
        let config = HarnessConfig::defaults().unwrap();
        assert_eq!(
            config.registry.solver_ids(),
            vec!["alwaysy2", "blind", "dory2", "onequery", "snap4", "snap8"]
        );
        assert_eq!(
            config.registry.checker_ids(),
            vec!["always0", "always1", "dcoin", "resolve"]
        );
        assert_eq!(
            config.randomized_solvers.keys().collect::<Vec<_>>(),
            vec!["ory2"]
        );
        assert_eq!(
            config.randomized_checkers.keys().collect::<Vec<_>>(),
            vec!["coin"]
        );
        assert_eq!(config.family, Family::lp_default());
        assert_eq!(config.dims, Dims::new(2, 1).unwrap());
        assert_eq!(config.theta, default_theta());
    }

    #[test]
    fn close_anchors_are_rejected_at_load() {
        // eta = 3/20 passes the family constructor (eta <= 2*kappa) but
        // collapses the anchor separation, so loading must fail.
        let err = from_text(
            r#"
            [family]
            kind = "bp"
            eta = "3/20"
            "#,
        )
        .err()
        .expect("eta = 3/20 must not load");
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn subject_sections_replace_the_defaults() {
        let config = from_text(
            r#"
            [solvers.snap12]
            builtin = "snap12"

            [checkers.resolve]
            builtin = "resolve"
            guards = "snap12"
            budget = 7
            "#,
        )
        .unwrap();
        assert_eq!(config.registry.solver_ids(), vec!["snap12"]);
        assert_eq!(config.registry.checker_ids(), vec!["resolve"]);
    }

    #[test]
    fn bad_entries_are_config_errors() {
        for (text, hint) in [
            (
                r#"
                [solvers.fancy]
                builtin = "blind"
                "#,
                "key/id mismatch",
            ),
            (
                r#"
                [solvers.blind]
                builtin = "blind"
                command = "./blind"
                "#,
                "both builtin and command",
            ),
            (
                r#"
                [solvers.mystery]
                builtin = "mystery"
                "#,
                "unknown builtin",
            ),
            (
                r#"
                [checkers.resolve]
                builtin = "resolve"
                "#,
                "resolve without guards",
            ),
            (
                r#"
                [solvers.blind]
                builtin = "blind"
                size = 99
                "#,
                "size on a builtin",
            ),
            (
                r#"
                [limits]
                alpha = "1/10"
                "#,
                "alpha at kappa",
            ),
            (
                r#"theta = "1/3""#,
                "theta above 1/4",
            ),
            (
                r#"
                [solvers.blind]
                builtin = "blind"
                typo = 1
                "#,
                "unknown field",
            ),
        ] {
            let err = from_text(text);
            assert!(err.is_err(), "expected config error for {hint}");
        }
    }

    #[test]
    fn resolve_guarding_a_missing_solver_fails() {
        let err = from_text(
            r#"
            [checkers.resolve]
            builtin = "resolve"
            guards = "ghost"
            "#,
        )
        .err()
        .expect("a guard naming a missing solver must not load");
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn external_entries_build_with_sizes_and_args() {
        let config = from_text(
            r#"
            [solvers.ext]
            command = "./ext.sh"
            args = ["--x"]
            size = 42
            timeout_ms = 1000

            # Overriding the solver table drops "blind", which the default
            # resolve checker guards, so the checkers are stated too.
            [checkers.always1]
            builtin = "always1"
            "#,
        )
        .unwrap();
        let solver = config.registry.solver("ext").unwrap();
        assert_eq!(solver.id(), "ext");
        assert_eq!(solver.declared_size(), 42);
    }
}
