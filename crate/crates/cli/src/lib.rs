//! Harness library behind the `gauntlet` binary.
//!
//! The binary is a thin argument parser; everything it does lives here so
//! integration tests can drive the same code paths directly:
//!
//! * [`config`] — harness configuration (family, dimensions, subject
//!   registry) loaded from a TOML file, with validated defaults;
//! * [`protocol`] — the line-oriented JSON wire protocol spoken to external
//!   subject processes, and the stdio servers that let built-ins be run *as*
//!   external subjects;
//! * [`external`] — subject adapters that spawn an external command and
//!   bridge it onto the in-process solver/checker traits;
//! * [`store`] — the append-only certificate store with re-verification on
//!   load;
//! * [`commands`] — one function per subcommand, returning the process exit
//!   code.

pub mod commands;
pub mod config;
pub mod external;
pub mod protocol;
pub mod store;

use gauntlet_core::Error;

/// Maps an error to the documented process exit code: configuration and
/// input mistakes exit 2, wire-protocol violations exit 3, and failures of
/// the harness's own re-checks (verification, determinism, broken internal
/// contracts) exit 4.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::Parse(_) | Error::BudgetExhausted(_) => 2,
        Error::Protocol(_) => 3,
        Error::Verification(_) | Error::Determinism(_) | Error::Contract(_) => 4,
        Error::NotApplicable(_) => 2,
    }
}
