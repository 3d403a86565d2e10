//! Equivalence of external subjects with their in-process counterparts:
//! registering the binary itself as an external subject under the *same*
//! id must yield byte-identical certificates, because the wire protocol is
//! exact and the declared sizes coincide.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

use gauntlet_cli::external::{ExternalCommand, ExternalRandomizedChecker};
use gauntlet_core::adversary::builtin::builtin_registry;
use gauntlet_core::markov::descriptor::MarkovInput;
use gauntlet_core::markov::engine::Engine;
use gauntlet_core::markov::ProblemHeader;
use gauntlet_core::problems::{anchor_sets, default_theta, Dims, Family};
use gauntlet_core::randomized::{BitString, CoinAuditChecker, RandomizedChecker};
use gauntlet_core::trustworthy::EngineOracle;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gauntlet")
}

/// A scratch directory whose config file is *not* named `gauntlet.toml`:
/// spawned subject processes inherit the directory but must fall back to
/// the built-in defaults, not recurse into the external registration.
struct Harness {
    dir: TempDir,
}

impl Harness {
    fn new(config: &str) -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("wire.toml"), config).unwrap();
        Harness { dir }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(bin())
            .current_dir(self.path())
            .args(["--config", "wire.toml"])
            .args(args)
            .output()
            .expect("binary runs")
    }

    fn cert(&self, file: &str) -> Vec<u8> {
        fs::read(self.path().join("certs").join(file)).unwrap()
    }
}

/// Registers the named built-ins as external subjects served by this very
/// binary over the wire protocol. No sizes are given, so the declared size
/// is the id length on both sides.
fn external_config(solvers: &[&str], checkers: &[&str]) -> String {
    let mut out = String::new();
    for id in solvers {
        out.push_str(&format!(
            "[solvers.{id}]\ncommand = {:?}\nargs = [\"subject\", \"--solver\", {id:?}]\n\n",
            bin()
        ));
    }
    for id in checkers {
        out.push_str(&format!(
            "[checkers.{id}]\ncommand = {:?}\nargs = [\"subject\", \"--checker\", {id:?}]\n\n",
            bin()
        ));
    }
    out
}

#[test]
fn external_solvers_yield_byte_identical_certificates() {
    let builtin = Harness::new("");
    let external = Harness::new(&external_config(&["blind", "snap4", "alwaysy2"], &[]));
    let rerun = Harness::new(&external_config(&["blind", "snap4", "alwaysy2"], &[]));

    for h in [&builtin, &external, &rerun] {
        for solver in ["blind", "snap4", "alwaysy2"] {
            let out = h.run(&["attack", "--solver", solver]);
            assert_eq!(
                out.status.code(),
                Some(0),
                "{solver}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
    }
    for file in ["cert-0000.json", "cert-0001.json", "cert-0002.json"] {
        let reference = builtin.cert(file);
        assert_eq!(
            external.cert(file),
            reference,
            "{file}: external certificate differs from the in-process one"
        );
        assert_eq!(
            rerun.cert(file),
            reference,
            "{file}: external certificate differs between runs"
        );
    }
}

#[test]
fn external_checker_yields_a_byte_identical_certificate() {
    let builtin = Harness::new("");
    // The checker table replaces the defaults wholesale, so spell out the
    // one external entry plus the built-in partner the attack needs.
    let mut config = external_config(&[], &["always1"]);
    config.push_str("[checkers.always0]\nbuiltin = \"always0\"\n");
    let external = Harness::new(&config);

    for h in [&builtin, &external] {
        let out = h.run(&["attack-exitflag", "--solver", "blind", "--checker", "always1"]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(
        external.cert("cert-0000.json"),
        builtin.cert("cert-0000.json"),
        "external checker certificate differs from the in-process one"
    );
}

#[test]
fn external_randomized_checker_is_transparent() {
    let header = ProblemHeader {
        family: Family::lp_default(),
        dims: Dims::new(2, 1).unwrap(),
        theta: default_theta(),
    };
    let input = MarkovInput::schedule(header.clone(), 1, 1).unwrap();
    let registry = builtin_registry().unwrap();
    let engine = Engine::new(&registry);
    let answer = anchor_sets(&header.family, &header.dims).unwrap().y1;

    let local = CoinAuditChecker::new(10);
    let remote = ExternalRandomizedChecker::new(
        "coin",
        ExternalCommand::new(bin()).args(["subject", "--randomized-checker", "coin"]),
    );

    let prefixes: [&[bool]; 7] = [
        &[],
        &[false],
        &[true],
        &[false, false],
        &[false, true],
        &[true, false],
        &[true, true],
    ];
    for bits in prefixes {
        let coins = BitString::from_bits(bits.to_vec());
        let mut oracle = EngineOracle::new(&engine, &input);
        let want = local
            .check_with_coins(&header, &answer, &coins, &mut oracle)
            .unwrap();
        let mut oracle = EngineOracle::new(&engine, &input);
        let got = remote
            .check_with_coins(&header, &answer, &coins, &mut oracle)
            .unwrap();
        assert_eq!(got, want, "flip prefix {bits:?}");
    }
}
