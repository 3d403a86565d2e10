//! Append-only certificate store.
//!
//! Each record lives in its own JSON file under the store directory; an
//! `index.txt` file lists the records in creation order as
//! `<file> <kind>` lines. The store is write-once: appending never
//! rewrites existing files, so certificate bytes stay stable across runs,
//! and loading re-verifies every record against a live engine — a store
//! that fails re-verification is corrupt and loading reports it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gauntlet_core::adversary::{ExitFlagCertificate, FailureCertificate, RangeViolation};
use gauntlet_core::markov::engine::Engine;
use gauntlet_core::markov::descriptor::MarkovInput;
use gauntlet_core::{Error, Result};

/// Any self-verifying record the harness can persist.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoredCertificate {
    /// Plain-diagonal failure certificate against a solver.
    Failure(FailureCertificate),
    /// Exit-flag certificate against a solver/checker pair.
    ExitFlag(ExitFlagCertificate),
    /// Alpha-range violation: the exit-flag attack did not apply, and the
    /// record proves why.
    RangeViolation(RangeViolation),
}

impl StoredCertificate {
    /// The index tag for this record kind.
    pub fn kind_tag(&self) -> &'static str {
        match self {
            StoredCertificate::Failure(_) => "failure",
            StoredCertificate::ExitFlag(_) => "exit_flag",
            StoredCertificate::RangeViolation(_) => "range_violation",
        }
    }

    /// The diagonal input the record embeds.
    pub fn input(&self) -> &MarkovInput {
        match self {
            StoredCertificate::Failure(c) => &c.input,
            StoredCertificate::ExitFlag(c) => &c.input,
            StoredCertificate::RangeViolation(c) => &c.input,
        }
    }

    /// Re-verifies the record against a live engine.
    pub fn verify(&self, engine: &Engine<'_>) -> Result<()> {
        match self {
            StoredCertificate::Failure(c) => c.verify(engine),
            StoredCertificate::ExitFlag(c) => c.verify(engine),
            StoredCertificate::RangeViolation(c) => c.verify(engine),
        }
    }

    /// Canonical serialized bytes, as written to the store.
    pub fn payload_bytes(&self) -> Result<Vec<u8>> {
        serde_json::to_vec(self).map_err(|e| Error::Parse(format!("certificate payload: {e}")))
    }
}

/// A directory of certificate records plus the `index.txt` manifest.
pub struct CertificateStore {
    dir: PathBuf,
}

fn io_err(context: &str, e: std::io::Error) -> Error {
    Error::Config(format!("{context}: {e}"))
}

impl CertificateStore {
    /// Opens (creating if necessary) the store at `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io_err("creating certificate store", e))?;
        Ok(CertificateStore { dir })
    }

    /// The store directory.
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn index_path(&self) -> PathBuf {
        self.dir.join("index.txt")
    }

    fn read_index(&self) -> Result<Vec<(String, String)>> {
        let path = self.index_path();
        if !path.exists() {
            return Ok(Vec::new());
        }
        let text = fs::read_to_string(&path).map_err(|e| io_err("reading store index", e))?;
        let mut entries = Vec::new();
        for line in text.lines() {
            let mut parts = line.split(' ');
            let (Some(file), Some(kind), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Config(format!("malformed index line {line:?}")));
            };
            entries.push((file.to_string(), kind.to_string()));
        }
        Ok(entries)
    }

    /// Appends one record, returning the file name it was stored under.
    pub fn append(&self, cert: &StoredCertificate) -> Result<String> {
        let entries = self.read_index()?;
        let name = format!("cert-{:04}.json", entries.len());
        let path = self.dir.join(&name);
        if path.exists() {
            return Err(Error::Config(format!(
                "store file {name} already exists but is not indexed"
            )));
        }
        let mut payload = cert.payload_bytes()?;
        payload.push(b'\n');
        fs::write(&path, payload).map_err(|e| io_err("writing certificate", e))?;
        let mut index = String::new();
        for (file, kind) in &entries {
            index.push_str(&format!("{file} {kind}\n"));
        }
        index.push_str(&format!("{name} {}\n", cert.kind_tag()));
        fs::write(self.index_path(), index).map_err(|e| io_err("writing store index", e))?;
        Ok(name)
    }

    /// Loads every indexed record, checking each file parses and matches
    /// its index kind. Verification is the caller's job (it needs an
    /// engine with the right registry).
    pub fn load_all(&self) -> Result<Vec<(String, StoredCertificate)>> {
        let mut records = Vec::new();
        for (file, kind) in self.read_index()? {
            let path = self.dir.join(&file);
            let text = fs::read_to_string(&path)
                .map_err(|e| io_err(&format!("reading certificate {file}"), e))?;
            let cert: StoredCertificate = serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("certificate {file}: {e}")))?;
            if cert.kind_tag() != kind {
                return Err(Error::Config(format!(
                    "certificate {file} has kind {} but the index says {kind}",
                    cert.kind_tag()
                )));
            }
            records.push((file, cert));
        }
        Ok(records)
    }
}
