//! Reference-trace store: a directory, an index file, and checksums.
//!
//! Healthy-network reference traces are acquired rarely and consulted on
//! every comparison, so they live in a keyed store: a plain directory with
//! an `index.json` mapping `(topology_id, wavelength_nm, pulse_width_ns)`
//! to a trace file and its SHA-256. No database engine — keyed retrieval
//! is all the workflow needs.
//!
//! Float keys are physical instrument settings, so they are rounded to 12
//! significant digits and canonicalized to their shortest exact decimal
//! form ([`crate::tracefile::canonical_float`]); key equality is then text
//! equality, immune to the last-bit wobble that unit conversions (ns in
//! the file, seconds in the struct) can introduce. One reference per key:
//! adding a trace for an existing key replaces the old entry. Every
//! retrieval re-hashes the file and refuses to return silently corrupted
//! data.
//!
//! The store root comes from `--store` or, failing that, the `DSPE_STORE`
//! environment variable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::tracefile::{canonical_float, read_trace, TraceFile};

/// Environment variable naming the default store root.
pub const STORE_ENV: &str = "DSPE_STORE";

const INDEX_FILE: &str = "index.json";
const TRACES_DIR: &str = "traces";

/// Canonical text for a float key. Keys are physical settings (nm, ns)
/// that may arrive via a unit conversion wobbling the last bit, so the
/// value is rounded to 12 significant digits before canonicalization —
/// far finer than any two distinct instrument settings, far coarser than
/// one ulp.
fn key_text(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().expect("rendered float parses");
    canonical_float(rounded)
}

/// One record of the store index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreEntry {
    /// Network identifier the reference belongs to.
    pub topology_id: String,
    /// Probe wavelength key, canonical float text.
    pub wavelength_nm: String,
    /// Pulse width key in ns, canonical float text.
    pub pulse_width_ns: String,
    /// Path of the trace file, relative to the store root.
    pub file: String,
    /// SHA-256 of the trace file bytes, lowercase hex.
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoreIndex {
    version: u32,
    entries: Vec<StoreEntry>,
}

/// An opened store rooted at a directory.
#[derive(Debug)]
pub struct ReferenceStore {
    root: PathBuf,
    index: StoreIndex,
}

/// Picks the store root: explicit flag first, then [`STORE_ENV`].
pub fn resolve_store_root(flag: Option<&Path>) -> Result<PathBuf, CliError> {
    if let Some(path) = flag {
        return Ok(path.to_path_buf());
    }
    match std::env::var_os(STORE_ENV) {
        Some(v) if !v.is_empty() => Ok(PathBuf::from(v)),
        _ => Err(CliError::Parse(format!(
            "no store path: pass --store or set {STORE_ENV}"
        ))),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

impl ReferenceStore {
    /// Opens the store at `root`, creating the directory layout and an
    /// empty index on first use.
    pub fn open(root: &Path) -> Result<ReferenceStore, CliError> {
        std::fs::create_dir_all(root.join(TRACES_DIR))
            .map_err(|e| CliError::io_at(root, &e))?;
        let index_path = root.join(INDEX_FILE);
        let index = if index_path.exists() {
            let text = std::fs::read_to_string(&index_path)
                .map_err(|e| CliError::io_at(&index_path, &e))?;
            let index: StoreIndex = serde_json::from_str(&text)?;
            if index.version != 1 {
                return Err(CliError::Parse(format!(
                    "unsupported store index version {}",
                    index.version
                )));
            }
            index
        } else {
            StoreIndex { version: 1, entries: Vec::new() }
        };
        Ok(ReferenceStore { root: root.to_path_buf(), index })
    }

    /// All index records, in insertion order.
    pub fn entries(&self) -> &[StoreEntry] {
        &self.index.entries
    }

    /// Looks up the record for a key, if present.
    pub fn find(
        &self,
        topology_id: &str,
        wavelength_nm: f64,
        pulse_width_ns: f64,
    ) -> Option<&StoreEntry> {
        let nm = key_text(wavelength_nm);
        let ns = key_text(pulse_width_ns);
        self.index.entries.iter().find(|e| {
            e.topology_id == topology_id && e.wavelength_nm == nm && e.pulse_width_ns == ns
        })
    }

    /// Copies the trace at `path` into the store and indexes it under the
    /// key carried in its header. Returns the record and whether an
    /// existing entry for that key was replaced.
    pub fn add_trace_file(&mut self, path: &Path) -> Result<(StoreEntry, bool), CliError> {
        // Parse first: the store only holds files that read back.
        let parsed = read_trace(path)?;
        let bytes = std::fs::read(path).map_err(|e| CliError::io_at(path, &e))?;
        let sha = sha256_hex(&bytes);

        let meta = &parsed.trace.meta;
        let nm_key = key_text(meta.wavelength_nm);
        let ns_key = key_text(meta.pulse_width_s * 1e9);

        let sanitized: String = meta
            .topology_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
            .collect();
        let file = format!("{TRACES_DIR}/{}-{}.csv", sanitized, &sha[..12]);
        let dest = self.root.join(&file);
        std::fs::write(&dest, &bytes).map_err(|e| CliError::io_at(&dest, &e))?;

        let entry = StoreEntry {
            topology_id: meta.topology_id.clone(),
            wavelength_nm: nm_key,
            pulse_width_ns: ns_key,
            file,
            sha256: sha,
        };
        let replaced = match self.index.entries.iter().position(|e| {
            e.topology_id == entry.topology_id
                && e.wavelength_nm == entry.wavelength_nm
                && e.pulse_width_ns == entry.pulse_width_ns
        }) {
            Some(i) => {
                let old = std::mem::replace(&mut self.index.entries[i], entry.clone());
                if old.file != self.index.entries[i].file {
                    // Previous payload is unreachable now; drop it.
                    let _ = std::fs::remove_file(self.root.join(&old.file));
                }
                true
            }
            None => {
                self.index.entries.push(entry.clone());
                false
            }
        };
        self.save()?;
        Ok((entry, replaced))
    }

    /// Retrieves a reference by key, verifying its checksum before parsing.
    /// Returns the absolute payload path together with the parsed trace.
    pub fn get_verified(
        &self,
        topology_id: &str,
        wavelength_nm: f64,
        pulse_width_ns: f64,
    ) -> Result<(PathBuf, TraceFile), CliError> {
        let entry = self.find(topology_id, wavelength_nm, pulse_width_ns).ok_or_else(|| {
            CliError::Io(format!(
                "no reference stored for ({topology_id}, {wavelength_nm} nm, \
                 {pulse_width_ns} ns)"
            ))
        })?;
        let payload = self.root.join(&entry.file);
        let bytes = std::fs::read(&payload).map_err(|e| CliError::io_at(&payload, &e))?;
        let sha = sha256_hex(&bytes);
        if sha != entry.sha256 {
            return Err(CliError::Io(format!(
                "{}: checksum mismatch (index {}, file {sha})",
                payload.display(),
                entry.sha256
            )));
        }
        let parsed = read_trace(&payload)?;
        Ok((payload, parsed))
    }

    fn save(&self) -> Result<(), CliError> {
        let index_path = self.root.join(INDEX_FILE);
        let text = serde_json::to_string_pretty(&self.index)
            .expect("index serialization cannot fail");
        std::fs::write(&index_path, text).map_err(|e| CliError::io_at(&index_path, &e))
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
