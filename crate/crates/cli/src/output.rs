use std::fs;
use std::path::{Path, PathBuf};

use lookalike_core::{Error, Result};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of a canonical `key=value` description of a run's settings.
pub fn config_digest(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// First line of every output file.
pub fn header_line(subcommand: &str, seed: u64, canonical: &str) -> String {
    format!(
        "# lookalike {VERSION} {subcommand} seed={seed} config={}",
        config_digest(canonical)
    )
}

/// Provenance context shared by the files a subcommand writes.
pub struct Outputs<'a> {
    pub out_dir: &'a Path,
    pub header: String,
}

impl Outputs<'_> {
    pub fn path(&self, explicit: Option<&PathBuf>, default_name: &str) -> PathBuf {
        explicit.cloned().unwrap_or_else(|| self.out_dir.join(default_name))
    }

    /// Writes the header followed by `body`, creating parent directories.
    pub fn write(&self, path: &Path, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(self.header.as_bytes());
        buf.push(b'\n');
        body(&mut buf).map_err(|e| io_error(path, e))?;
        write_bytes(path, &buf)
    }

    /// Writes `body` verbatim, for formats that cannot carry comments.
    pub fn write_plain(&self, path: &Path, body: &[u8]) -> Result<()> {
        write_bytes(path, body)
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

pub fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Percentage with two decimals.
pub fn pct(rate: f64) -> String {
    format!("{:.2}", 100.0 * rate)
}
