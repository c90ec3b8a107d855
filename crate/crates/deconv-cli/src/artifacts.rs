//! Output plumbing: CSV emission with round-trip decimal formatting and
//! the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvWriter {
    path: PathBuf,
    buf: String,
}

impl CsvWriter {
    pub fn new(path: PathBuf, header: &str) -> Self {
        let mut buf = String::new();
        buf.push_str(header);
        buf.push('\n');
        Self { path, buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> std::io::Result<PathBuf> {
        fs::write(&self.path, self.buf.as_bytes())?;
        Ok(self.path)
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    /// SHA-256 over everything that determines the results: config
    /// bytes, seed, and the command line.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_secs: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(hash_inputs: &[&[u8]], seed: u64, wall_time_secs: f64, outputs: &[PathBuf]) -> Self {
        let mut hasher = Sha256::new();
        for chunk in hash_inputs {
            hasher.update(chunk);
        }
        hasher.update(seed.to_le_bytes());
        Self {
            config_hash: format!("{:x}", hasher.finalize()),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_secs,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join("manifest.json");
        let mut f = fs::File::create(&path)?;
        f.write_all(serde_json::to_string_pretty(self).expect("manifest is serializable").as_bytes())?;
        f.write_all(b"\n")?;
        Ok(path)
    }
}
