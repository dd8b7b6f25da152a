//! Output directory handling: CSV/JSON writers and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// 17 significant digits, which round-trips every f64.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub spec_digest: String,
    pub tool_version: &'static str,
    pub seeds: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
}

pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    pub fn new(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, body: String) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator,
        I::Item: AsRef<[f64]>,
    {
        let mut body = header.join(",");
        body.push('\n');
        for row in rows {
            let cells: Vec<String> = row.as_ref().iter().map(|&v| num(v)).collect();
            body.push_str(&cells.join(","));
            body.push('\n');
        }
        self.write(name, body)
    }

    /// CSV whose first column is a text label.
    pub fn labeled_csv(&mut self, name: &str, header: &[&str], rows: &[(String, Vec<f64>)]) -> Result<(), CliError> {
        let mut body = header.join(",");
        body.push('\n');
        for (label, vals) in rows {
            body.push_str(label);
            for &v in vals {
                body.push(',');
                body.push_str(&num(v));
            }
            body.push('\n');
        }
        self.write(name, body)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<String, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
        text.push('\n');
        self.write(name, text.clone())?;
        Ok(text)
    }

    /// Writes `manifest.json` listing everything written so far.
    pub fn finish(mut self, command: Vec<String>, digest_source: &str) -> Result<(), CliError> {
        let manifest = RunManifest {
            command,
            spec_digest: sha256_hex(digest_source.as_bytes()),
            tool_version: env!("CARGO_PKG_VERSION"),
            seeds: BTreeMap::from([("halton_offset".to_string(), 0)]),
            outputs: self.files.clone(),
        };
        self.json("manifest.json", &manifest)?;
        Ok(())
    }
}
