use std::path::{Path, PathBuf};

use afmm::market::hex_digest;
use serde::{Deserialize, Serialize};

/// Provenance record written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    /// SHA-256 of the configuration bytes, or of the named input files for
    /// subcommands without a configuration.
    pub config_digest: String,
    pub base_seed: Option<u64>,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Digest over `(file name, length, bytes)` of each input, in order.
pub fn inputs_digest(inputs: &[(&str, &[u8])]) -> String {
    let mut buf = Vec::new();
    for (name, bytes) in inputs {
        buf.extend_from_slice(name.as_bytes());
        buf.push(0);
        buf.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
        buf.extend_from_slice(bytes);
    }
    hex_digest(&buf)
}

pub struct ManifestBuilder {
    subcommand: &'static str,
    digest: String,
    seed: Option<u64>,
    started: String,
    outputs: Vec<String>,
    details: serde_json::Value,
}

impl ManifestBuilder {
    pub fn new(subcommand: &'static str, digest: String, seed: Option<u64>) -> Self {
        Self {
            subcommand,
            digest,
            seed,
            started: now(),
            outputs: Vec::new(),
            details: serde_json::Value::Null,
        }
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn details(&mut self, details: serde_json::Value) {
        self.details = details;
    }

    /// Writes the manifest to `path`.
    pub fn finish(self, path: &Path) -> anyhow::Result<PathBuf> {
        let m = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            subcommand: self.subcommand.to_owned(),
            config_digest: self.digest,
            base_seed: self.seed,
            started: self.started,
            finished: now(),
            outputs: self.outputs,
            details: self.details,
        };
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| afmm::Error::io(path, e))?;
        Ok(path.to_owned())
    }
}
