//! Output artifacts and the per-command run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    argv: &'a [String],
    config_hash: &'a str,
    config: &'a RunConfig,
    started_at: &'a str,
    finished_at: String,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a BTreeMap<String, String>,
}

/// Collects input digests and written outputs for one command.
pub struct Run {
    command: String,
    argv: Vec<String>,
    config: RunConfig,
    config_hash: String,
    out_dir: PathBuf,
    started_at: String,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl Run {
    pub fn start(command: &str, argv: Vec<String>, config: RunConfig) -> Self {
        let doc = serde_json::json!({
            "command": command,
            "args": argv,
            "config": config,
        });
        let config_hash = sha256_hex(&serde_json::to_vec(&doc).expect("config serializes"));
        Run {
            command: command.to_string(),
            argv,
            out_dir: config.output_dir.clone(),
            config,
            config_hash,
            started_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Writes `name` under the output directory via a temp file and rename.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        let path = self.out_dir.join(name);
        let tmp = self.out_dir.join(format!(".{name}.tmp"));
        std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Writes `run-manifest.<command>.json`.
    pub fn finish(self) -> Result<()> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            argv: &self.argv,
            config_hash: &self.config_hash,
            config: &self.config,
            started_at: &self.started_at,
            finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        let path = self.out_dir.join(manifest_name(&self.command));
        std::fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn manifest_name(command: &str) -> String {
    format!("run-manifest.{command}.json")
}
