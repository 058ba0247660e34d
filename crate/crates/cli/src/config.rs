//! Run configuration: a JSON file whose fields can each be overridden by a flag.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use zsmine_core::scoring::ScorerConfig;
use zsmine_core::{Split, Subtask};

use crate::UsageError;

pub const DEFAULT_SEED: u64 = 2019;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scorer: ScorerConfig,
    /// Directory holding `index.noun` and `data.noun`.
    pub wordnet_dir: Option<PathBuf>,
    /// Lexicon snapshot; wins over `wordnet_dir`.
    pub snapshot: Option<PathBuf>,
    /// Keyed `"A/dev"`, `"B/test"`, ...
    pub datasets: BTreeMap<String, PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scorer: ScorerConfig::default(),
            wordnet_dir: None,
            snapshot: None,
            datasets: BTreeMap::new(),
            output_dir: PathBuf::from("out"),
            seed: DEFAULT_SEED,
        }
    }
}

pub fn dataset_key(subtask: Subtask, split: Split) -> String {
    format!("{subtask}/{split}")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
    }

    /// Path for a split: the explicit override, else the configured entry.
    pub fn dataset(&self, subtask: Subtask, split: Split, explicit: Option<&Path>) -> Result<PathBuf> {
        if let Some(p) = explicit {
            return Ok(p.to_path_buf());
        }
        let key = dataset_key(subtask, split);
        self.datasets.get(&key).cloned().ok_or_else(|| {
            UsageError(format!(
                "no dataset for {key}; pass --dataset or add \"{key}\" to `datasets` in the config"
            ))
            .into()
        })
    }

    /// Checks every configured path exists.
    pub fn validate(&self) -> Result<()> {
        let mut paths: Vec<(&str, &Path)> = self.datasets.iter().map(|(k, p)| (k.as_str(), p.as_path())).collect();
        if let Some(p) = &self.wordnet_dir {
            paths.push(("wordnet_dir", p));
        }
        if let Some(p) = &self.snapshot {
            paths.push(("snapshot", p));
        }
        for (what, p) in paths {
            if !p.exists() {
                return Err(UsageError(format!("{what}: {} does not exist", p.display())).into());
            }
        }
        Ok(())
    }
}
