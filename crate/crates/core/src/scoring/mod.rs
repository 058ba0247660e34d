//! NLI pair scoring behind a pluggable backend with a persistent cache.
//!
//! Scores are raw 3-way logits in (entailment, neutral, contradiction)
//! order. Probabilities are derived on demand by [`entail_prob`].

mod cache;
mod http;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheError, ScoreCache};
pub use http::{HttpBackend, LABEL_ORDER, MAX_BATCH};

pub const DEFAULT_MODEL: &str = "facebook/bart-large-mnli";

/// Raw logits for one (premise, hypothesis) pair, serialized as `[e, n, c]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Logits {
    pub entailment: f64,
    pub neutral: f64,
    pub contradiction: f64,
}

impl Logits {
    pub fn new(entailment: f64, neutral: f64, contradiction: f64) -> Self {
        Logits {
            entailment,
            neutral,
            contradiction,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entailment.is_finite() && self.neutral.is_finite() && self.contradiction.is_finite()
    }
}

impl From<[f64; 3]> for Logits {
    fn from([e, n, c]: [f64; 3]) -> Self {
        Logits::new(e, n, c)
    }
}

impl From<Logits> for [f64; 3] {
    fn from(l: Logits) -> Self {
        [l.entailment, l.neutral, l.contradiction]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub model_id: String,
    pub premise: String,
    pub hypothesis: String,
    pub logits: Logits,
}

impl ScoreRecord {
    pub fn key(&self) -> CacheKey {
        CacheKey::new(&self.model_id, &self.premise, &self.hypothesis)
    }

    pub fn entail_prob(&self, mode: ProbMode) -> f64 {
        entail_prob(&self.logits, mode)
    }
}

/// SHA-256 over length-prefixed fields, hex encoded. Exact UTF-8 bytes, no
/// normalization.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn new(model_id: &str, premise: &str, hypothesis: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"zsmine-score-v1\0");
        for field in [model_id, premise, hypothesis] {
            hasher.update((field.len() as u64).to_le_bytes());
            hasher.update(field.as_bytes());
        }
        CacheKey(hex::encode(hasher.finalize()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbMode {
    /// Softmax over (entailment, contradiction).
    #[default]
    DropNeutral,
    /// Softmax over all three logits.
    ThreeWay,
}

/// Entailment component of the softmax over the selected logits.
pub fn entail_prob(logits: &Logits, mode: ProbMode) -> f64 {
    match mode {
        ProbMode::DropNeutral => {
            // 1 / (1 + exp(c - e)), written to stay finite for large gaps
            let d = logits.contradiction - logits.entailment;
            if d > 0.0 {
                let z = (-d).exp();
                z / (1.0 + z)
            } else {
                1.0 / (1.0 + d.exp())
            }
        }
        ProbMode::ThreeWay => {
            let m = logits.entailment.max(logits.neutral).max(logits.contradiction);
            let e = (logits.entailment - m).exp();
            let n = (logits.neutral - m).exp();
            let c = (logits.contradiction - m).exp();
            e / (e + n + c)
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: usize, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("{} pair(s) missing from the score cache (indices {})", .indices.len(), preview(.indices))]
    CacheMiss { indices: Vec<usize> },
    #[error("backend error: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("scorer configuration: {0}")]
    Config(String),
}

fn preview(indices: &[usize]) -> String {
    let shown: Vec<String> = indices.iter().take(10).map(|i| i.to_string()).collect();
    let more = if indices.len() > 10 { ", ..." } else { "" };
    format!("{}{more}", shown.join(", "))
}

/// Something that turns (premise, hypothesis) pairs into logits.
pub trait EntailmentBackend: Send + Sync {
    /// One logits triple per pair, in input order.
    fn score_batch(&self, model_id: &str, pairs: &[(&str, &str)]) -> Result<Vec<Logits>, BackendError>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    CacheOnly,
    #[default]
    RemoteWithCache,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    pub backend: BackendKind,
    pub endpoint: String,
    pub model_id: String,
    pub batch_size: usize,
    #[serde(with = "secs")]
    pub request_timeout: Duration,
    pub retries: usize,
    /// First retry delay; doubles on each further attempt.
    #[serde(with = "secs")]
    pub retry_backoff: Duration,
    pub cache_path: Option<PathBuf>,
    /// Concurrent batch requests.
    pub jobs: usize,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            backend: BackendKind::RemoteWithCache,
            endpoint: "http://127.0.0.1:8000".to_string(),
            model_id: DEFAULT_MODEL.to_string(),
            batch_size: 16,
            request_timeout: Duration::from_secs(60),
            retries: 3,
            retry_backoff: Duration::from_millis(500),
            cache_path: None,
            jobs: 1,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.batch_size == 0 || self.batch_size > MAX_BATCH {
            return Err(ScoreError::Config(format!(
                "batch_size must be in 1..={MAX_BATCH}, got {}",
                self.batch_size
            )));
        }
        if self.jobs == 0 {
            return Err(ScoreError::Config("jobs must be at least 1".into()));
        }
        if self.backend != BackendKind::Remote && self.cache_path.is_none() {
            return Err(ScoreError::Config(format!(
                "backend {:?} requires a cache path",
                self.backend
            )));
        }
        Ok(())
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

pub struct Scorer {
    config: ScorerConfig,
    backend: Option<Arc<dyn EntailmentBackend>>,
    cache: Option<ScoreCache>,
}

impl Scorer {
    /// Builds the HTTP backend and opens the cache as the config asks.
    pub fn from_config(config: ScorerConfig) -> Result<Self, ScoreError> {
        config.validate()?;
        let backend: Option<Arc<dyn EntailmentBackend>> = match config.backend {
            BackendKind::CacheOnly => None,
            _ => Some(Arc::new(HttpBackend::new(
                &config.endpoint,
                config.request_timeout,
                config.retries,
                config.retry_backoff,
            )?)),
        };
        Self::assemble(config, backend)
    }

    /// Uses `backend` for remote modes instead of the HTTP client.
    pub fn with_backend(config: ScorerConfig, backend: Arc<dyn EntailmentBackend>) -> Result<Self, ScoreError> {
        config.validate()?;
        let backend = (config.backend != BackendKind::CacheOnly).then_some(backend);
        Self::assemble(config, backend)
    }

    fn assemble(config: ScorerConfig, backend: Option<Arc<dyn EntailmentBackend>>) -> Result<Self, ScoreError> {
        let cache = match (&config.backend, &config.cache_path) {
            (BackendKind::Remote, _) | (_, None) => None,
            (_, Some(path)) => Some(ScoreCache::open(path)?),
        };
        Ok(Scorer { config, backend, cache })
    }

    pub fn config(&self) -> &ScorerConfig {
        &self.config
    }

    pub fn cache(&self) -> Option<&ScoreCache> {
        self.cache.as_ref()
    }

    /// One record per pair, in input order. Cache hits never reach the
    /// backend; misses are fetched in batches of at most `batch_size`,
    /// written back and flushed before returning.
    pub fn score_pairs<P, H>(&self, pairs: &[(P, H)]) -> Result<Vec<ScoreRecord>, ScoreError>
    where
        P: AsRef<str> + Sync,
        H: AsRef<str> + Sync,
    {
        let model = self.config.model_id.as_str();
        let mut out: Vec<Option<ScoreRecord>> = vec![None; pairs.len()];
        if let Some(cache) = &self.cache {
            for (slot, (p, h)) in out.iter_mut().zip(pairs) {
                *slot = cache.get(model, p.as_ref(), h.as_ref());
            }
        }
        let missing: Vec<usize> = out
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.is_none().then_some(i))
            .collect();
        if missing.is_empty() {
            return Ok(out.into_iter().map(Option::unwrap).collect());
        }
        let Some(backend) = &self.backend else {
            return Err(ScoreError::CacheMiss { indices: missing });
        };

        // unique pairs among the misses, first occurrence order
        let mut unique: Vec<(&str, &str)> = Vec::new();
        let mut slot_of: HashMap<(&str, &str), usize> = HashMap::new();
        let mut assignment = Vec::with_capacity(missing.len());
        for &i in &missing {
            let pair = (pairs[i].0.as_ref(), pairs[i].1.as_ref());
            let slot = *slot_of.entry(pair).or_insert_with(|| {
                unique.push(pair);
                unique.len() - 1
            });
            assignment.push((i, slot));
        }

        let batches: Vec<&[(&str, &str)]> = unique.chunks(self.config.batch_size).collect();
        let fetch = |batch: &&[(&str, &str)]| -> Result<Vec<Logits>, ScoreError> {
            let logits = backend.score_batch(model, batch)?;
            if logits.len() != batch.len() {
                return Err(
                    BackendError::Protocol(format!("expected {} logits, got {}", batch.len(), logits.len())).into(),
                );
            }
            if let Some(bad) = logits.iter().find(|l| !l.is_finite()) {
                return Err(BackendError::Protocol(format!("non-finite logits {bad:?}")).into());
            }
            Ok(logits)
        };
        let fetched: Vec<Vec<Logits>> = if self.config.jobs > 1 && batches.len() > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.config.jobs)
                .build()
                .map_err(|e| ScoreError::Config(e.to_string()))?;
            pool.install(|| batches.par_iter().map(fetch).collect::<Result<_, _>>())?
        } else {
            batches.iter().map(fetch).collect::<Result<_, _>>()?
        };

        let records: Vec<ScoreRecord> = unique
            .iter()
            .zip(fetched.into_iter().flatten())
            .map(|((p, h), logits)| ScoreRecord {
                model_id: model.to_string(),
                premise: p.to_string(),
                hypothesis: h.to_string(),
                logits,
            })
            .collect();
        if let Some(cache) = &self.cache {
            for r in &records {
                cache.put(r.clone())?;
            }
            cache.flush()?;
        }
        for (i, slot) in assignment {
            out[i] = Some(records[slot].clone());
        }
        Ok(out.into_iter().map(Option::unwrap).collect())
    }
}
