use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CacheKey, Logits, ScoreRecord};

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("score cache {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("refusing to cache non-finite logits for {premise:?} / {hypothesis:?}")]
    NonFinite { premise: String, hypothesis: String },
}

/// One JSON Lines record.
#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    model_id: String,
    premise: String,
    hypothesis: String,
    logits: Logits,
}

/// Append-only JSON Lines score store.
///
/// Later lines with the same key supersede earlier ones. Reads go through an
/// in-memory map; writes are serialized through a single buffered writer.
pub struct ScoreCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, ScoreRecord>>,
    writer: Mutex<BufWriter<File>>,
    skipped: usize,
}

impl ScoreCache {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| CacheError::Io {
            path: path.clone(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)
            .map_err(io_err)?;

        let mut entries = HashMap::new();
        let mut skipped = 0;
        let reader = BufReader::new(&file);
        for (n, line) in reader.split(b'\n').enumerate() {
            let line = line.map_err(io_err)?;
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            match parse_line(&line) {
                Some(record) => {
                    entries.insert(record.key().as_str().to_string(), record);
                }
                None => {
                    skipped += 1;
                    log::warn!("{}: skipping corrupt line {}", path.display(), n + 1);
                }
            }
        }

        // a torn final write leaves no trailing newline; start fresh on a new line
        let len = file.seek(SeekFrom::End(0)).map_err(io_err)?;
        if len > 0 {
            file.seek(SeekFrom::Start(len - 1)).map_err(io_err)?;
            let mut last = [0u8; 1];
            file.read_exact(&mut last).map_err(io_err)?;
            if last[0] != b'\n' {
                file.write_all(b"\n").map_err(io_err)?;
            }
        }

        Ok(ScoreCache {
            path,
            entries: RwLock::new(entries),
            writer: Mutex::new(BufWriter::new(file)),
            skipped,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Lines that failed to parse on open.
    pub fn skipped_lines(&self) -> usize {
        self.skipped
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, model_id: &str, premise: &str, hypothesis: &str) -> Option<ScoreRecord> {
        let key = CacheKey::new(model_id, premise, hypothesis);
        let entries = self.entries.read().expect("cache lock");
        entries
            .get(key.as_str())
            .filter(|r| r.model_id == model_id && r.premise == premise && r.hypothesis == hypothesis)
            .cloned()
    }

    pub fn put(&self, record: ScoreRecord) -> Result<(), CacheError> {
        if !record.logits.is_finite() {
            return Err(CacheError::NonFinite {
                premise: record.premise,
                hypothesis: record.hypothesis,
            });
        }
        let key = record.key();
        let line = CacheLine {
            key: key.as_str().to_string(),
            model_id: record.model_id.clone(),
            premise: record.premise.clone(),
            hypothesis: record.hypothesis.clone(),
            logits: record.logits,
        };
        let mut text = serde_json::to_string(&line).expect("cache line serializes");
        text.push('\n');
        {
            let mut writer = self.writer.lock().expect("cache writer lock");
            writer.write_all(text.as_bytes()).map_err(|source| CacheError::Io {
                path: self.path.clone(),
                source,
            })?;
        }
        self.entries
            .write()
            .expect("cache lock")
            .insert(key.as_str().to_string(), record);
        Ok(())
    }

    /// Makes every preceding `put` durable.
    pub fn flush(&self) -> Result<(), CacheError> {
        let mut writer = self.writer.lock().expect("cache writer lock");
        let io_err = |source| CacheError::Io {
            path: self.path.clone(),
            source,
        };
        writer.flush().map_err(io_err)?;
        writer.get_ref().sync_data().map_err(io_err)
    }
}

impl Drop for ScoreCache {
    fn drop(&mut self) {
        if let Ok(mut w) = self.writer.lock() {
            let _ = w.flush();
        }
    }
}

fn parse_line(line: &[u8]) -> Option<ScoreRecord> {
    let line: CacheLine = serde_json::from_slice(line).ok()?;
    let record = ScoreRecord {
        model_id: line.model_id,
        premise: line.premise,
        hypothesis: line.hypothesis,
        logits: line.logits,
    };
    (record.logits.is_finite() && record.key().as_str() == line.key).then_some(record)
}
