//! Versioned JSON snapshot of a [`Lexicon`].
//!
//! ```json
//! {"version": 1, "release_id": "wordnet-3.0",
//!  "synsets": [{"offset": 6598915, "lemmas": [...], "gloss": "...",
//!               "hyponyms": [...], "hypernyms": [...]}],
//!  "sense_index": {"message.n.02": 6598915}}
//! ```

use std::collections::BTreeMap;
use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{Lexicon, Result, SenseName, Synset, SynsetId, WordNetError};

pub const SNAPSHOT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotDoc {
    version: u64,
    release_id: String,
    synsets: Vec<SynsetDoc>,
    sense_index: IndexMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynsetDoc {
    offset: u64,
    lemmas: Vec<String>,
    gloss: String,
    hyponyms: Vec<u64>,
    hypernyms: Vec<u64>,
}

pub fn encode(lexicon: &Lexicon) -> Vec<u8> {
    let doc = SnapshotDoc {
        version: SNAPSHOT_VERSION,
        release_id: lexicon.release_id().to_string(),
        synsets: lexicon
            .synsets()
            .iter()
            .map(|s| SynsetDoc {
                offset: s.id.offset,
                lemmas: s.lemmas.clone(),
                gloss: s.gloss.clone(),
                hyponyms: s.hyponyms.iter().map(|h| h.offset).collect(),
                hypernyms: s.hypernyms.iter().map(|h| h.offset).collect(),
            })
            .collect(),
        sense_index: lexicon
            .sense_index()
            .iter()
            .map(|(name, id)| (name.to_string(), id.offset))
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("snapshot serializes");
    out.push(b'\n');
    out
}

pub fn write(lexicon: &Lexicon, mut w: impl Write) -> Result<()> {
    w.write_all(&encode(lexicon))?;
    Ok(())
}

pub fn decode(bytes: &[u8]) -> Result<Lexicon> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| WordNetError::Schema(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| WordNetError::Schema("missing integer field `version`".into()))?;
    if version != SNAPSHOT_VERSION {
        return Err(WordNetError::Version {
            found: version,
            expected: SNAPSHOT_VERSION,
        });
    }
    let doc: SnapshotDoc = serde_json::from_value(value).map_err(|e| WordNetError::Schema(e.to_string()))?;

    let synsets = doc
        .synsets
        .into_iter()
        .map(|s| Synset {
            id: SynsetId::noun(s.offset),
            lemmas: s.lemmas,
            gloss: s.gloss,
            hyponyms: s.hyponyms.into_iter().map(SynsetId::noun).collect(),
            hypernyms: s.hypernyms.into_iter().map(SynsetId::noun).collect(),
        })
        .collect();
    let mut sense_index = BTreeMap::new();
    for (name, offset) in doc.sense_index {
        let name: SenseName = name.parse()?;
        sense_index.insert(name, SynsetId::noun(offset));
    }
    Lexicon::new(doc.release_id, synsets, sense_index)
}
