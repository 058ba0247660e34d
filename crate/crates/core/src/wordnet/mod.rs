//! In-memory WordNet noun graph.
//!
//! Loaded either from the raw `index.noun` / `data.noun` database files or
//! from a JSON snapshot (see [`snapshot`]). The graph is immutable once built
//! and can be shared freely between threads.

mod parse;
pub mod snapshot;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use parse::{load_wordnet, load_wordnet_dir, parse_wordnet};

/// Sense that anchors the message-type label space.
pub const MESSAGE_SENSE: &str = "message.n.02";

/// Hyponyms of `message.n.02` that are treated as suggestion candidates,
/// in label order.
pub const SUGGESTION_CANDIDATES: [&str; 8] = [
    "direction.n.06",
    "guidance.n.01",
    "offer.n.02",
    "promotion.n.01",
    "proposal.n.01",
    "reminder.n.01",
    "request.n.01",
    "submission.n.01",
];

/// The 32 direct hyponyms of `message.n.02` used as the full message-type
/// label set, sorted by synset name. WordNet 3.0 additionally lists
/// `memorial.n.02`, which is not part of this set.
pub const MESSAGE_HYPONYMS: [&str; 32] = [
    "acknowledgment.n.03",
    "approval.n.04",
    "body.n.08",
    "commitment.n.04",
    "corker.n.01",
    "digression.n.01",
    "direction.n.06",
    "disapproval.n.02",
    "disrespect.n.01",
    "drivel.n.01",
    "guidance.n.01",
    "information.n.01",
    "interpolation.n.01",
    "latent_content.n.01",
    "meaning.n.01",
    "narrative.n.01",
    "nonsense.n.01",
    "offer.n.02",
    "opinion.n.02",
    "promotion.n.01",
    "proposal.n.01",
    "refusal.n.02",
    "reminder.n.01",
    "request.n.01",
    "respects.n.01",
    "sensationalism.n.01",
    "shocker.n.02",
    "statement.n.01",
    "statement.n.04",
    "subject.n.01",
    "submission.n.01",
    "wit.n.01",
];

#[derive(Debug, Error)]
pub enum WordNetError {
    #[error("{file} line {line}: {message}")]
    Parse {
        file: &'static str,
        line: usize,
        message: String,
    },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid sense name `{0}` (expected lemma.n.NN)")]
    InvalidSenseName(String),
    #[error("unsupported snapshot version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },
    #[error("snapshot schema violation: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, WordNetError>;

/// Part of speech. Only nouns are loaded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pos {
    #[default]
    Noun,
}

impl Pos {
    pub fn tag(self) -> char {
        match self {
            Pos::Noun => 'n',
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag())
    }
}

/// Byte offset of a synset in `data.noun`; unique within one release.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SynsetId {
    pub offset: u64,
    pub pos: Pos,
}

impl SynsetId {
    pub fn noun(offset: u64) -> Self {
        SynsetId { offset, pos: Pos::Noun }
    }
}

impl fmt::Display for SynsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08}-{}", self.offset, self.pos)
    }
}

/// A sense name in the `lemma.pos.NN` form, e.g. `message.n.02`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SenseName {
    pub lemma: String,
    pub pos: Pos,
    pub sense: u32,
}

impl SenseName {
    pub fn noun(lemma: &str, sense: u32) -> Self {
        SenseName {
            lemma: lemma.to_lowercase(),
            pos: Pos::Noun,
            sense,
        }
    }
}

impl fmt::Display for SenseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{:02}", self.lemma, self.pos, self.sense)
    }
}

impl FromStr for SenseName {
    type Err = WordNetError;

    fn from_str(s: &str) -> Result<Self> {
        let invalid = || WordNetError::InvalidSenseName(s.to_string());
        // lemmas may themselves contain dots (`st._john's_wort`), so split from the right
        let mut parts = s.rsplitn(3, '.');
        let sense = parts.next().ok_or_else(invalid)?;
        let pos = parts.next().ok_or_else(invalid)?;
        let lemma = parts.next().ok_or_else(invalid)?;
        if lemma.is_empty() || pos != "n" || sense.is_empty() {
            return Err(invalid());
        }
        if !sense.bytes().all(|b| b.is_ascii_digit()) {
            return Err(invalid());
        }
        let sense: u32 = sense.parse().map_err(|_| invalid())?;
        if sense == 0 {
            return Err(invalid());
        }
        Ok(SenseName::noun(lemma, sense))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Synset {
    pub id: SynsetId,
    /// Lemmas in file order, case and underscores as stored in the database.
    pub lemmas: Vec<String>,
    /// Everything after the `|` separator, trimmed.
    pub gloss: String,
    pub hyponyms: Vec<SynsetId>,
    pub hypernyms: Vec<SynsetId>,
}

impl Synset {
    pub fn first_lemma(&self) -> &str {
        &self.lemmas[0]
    }

    pub fn all_lemmas(&self) -> &[String] {
        &self.lemmas
    }

    /// Gloss text before the first `; "` example quote.
    pub fn definition(&self) -> &str {
        match self.gloss.find("; \"") {
            Some(end) => self.gloss[..end].trim_end(),
            None => &self.gloss,
        }
    }
}

/// Immutable noun graph plus the sense index.
#[derive(Clone, Debug)]
pub struct Lexicon {
    release_id: String,
    synsets: Vec<Synset>,
    sense_index: BTreeMap<SenseName, SynsetId>,
    by_offset: HashMap<u64, usize>,
    names: HashMap<u64, SenseName>,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.release_id == other.release_id && self.synsets == other.synsets && self.sense_index == other.sense_index
    }
}

impl Eq for Lexicon {}

impl Lexicon {
    /// Builds a lexicon and checks its referential integrity: every edge and
    /// index entry must point at a loaded synset, and hyponym/hypernym edges
    /// must mirror each other.
    pub fn new(
        release_id: impl Into<String>,
        synsets: Vec<Synset>,
        sense_index: BTreeMap<SenseName, SynsetId>,
    ) -> Result<Self> {
        let mut by_offset = HashMap::with_capacity(synsets.len());
        for (i, s) in synsets.iter().enumerate() {
            if s.lemmas.is_empty() {
                return Err(WordNetError::Integrity(format!("synset {} has no lemmas", s.id)));
            }
            if by_offset.insert(s.id.offset, i).is_some() {
                return Err(WordNetError::Integrity(format!("duplicate synset {}", s.id)));
            }
        }

        let mut hypo_edges = HashSet::new();
        let mut hyper_edges = HashSet::new();
        for s in &synsets {
            for h in &s.hyponyms {
                if !by_offset.contains_key(&h.offset) {
                    return Err(WordNetError::Integrity(format!(
                        "synset {} has dangling hyponym pointer {}",
                        s.id, h
                    )));
                }
                hypo_edges.insert((s.id.offset, h.offset));
            }
            for h in &s.hypernyms {
                if !by_offset.contains_key(&h.offset) {
                    return Err(WordNetError::Integrity(format!(
                        "synset {} has dangling hypernym pointer {}",
                        s.id, h
                    )));
                }
                hyper_edges.insert((h.offset, s.id.offset));
            }
        }
        if let Some((a, b)) = hypo_edges.symmetric_difference(&hyper_edges).next() {
            return Err(WordNetError::Integrity(format!(
                "hyponym/hypernym edges between {:08} and {:08} are not mutually inverse",
                a, b
            )));
        }

        let mut names = HashMap::new();
        for (name, id) in &sense_index {
            let Some(&i) = by_offset.get(&id.offset) else {
                return Err(WordNetError::Integrity(format!(
                    "sense {} points at missing synset {}",
                    name, id
                )));
            };
            if synsets[i].first_lemma().to_lowercase() == name.lemma {
                names.entry(id.offset).or_insert_with(|| name.clone());
            }
        }

        Ok(Lexicon {
            release_id: release_id.into(),
            synsets,
            sense_index,
            by_offset,
            names,
        })
    }

    pub fn empty(release_id: impl Into<String>) -> Self {
        Lexicon::new(release_id, Vec::new(), BTreeMap::new()).expect("empty lexicon is consistent")
    }

    pub fn release_id(&self) -> &str {
        &self.release_id
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    /// All synsets in file order.
    pub fn synsets(&self) -> &[Synset] {
        &self.synsets
    }

    pub fn sense_index(&self) -> &BTreeMap<SenseName, SynsetId> {
        &self.sense_index
    }

    pub fn synset(&self, id: SynsetId) -> Result<&Synset> {
        self.by_offset
            .get(&id.offset)
            .map(|&i| &self.synsets[i])
            .ok_or_else(|| WordNetError::NotFound(format!("synset {}", id)))
    }

    pub fn resolve_sense(&self, name: &SenseName) -> Result<SynsetId> {
        self.sense_index
            .get(name)
            .copied()
            .ok_or_else(|| WordNetError::NotFound(format!("sense {}", name)))
    }

    /// Parses `name` and returns the synset it denotes.
    pub fn lookup(&self, name: &str) -> Result<&Synset> {
        let name: SenseName = name.parse()?;
        self.synset(self.resolve_sense(&name)?)
    }

    /// All senses of `lemma` in index order.
    pub fn senses_of(&self, lemma: &str) -> Vec<SynsetId> {
        let lemma = lemma.to_lowercase();
        self.sense_index
            .range(SenseName::noun(&lemma, 0)..)
            .take_while(|(name, _)| name.lemma == lemma)
            .map(|(_, id)| *id)
            .collect()
    }

    /// Direct hyponyms in file order.
    pub fn hyponyms(&self, id: SynsetId) -> Result<Vec<&Synset>> {
        let synset = self.synset(id)?;
        synset.hyponyms.iter().map(|h| self.synset(*h)).collect()
    }

    /// Direct hypernyms in file order.
    pub fn hypernyms(&self, id: SynsetId) -> Result<Vec<&Synset>> {
        let synset = self.synset(id)?;
        synset.hypernyms.iter().map(|h| self.synset(*h)).collect()
    }

    /// The `first_lemma.n.NN` name of a synset, when the sense index covers it.
    pub fn canonical_name(&self, id: SynsetId) -> Option<&SenseName> {
        self.names.get(&id.offset)
    }

    /// Sub-lexicon holding only `keep`. Edges and index entries leaving the
    /// kept set are dropped; file order is preserved.
    pub fn restrict(&self, keep: impl IntoIterator<Item = SynsetId>) -> Result<Lexicon> {
        let keep: HashSet<u64> = keep.into_iter().map(|id| id.offset).collect();
        for offset in &keep {
            if !self.by_offset.contains_key(offset) {
                return Err(WordNetError::NotFound(format!("synset {:08}-n", offset)));
            }
        }
        let synsets = self
            .synsets
            .iter()
            .filter(|s| keep.contains(&s.id.offset))
            .map(|s| Synset {
                id: s.id,
                lemmas: s.lemmas.clone(),
                gloss: s.gloss.clone(),
                hyponyms: s
                    .hyponyms
                    .iter()
                    .filter(|h| keep.contains(&h.offset))
                    .copied()
                    .collect(),
                hypernyms: s
                    .hypernyms
                    .iter()
                    .filter(|h| keep.contains(&h.offset))
                    .copied()
                    .collect(),
            })
            .collect();
        let sense_index = self
            .sense_index
            .iter()
            .filter(|(_, id)| keep.contains(&id.offset))
            .map(|(n, id)| (n.clone(), *id))
            .collect();
        Lexicon::new(self.release_id.clone(), synsets, sense_index)
    }
}

/// The bundled snapshot: `message.n.02` with its direct hyponyms plus every
/// noun sense of `suggestion`, extracted from WordNet 3.0.
pub fn fixture_lexicon() -> Lexicon {
    snapshot::decode(FIXTURE_SNAPSHOT.as_bytes()).expect("bundled fixture is valid")
}

pub const FIXTURE_SNAPSHOT: &str = include_str!("../../fixtures/message_subtree.json");
