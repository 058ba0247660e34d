//! Hypothesis sentences and their class mapping.
//!
//! Every built-in space renders hypotheses from the fixed prefix
//! `"This text is "`. Spaces can also be exported to and imported from JSON
//! so users can supply their own wording.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wordnet::{Lexicon, Synset, WordNetError, MESSAGE_HYPONYMS, MESSAGE_SENSE, SUGGESTION_CANDIDATES};

pub const TEMPLATE_PREFIX: &str = "This text is ";
pub const POSITIVE_LABEL: &str = "SUGGESTION";
pub const NEGATIVE_LABEL: &str = "NOT_SUGGESTION";
pub const NEGATIVE_HYPOTHESIS: &str = "This text is not a suggestion.";

/// Senses of "suggestion" used as class definitions.
pub const SUGGESTION_DEFINITION_SENSES: [&str; 3] = ["suggestion.n.01", "suggestion.n.02", "suggestion.n.04"];

#[derive(Debug, Error)]
pub enum LabelError {
    #[error(transparent)]
    WordNet(#[from] WordNetError),
    #[error("label space integrity: {0}")]
    Integrity(String),
    #[error("invalid label space: {0}")]
    Invalid(String),
    #[error("label space document: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Approach {
    A1,
    #[serde(rename = "A1_VARIANT")]
    A1Variant,
    A2,
    #[serde(rename = "A3_PLAIN")]
    A3Plain,
    #[serde(rename = "A3_EXTENDED")]
    A3Extended,
}

impl Approach {
    pub fn is_message_types(self) -> bool {
        matches!(self, Approach::A3Plain | Approach::A3Extended)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappedClass {
    Suggestion,
    NonSuggestion,
    /// Decided later by the subset mapping.
    Deferred,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub label_id: String,
    pub hypothesis: String,
    pub mapped_class: MappedClass,
}

impl LabelSpec {
    fn new(id: impl Into<String>, hypothesis: impl Into<String>, class: MappedClass) -> Self {
        LabelSpec {
            label_id: id.into(),
            hypothesis: hypothesis.into(),
            mapped_class: class,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub approach: Approach,
    pub labels: Vec<LabelSpec>,
    pub negative_label_id: Option<String>,
}

impl LabelSpace {
    pub fn new(
        approach: Approach,
        labels: Vec<LabelSpec>,
        negative_label_id: Option<String>,
    ) -> Result<Self, LabelError> {
        let space = LabelSpace {
            approach,
            labels,
            negative_label_id,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<(), LabelError> {
        let invalid = |m: String| Err(LabelError::Invalid(m));
        if self.labels.is_empty() {
            return invalid("no labels".into());
        }
        let mut seen = HashSet::new();
        for l in &self.labels {
            if l.label_id.is_empty() {
                return invalid("empty label id".into());
            }
            if l.hypothesis.trim().is_empty() {
                return invalid(format!("label `{}` has an empty hypothesis", l.label_id));
            }
            if !seen.insert(l.label_id.as_str()) {
                return invalid(format!("duplicate label id `{}`", l.label_id));
            }
        }
        let negatives: Vec<&LabelSpec> = self
            .labels
            .iter()
            .filter(|l| l.mapped_class == MappedClass::NonSuggestion)
            .collect();
        if let Some(neg) = &self.negative_label_id {
            match self.label(neg) {
                Some(l) if l.mapped_class == MappedClass::NonSuggestion => {}
                Some(_) => return invalid(format!("negative label `{neg}` is not non_suggestion")),
                None => return invalid(format!("negative label `{neg}` is not in the space")),
            }
        }
        if self.approach.is_message_types() {
            if self.labels.iter().any(|l| l.mapped_class == MappedClass::Suggestion) {
                return invalid("message-type spaces hold only deferred labels".into());
            }
            if negatives.len() > 1 {
                return invalid("at most one non_suggestion label allowed".into());
            }
        } else {
            if negatives.len() != 1 {
                return invalid(format!(
                    "{:?} needs exactly one non_suggestion label, found {}",
                    self.approach,
                    negatives.len()
                ));
            }
            if self.labels.iter().any(|l| l.mapped_class == MappedClass::Deferred) {
                return invalid(format!("{:?} does not allow deferred labels", self.approach));
            }
        }
        if negatives.len() == 1 && self.negative_label_id.as_deref() != Some(&negatives[0].label_id) {
            return invalid("negative_label_id must name the non_suggestion label".into());
        }
        Ok(())
    }

    pub fn label(&self, id: &str) -> Option<&LabelSpec> {
        self.labels.iter().find(|l| l.label_id == id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.label_id == id)
    }

    pub fn negative(&self) -> Option<&LabelSpec> {
        self.negative_label_id.as_deref().and_then(|id| self.label(id))
    }

    pub fn label_ids(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|l| l.label_id.as_str())
    }

    pub fn with_class(&self, class: MappedClass) -> impl Iterator<Item = &LabelSpec> {
        self.labels.iter().filter(move |l| l.mapped_class == class)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("label space serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LabelError> {
        let space: LabelSpace = serde_json::from_str(text)?;
        space.validate()?;
        Ok(space)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum A1Wording {
    /// "This text is [not] a suggestion."
    IsA,
    /// "This text is [not] suggesting."
    IsSuggesting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HyponymScope {
    /// The eight suggestion candidates.
    Candidates,
    /// The 32 message types of the published table.
    Table,
    /// Every direct hyponym present in the lexicon, sorted by synset name.
    AllDirect,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RenderOptions {
    /// Choose "an" before vowel-initial phrases instead of always "a".
    pub smart_article: bool,
    /// Replace `_` in lemmas with spaces.
    pub space_underscores: bool,
}

pub fn build_approach1(wording: A1Wording) -> LabelSpace {
    let (approach, pos, neg) = match wording {
        A1Wording::IsA => (Approach::A1, "This text is a suggestion.", NEGATIVE_HYPOTHESIS),
        A1Wording::IsSuggesting => (
            Approach::A1Variant,
            "This text is suggesting.",
            "This text is not suggesting.",
        ),
    };
    LabelSpace {
        approach,
        labels: vec![
            LabelSpec::new(POSITIVE_LABEL, pos, MappedClass::Suggestion),
            LabelSpec::new(NEGATIVE_LABEL, neg, MappedClass::NonSuggestion),
        ],
        negative_label_id: Some(NEGATIVE_LABEL.to_string()),
    }
}

/// Three WordNet definitions of "suggestion" against the negative hypothesis.
/// Definitions already carry their own article ("an idea ...", "a proposal
/// ...", "persuasion ..."), so they follow the prefix directly.
pub fn build_approach2(lexicon: &Lexicon) -> Result<LabelSpace, LabelError> {
    let mut labels = Vec::with_capacity(4);
    for sense in SUGGESTION_DEFINITION_SENSES {
        let synset = lexicon.lookup(sense)?;
        labels.push(LabelSpec::new(
            sense,
            format!("{TEMPLATE_PREFIX}{}", synset.definition()),
            MappedClass::Suggestion,
        ));
    }
    labels.push(LabelSpec::new(
        NEGATIVE_LABEL,
        NEGATIVE_HYPOTHESIS,
        MappedClass::NonSuggestion,
    ));
    LabelSpace::new(Approach::A2, labels, Some(NEGATIVE_LABEL.to_string()))
}

/// One deferred label per message type: `"This text is a [LEMMA]."`, or with
/// `extended`, all lemmas joined by `" or "`.
pub fn build_approach3(
    lexicon: &Lexicon,
    scope: HyponymScope,
    extended: bool,
    include_negative: bool,
    options: RenderOptions,
) -> Result<LabelSpace, LabelError> {
    let synsets = message_types(lexicon, scope)?;

    // label id is the first lemma; lemma collisions (statement.n.01 / statement.n.04)
    // fall back to the synset name
    let mut first_counts = std::collections::HashMap::new();
    for (_, s) in &synsets {
        *first_counts.entry(s.first_lemma()).or_insert(0usize) += 1;
    }

    let mut labels = Vec::with_capacity(synsets.len() + 1);
    for (name, synset) in &synsets {
        let id = if first_counts[synset.first_lemma()] > 1 {
            name.clone()
        } else {
            synset.first_lemma().to_string()
        };
        labels.push(LabelSpec::new(
            id,
            render_message_type(synset, extended, options),
            MappedClass::Deferred,
        ));
    }
    let negative = include_negative.then(|| {
        labels.push(LabelSpec::new(
            NEGATIVE_LABEL,
            NEGATIVE_HYPOTHESIS,
            MappedClass::NonSuggestion,
        ));
        NEGATIVE_LABEL.to_string()
    });
    let approach = if extended {
        Approach::A3Extended
    } else {
        Approach::A3Plain
    };
    LabelSpace::new(approach, labels, negative)
}

pub fn render_message_type(synset: &Synset, extended: bool, options: RenderOptions) -> String {
    let mut phrase = if extended {
        synset.all_lemmas().join(" or ")
    } else {
        synset.first_lemma().to_string()
    };
    if options.space_underscores {
        phrase = phrase.replace('_', " ");
    }
    let article = if options.smart_article && starts_with_vowel(&phrase) {
        "an"
    } else {
        "a"
    };
    format!("{TEMPLATE_PREFIX}{article} {phrase}.")
}

fn starts_with_vowel(s: &str) -> bool {
    matches!(
        s.chars().next().map(|c| c.to_ascii_lowercase()),
        Some('a' | 'e' | 'i' | 'o' | 'u')
    )
}

/// Resolves the in-scope hyponyms of `message.n.02` as (synset name, synset).
fn message_types(lexicon: &Lexicon, scope: HyponymScope) -> Result<Vec<(String, &Synset)>, LabelError> {
    let missing = |e: WordNetError| LabelError::Integrity(format!("lexicon lacks the {MESSAGE_SENSE} subtree: {e}"));
    let parent = lexicon.lookup(MESSAGE_SENSE).map_err(missing)?;

    let named = |names: &[&str]| -> Result<Vec<(String, &Synset)>, LabelError> {
        names
            .iter()
            .map(|name| {
                let s = lexicon.lookup(name).map_err(missing)?;
                if !parent.hyponyms.contains(&s.id) {
                    return Err(LabelError::Integrity(format!(
                        "{name} is not a direct hyponym of {MESSAGE_SENSE}"
                    )));
                }
                Ok((name.to_string(), s))
            })
            .collect()
    };

    match scope {
        HyponymScope::Candidates => named(&SUGGESTION_CANDIDATES),
        HyponymScope::Table => named(&MESSAGE_HYPONYMS),
        HyponymScope::AllDirect => {
            let mut all: Vec<(String, &Synset)> = lexicon
                .hyponyms(parent.id)?
                .into_iter()
                .map(|s| {
                    let name = lexicon
                        .canonical_name(s.id)
                        .map(|n| n.to_string())
                        .unwrap_or_else(|| s.id.to_string());
                    (name, s)
                })
                .collect();
            all.sort_by(|a, b| a.0.cmp(&b.0));
            Ok(all)
        }
    }
}
