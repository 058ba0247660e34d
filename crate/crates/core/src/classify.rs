//! Decision rules that turn per-hypothesis entailment probabilities into a
//! suggestion / non-suggestion prediction.

use std::collections::HashSet;
use std::io::{Read, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Class, LabeledCorpus};
use crate::labels::{LabelSpace, MappedClass};
use crate::scoring::{ProbMode, ScoreError, Scorer};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("no score for label `{label}` on sentence `{sentence_id}`")]
    MissingScore { sentence_id: String, label: String },
    #[error("decision contract: {0}")]
    Contract(String),
    #[error("scoring sentence #{index} (`{sentence_id}`): {source}")]
    Scoring {
        index: usize,
        sentence_id: String,
        #[source]
        source: ScoreError,
    },
    #[error("predictions file: {0}")]
    Io(String),
}

/// Entailment probability of every label for one premise, in label order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PremiseScores {
    pub sentence_id: String,
    pub premise: String,
    pub by_label: IndexMap<String, f64>,
}

impl PremiseScores {
    fn score(&self, label: &str) -> Result<f64, ClassifyError> {
        self.by_label
            .get(label)
            .copied()
            .ok_or_else(|| ClassifyError::MissingScore {
                sentence_id: self.sentence_id.clone(),
                label: label.to_string(),
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sentence_id: String,
    pub premise: String,
    pub predicted: Class,
    pub winning_label: String,
    pub winning_score: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Max,
    Mean,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionMode {
    /// Positive hypothesis against its negation; ties go to non-suggestion.
    BinaryArgmax,
    /// Best definition (aggregated) against the negative hypothesis.
    DefsVsNegative { aggregate: Aggregate },
    /// Argmax over the suggestion set plus the negative label.
    Competition { suggestion_set: Vec<String> },
    /// Argmax over every deferred label; suggestion iff the winner is in the set.
    Mapping { suggestion_set: Vec<String> },
}

impl DecisionMode {
    pub fn suggestion_set(&self) -> Option<&[String]> {
        match self {
            DecisionMode::Competition { suggestion_set } | DecisionMode::Mapping { suggestion_set } => {
                Some(suggestion_set)
            }
            _ => None,
        }
    }

    /// Checks the mode against the label space before any scoring happens.
    pub fn validate(&self, space: &LabelSpace) -> Result<(), ClassifyError> {
        let contract = |m: String| Err(ClassifyError::Contract(m));
        match self {
            DecisionMode::BinaryArgmax | DecisionMode::DefsVsNegative { .. } => {
                let positives = space.with_class(MappedClass::Suggestion).count();
                if positives == 0 {
                    return contract("space has no suggestion-mapped label".into());
                }
                if matches!(self, DecisionMode::BinaryArgmax) && positives != 1 {
                    return contract(format!("binary_argmax needs one positive label, found {positives}"));
                }
                if space.negative().is_none() {
                    return contract("space has no negative label".into());
                }
            }
            DecisionMode::Competition { suggestion_set } | DecisionMode::Mapping { suggestion_set } => {
                if suggestion_set.is_empty() {
                    return contract("suggestion set is empty".into());
                }
                for id in suggestion_set {
                    match space.label(id) {
                        Some(l) if l.mapped_class == MappedClass::Deferred => {}
                        Some(_) => return contract(format!("`{id}` is not a deferred label")),
                        None => return contract(format!("`{id}` is not in the label space")),
                    }
                }
                if matches!(self, DecisionMode::Competition { .. }) && space.negative().is_none() {
                    return contract("competition mode needs a negative label".into());
                }
            }
        }
        Ok(())
    }
}

/// First maximum wins.
fn argmax<'a>(candidates: impl IntoIterator<Item = (&'a str, f64)>) -> Option<(&'a str, f64)> {
    let mut best: Option<(&str, f64)> = None;
    for (id, s) in candidates {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((id, s));
        }
    }
    best
}

/// Index (into the space's labels) and score of the best deferred label.
pub fn mapping_winner(scores: &PremiseScores, space: &LabelSpace) -> Result<(usize, f64), ClassifyError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, l) in space.labels.iter().enumerate() {
        if l.mapped_class != MappedClass::Deferred {
            continue;
        }
        let s = scores.score(&l.label_id)?;
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.ok_or_else(|| ClassifyError::Contract("space has no deferred labels".into()))
}

pub fn classify(scores: &PremiseScores, space: &LabelSpace, mode: &DecisionMode) -> Result<Prediction, ClassifyError> {
    mode.validate(space)?;
    let predict = |class: Class, label: &str, score: f64| Prediction {
        sentence_id: scores.sentence_id.clone(),
        premise: scores.premise.clone(),
        predicted: class,
        winning_label: label.to_string(),
        winning_score: score,
    };
    let negative = space.negative();

    match mode {
        DecisionMode::BinaryArgmax => {
            let pos = space.with_class(MappedClass::Suggestion).next().expect("validated");
            let neg = negative.expect("validated");
            let (ps, ns) = (scores.score(&pos.label_id)?, scores.score(&neg.label_id)?);
            Ok(if ps > ns {
                predict(Class::Suggestion, &pos.label_id, ps)
            } else {
                predict(Class::NonSuggestion, &neg.label_id, ns)
            })
        }
        DecisionMode::DefsVsNegative { aggregate } => {
            let neg = negative.expect("validated");
            let defs = space
                .with_class(MappedClass::Suggestion)
                .map(|l| Ok((l.label_id.as_str(), scores.score(&l.label_id)?)))
                .collect::<Result<Vec<_>, ClassifyError>>()?;
            let ns = scores.score(&neg.label_id)?;
            let (best_id, best) = argmax(defs.iter().copied()).expect("validated");
            let agg = match aggregate {
                Aggregate::Max => best,
                Aggregate::Mean => defs.iter().map(|(_, s)| s).sum::<f64>() / defs.len() as f64,
            };
            Ok(if agg > ns {
                predict(Class::Suggestion, best_id, best)
            } else {
                predict(Class::NonSuggestion, &neg.label_id, ns)
            })
        }
        DecisionMode::Competition { suggestion_set } => {
            let neg = negative.expect("validated");
            let members: HashSet<&str> = suggestion_set.iter().map(String::as_str).collect();
            let candidates = space
                .labels
                .iter()
                .filter(|l| members.contains(l.label_id.as_str()) || l.label_id == neg.label_id)
                .map(|l| Ok((l.label_id.as_str(), scores.score(&l.label_id)?)))
                .collect::<Result<Vec<_>, ClassifyError>>()?;
            let (id, s) = argmax(candidates).expect("validated");
            let class = if members.contains(id) {
                Class::Suggestion
            } else {
                Class::NonSuggestion
            };
            Ok(predict(class, id, s))
        }
        DecisionMode::Mapping { suggestion_set } => {
            let (i, s) = mapping_winner(scores, space)?;
            let id = &space.labels[i].label_id;
            let class = if suggestion_set.iter().any(|m| m == id) {
                Class::Suggestion
            } else {
                Class::NonSuggestion
            };
            Ok(predict(class, id, s))
        }
    }
}

/// Scores every (sentence, hypothesis) pair of the corpus, requesting each
/// distinct pair once, and converts logits to entailment probabilities.
pub fn score_corpus(
    corpus: &LabeledCorpus,
    space: &LabelSpace,
    scorer: &Scorer,
    prob_mode: ProbMode,
) -> Result<Vec<PremiseScores>, ClassifyError> {
    let mut unique: IndexMap<(&str, &str), usize> = IndexMap::new();
    for (i, item) in corpus.items.iter().enumerate() {
        for l in &space.labels {
            unique
                .entry((item.sentence.as_str(), l.hypothesis.as_str()))
                .or_insert(i);
        }
    }
    let pairs: Vec<(&str, &str)> = unique.keys().copied().collect();
    let records = scorer.score_pairs(&pairs).map_err(|source| {
        let first = match &source {
            ScoreError::CacheMiss { indices } => indices.first().map(|&k| unique[k]).unwrap_or(0),
            _ => 0,
        };
        ClassifyError::Scoring {
            index: first,
            sentence_id: corpus.items.get(first).map(|i| i.id.clone()).unwrap_or_default(),
            source,
        }
    })?;

    Ok(corpus
        .items
        .iter()
        .map(|item| {
            let by_label = space
                .labels
                .iter()
                .map(|l| {
                    let k = unique
                        .get_index_of(&(item.sentence.as_str(), l.hypothesis.as_str()))
                        .expect("every pair was requested");
                    (l.label_id.clone(), records[k].entail_prob(prob_mode))
                })
                .collect();
            PremiseScores {
                sentence_id: item.id.clone(),
                premise: item.sentence.clone(),
                by_label,
            }
        })
        .collect())
}

/// One prediction per sentence, in corpus order.
pub fn classify_corpus(
    corpus: &LabeledCorpus,
    space: &LabelSpace,
    mode: &DecisionMode,
    scorer: &Scorer,
    prob_mode: ProbMode,
) -> Result<Vec<Prediction>, ClassifyError> {
    mode.validate(space)?;
    score_corpus(corpus, space, scorer, prob_mode)?
        .iter()
        .map(|s| classify(s, space, mode))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct PredictionRow {
    sentence_id: String,
    predicted: Class,
    winning_label: String,
    winning_score: f64,
}

/// `sentence_id,predicted,winning_label,winning_score`
pub fn write_predictions_csv(predictions: &[Prediction], w: impl Write) -> Result<(), ClassifyError> {
    let mut wtr = csv::Writer::from_writer(w);
    for p in predictions {
        wtr.serialize(PredictionRow {
            sentence_id: p.sentence_id.clone(),
            predicted: p.predicted,
            winning_label: p.winning_label.clone(),
            winning_score: p.winning_score,
        })
        .map_err(|e| ClassifyError::Io(e.to_string()))?;
    }
    wtr.flush().map_err(|e| ClassifyError::Io(e.to_string()))
}

/// Reads the CSV written by [`write_predictions_csv`]; premises are left empty.
pub fn read_predictions_csv(r: impl Read) -> Result<Vec<Prediction>, ClassifyError> {
    csv::Reader::from_reader(r)
        .deserialize::<PredictionRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| ClassifyError::Io(format!("row {}: {e}", i + 2)))?;
            Ok(Prediction {
                sentence_id: row.sentence_id,
                premise: String::new(),
                predicted: row.predicted,
                winning_label: row.winning_label,
                winning_score: row.winning_score,
            })
        })
        .collect()
}
