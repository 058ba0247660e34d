//! Relative word frequencies of (gold) suggestion sentences per domain.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Class, LabeledCorpus};

#[derive(Debug, Error)]
pub enum FreqError {
    #[error("no tokens left after filtering `{0}`")]
    EmptyInput(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassFilter {
    Suggestion,
    NonSuggestion,
    All,
}

impl ClassFilter {
    fn keeps(self, gold: Class) -> bool {
        match self {
            ClassFilter::Suggestion => gold == Class::Suggestion,
            ClassFilter::NonSuggestion => gold == Class::NonSuggestion,
            ClassFilter::All => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyProfile {
    pub domain: String,
    pub total_tokens: usize,
    pub counts: BTreeMap<String, usize>,
}

impl FrequencyProfile {
    pub fn rel_freq(&self, token: &str) -> f64 {
        self.counts
            .get(token)
            .map_or(0.0, |&c| c as f64 / self.total_tokens as f64)
    }

    pub fn rel_freqs(&self) -> impl Iterator<Item = (&str, f64)> {
        self.counts
            .iter()
            .map(|(t, &c)| (t.as_str(), c as f64 / self.total_tokens as f64))
    }

    /// `k` most frequent tokens; equal counts in token order.
    pub fn top(&self, k: usize) -> Vec<&str> {
        let mut all: Vec<(&str, usize)> = self.counts.iter().map(|(t, &c)| (t.as_str(), c)).collect();
        all.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        all.into_iter().take(k).map(|(t, _)| t).collect()
    }
}

/// Lowercase, split on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

pub fn profile<'a>(
    domain: &str,
    corpora: impl IntoIterator<Item = &'a LabeledCorpus>,
    filter: ClassFilter,
    stopwords: Option<&HashSet<String>>,
) -> Result<FrequencyProfile, FreqError> {
    let mut counts = BTreeMap::new();
    let mut total = 0;
    for corpus in corpora {
        for item in corpus.items.iter().filter(|i| filter.keeps(i.gold)) {
            for token in tokenize(&item.sentence) {
                if stopwords.is_some_and(|s| s.contains(&token)) {
                    continue;
                }
                *counts.entry(token).or_insert(0) += 1;
                total += 1;
            }
        }
    }
    if total == 0 {
        return Err(FreqError::EmptyInput(domain.to_string()));
    }
    Ok(FrequencyProfile {
        domain: domain.to_string(),
        total_tokens: total,
        counts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub token: String,
    pub rel_freq_a: f64,
    pub rel_freq_b: f64,
    pub log_ratio: f64,
}

/// Union of both profiles' top-`k` tokens with the smoothed log ratio
/// `ln((fa + eps) / (fb + eps))`, `eps = 1 / (total_a + total_b)`, sorted by
/// `|log_ratio|` descending then token.
pub fn compare(a: &FrequencyProfile, b: &FrequencyProfile, top_k: usize) -> Vec<ComparisonRow> {
    let eps = 1.0 / (a.total_tokens + b.total_tokens) as f64;
    let tokens: std::collections::BTreeSet<&str> = a.top(top_k).into_iter().chain(b.top(top_k)).collect();
    let mut rows: Vec<ComparisonRow> = tokens
        .into_iter()
        .map(|t| {
            let (fa, fb) = (a.rel_freq(t), b.rel_freq(t));
            ComparisonRow {
                token: t.to_string(),
                rel_freq_a: fa,
                rel_freq_b: fb,
                log_ratio: ((fa + eps) / (fb + eps)).ln(),
            }
        })
        .collect();
    rows.sort_by(|x, y| {
        y.log_ratio
            .abs()
            .total_cmp(&x.log_ratio.abs())
            .then_with(|| x.token.cmp(&y.token))
    });
    rows
}

/// `token,rel_freq_a,rel_freq_b,log_ratio`
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for r in rows {
        wtr.serialize(r).expect("in-memory csv");
    }
    let bytes = wtr.into_inner().expect("in-memory csv");
    let text = String::from_utf8(bytes).expect("csv is utf-8");
    if text.is_empty() {
        "token,rel_freq_a,rel_freq_b,log_ratio\n".to_string()
    } else {
        text
    }
}
