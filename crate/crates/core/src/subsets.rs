//! Exhaustive search over subsets of candidate labels mapped to "suggestion".
//!
//! In mapping mode the winning label of each premise does not depend on the
//! subset, so the argmax is computed once and every subset reduces to
//! summing per-candidate confusion counts. Competition mode lets the
//! negative hypothesis compete with the subset, so each subset needs its own
//! argmax pass over the cached probabilities.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{mapping_winner, ClassifyError, PremiseScores};
use crate::corpus::{Class, EvalResult, LabeledCorpus};
use crate::labels::{LabelSpace, MappedClass};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search spec: {0}")]
    Spec(String),
    #[error("missing score for label `{label}` on sentence `{sentence_id}`")]
    MissingScore { sentence_id: String, label: String },
    #[error("scores do not line up with the corpus: {0}")]
    Misaligned(String),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("report: {0}")]
    Report(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    #[default]
    Mapping,
    Competition,
}

/// Label ids of the eight suggestion candidates, in label order.
pub const DEFAULT_CANDIDATES: [&str; 8] = [
    "direction",
    "guidance",
    "offer",
    "promotion",
    "proposal",
    "reminder",
    "request",
    "submission",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub candidates: Vec<String>,
    pub k_min: usize,
    pub k_max: usize,
    pub mode: SearchMode,
    pub top_n: usize,
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec {
            candidates: DEFAULT_CANDIDATES.iter().map(|s| s.to_string()).collect(),
            k_min: 4,
            k_max: 8,
            mode: SearchMode::Mapping,
            top_n: 3,
        }
    }
}

impl SearchSpec {
    pub fn validate(&self) -> Result<(), SearchError> {
        let n = self.candidates.len();
        if !(1 <= self.k_min && self.k_min <= self.k_max && self.k_max <= n) {
            return Err(SearchError::Spec(format!(
                "need 1 <= k_min ({}) <= k_max ({}) <= candidates ({n})",
                self.k_min, self.k_max
            )));
        }
        if n > 63 {
            return Err(SearchError::Spec("at most 63 candidates".into()));
        }
        for (i, c) in self.candidates.iter().enumerate() {
            if self.candidates[..i].contains(c) {
                return Err(SearchError::Spec(format!("duplicate candidate `{c}`")));
            }
        }
        Ok(())
    }
}

/// Index combinations of `0..n`, by ascending size, lexicographic within a size.
pub struct Combinations {
    n: usize,
    k: usize,
    k_max: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        loop {
            if self.k > self.k_max || self.k > self.n {
                return None;
            }
            match self.current.take() {
                None => {
                    let first: Vec<usize> = (0..self.k).collect();
                    self.current = Some(first.clone());
                    return Some(first);
                }
                Some(mut c) => {
                    let k = self.k;
                    // rightmost position that can still move right
                    if let Some(i) = (0..k).rev().find(|&i| c[i] < self.n - k + i) {
                        c[i] += 1;
                        for j in i + 1..k {
                            c[j] = c[j - 1] + 1;
                        }
                        self.current = Some(c.clone());
                        return Some(c);
                    }
                    self.k += 1;
                }
            }
        }
    }
}

pub fn combinations(n: usize, k_min: usize, k_max: usize) -> Combinations {
    Combinations {
        n,
        k: k_min.max(1),
        k_max,
        current: None,
    }
}

/// Subsets of `candidates` with sizes `k_min..=k_max`, in enumeration order.
pub fn enumerate_subsets(candidates: &[String], k_min: usize, k_max: usize) -> impl Iterator<Item = Vec<&str>> {
    combinations(candidates.len(), k_min, k_max)
        .map(move |idx| idx.into_iter().map(|i| candidates[i].as_str()).collect())
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of subsets [`enumerate_subsets`] yields.
pub fn subset_count(n: usize, k_min: usize, k_max: usize) -> u64 {
    (k_min..=k_max).map(|k| binomial(n as u64, k as u64)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    pub subset: Vec<String>,
    pub eval: EvalResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub mode: SearchMode,
    pub candidates: Vec<String>,
    /// Every evaluated subset, ranked by (F1 desc, accuracy desc, subset order).
    pub ranking: Vec<SubsetResult>,
    /// Top `top_n` per subset size.
    pub by_size: BTreeMap<usize, Vec<SubsetResult>>,
}

impl SearchReport {
    pub fn best(&self) -> Option<&SubsetResult> {
        self.ranking.first()
    }
}

struct Ranked {
    indices: Vec<usize>,
    eval: EvalResult,
}

pub fn search(
    spec: &SearchSpec,
    corpus: &LabeledCorpus,
    space: &LabelSpace,
    scores: &[PremiseScores],
) -> Result<SearchReport, SearchError> {
    spec.validate()?;
    let positions = spec
        .candidates
        .iter()
        .map(|c| match space.position(c) {
            Some(p) if space.labels[p].mapped_class == MappedClass::Deferred => Ok(p),
            Some(_) => Err(SearchError::Spec(format!("candidate `{c}` is not a deferred label"))),
            None => Err(SearchError::Spec(format!("candidate `{c}` is not in the label space"))),
        })
        .collect::<Result<Vec<usize>, _>>()?;
    check_alignment(corpus, scores)?;

    let consulted: Vec<usize> = match spec.mode {
        SearchMode::Mapping => space
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.mapped_class == MappedClass::Deferred)
            .map(|(i, _)| i)
            .collect(),
        SearchMode::Competition => {
            let neg = space
                .negative_label_id
                .as_deref()
                .and_then(|id| space.position(id))
                .ok_or_else(|| SearchError::Spec("competition mode needs a negative label".into()))?;
            let mut c = positions.clone();
            c.push(neg);
            c
        }
    };
    // fail fast: every score the search will read must exist before evaluating
    for s in scores {
        for &i in &consulted {
            let label = &space.labels[i].label_id;
            if !s.by_label.contains_key(label) {
                return Err(SearchError::MissingScore {
                    sentence_id: s.sentence_id.clone(),
                    label: label.clone(),
                });
            }
        }
    }

    let gold = corpus.gold();
    let subsets: Vec<Vec<usize>> = combinations(positions.len(), spec.k_min, spec.k_max).collect();
    let evals: Vec<EvalResult> = match spec.mode {
        SearchMode::Mapping => {
            let (pos_total, neg_total) = corpus.class_counts();
            // per candidate: gold positives / negatives among premises it wins
            let mut won = vec![(0usize, 0usize); positions.len()];
            for (s, g) in scores.iter().zip(&gold) {
                let (winner, _) = mapping_winner(s, space)?;
                if let Some(c) = positions.iter().position(|&p| p == winner) {
                    match g {
                        Class::Suggestion => won[c].0 += 1,
                        Class::NonSuggestion => won[c].1 += 1,
                    }
                }
            }
            subsets
                .par_iter()
                .map(|subset| {
                    let tp: usize = subset.iter().map(|&c| won[c].0).sum();
                    let fp: usize = subset.iter().map(|&c| won[c].1).sum();
                    EvalResult::from_counts(tp, fp, pos_total - tp, neg_total - fp)
                })
                .collect()
        }
        SearchMode::Competition => {
            let neg = *consulted.last().expect("negative appended");
            let matrix: Vec<Vec<f64>> = scores
                .iter()
                .map(|s| {
                    space
                        .labels
                        .iter()
                        .map(|l| s.by_label.get(&l.label_id).copied().unwrap_or(f64::NAN))
                        .collect()
                })
                .collect();
            subsets
                .par_iter()
                .map(|subset| {
                    let mut members: Vec<usize> = subset.iter().map(|&c| positions[c]).collect();
                    members.push(neg);
                    members.sort_unstable();
                    EvalResult::from_pairs(matrix.iter().zip(&gold).map(|(row, &g)| {
                        let mut best = members[0];
                        for &m in &members[1..] {
                            if row[m] > row[best] {
                                best = m;
                            }
                        }
                        let predicted = if best == neg {
                            Class::NonSuggestion
                        } else {
                            Class::Suggestion
                        };
                        (predicted, g)
                    }))
                })
                .collect()
        }
    };

    let mut ranked: Vec<Ranked> = subsets
        .into_iter()
        .zip(evals)
        .map(|(indices, eval)| Ranked { indices, eval })
        .collect();
    ranked.sort_by(|a, b| {
        b.eval
            .f1
            .total_cmp(&a.eval.f1)
            .then(b.eval.accuracy.total_cmp(&a.eval.accuracy))
            .then_with(|| a.indices.cmp(&b.indices))
    });

    let to_result = |r: &Ranked| SubsetResult {
        subset: r.indices.iter().map(|&i| spec.candidates[i].clone()).collect(),
        eval: r.eval,
    };
    let mut by_size: BTreeMap<usize, Vec<SubsetResult>> = BTreeMap::new();
    for r in &ranked {
        let bucket = by_size.entry(r.indices.len()).or_default();
        if bucket.len() < spec.top_n {
            bucket.push(to_result(r));
        }
    }
    Ok(SearchReport {
        mode: spec.mode,
        candidates: spec.candidates.clone(),
        ranking: ranked.iter().map(to_result).collect(),
        by_size,
    })
}

fn check_alignment(corpus: &LabeledCorpus, scores: &[PremiseScores]) -> Result<(), SearchError> {
    if corpus.len() != scores.len() {
        return Err(SearchError::Misaligned(format!(
            "{} sentences, {} score rows",
            corpus.len(),
            scores.len()
        )));
    }
    for (item, s) in corpus.items.iter().zip(scores) {
        if item.id != s.sentence_id {
            return Err(SearchError::Misaligned(format!(
                "sentence `{}` paired with scores for `{}`",
                item.id, s.sentence_id
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown format `{s}` (expected table, csv or json)")),
        }
    }
}

pub fn render(report: &SearchReport, format: ReportFormat) -> Result<String, SearchError> {
    if report.ranking.is_empty() {
        return Err(SearchError::Report("no results to report".into()));
    }
    Ok(match format {
        ReportFormat::Table => render_table(report),
        ReportFormat::Csv => render_csv(report)?,
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
    })
}

pub fn parse_json(text: &str) -> Result<SearchReport, SearchError> {
    serde_json::from_str(text).map_err(|e| SearchError::Report(e.to_string()))
}

fn table_row(r: &SubsetResult) -> String {
    format!(
        "{} | {} | {:.4} | {:.4}",
        r.subset.len(),
        r.subset.join(", "),
        r.eval.f1,
        r.eval.accuracy
    )
}

fn render_table(report: &SearchReport) -> String {
    let mut out = String::from("Size | Labels subset | F1 | Accuracy\n");
    for results in report.by_size.values() {
        out.push_str("-----+---------------+----+---------\n");
        for r in results {
            out.push_str(&table_row(r));
            out.push('\n');
        }
    }
    if let Some(best) = report.best() {
        out.push_str("=====\nBest overall: ");
        out.push_str(&table_row(best));
        out.push('\n');
    }
    out
}

fn render_csv(report: &SearchReport) -> Result<String, SearchError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| SearchError::Report(e.to_string());
    wtr.write_record(["rank", "size", "labels", "f1", "accuracy", "tp", "fp", "fn", "tn"])
        .map_err(err)?;
    for (rank, r) in report.ranking.iter().enumerate() {
        wtr.write_record([
            (rank + 1).to_string(),
            r.subset.len().to_string(),
            r.subset.join(", "),
            format!("{:.4}", r.eval.f1),
            format!("{:.4}", r.eval.accuracy),
            r.eval.tp.to_string(),
            r.eval.fp.to_string(),
            r.eval.fn_.to_string(),
            r.eval.tn.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = wtr.into_inner().map_err(|e| SearchError::Report(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}
