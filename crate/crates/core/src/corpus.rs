//! Labeled sentence corpora, suggestion-class metrics and the random baseline.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::Prediction;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: row {row}: {message}")]
    Format { path: String, row: u64, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("contract violation: {0}")]
    Contract(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    NonSuggestion,
    Suggestion,
}

impl Class {
    pub fn from_gold(label: u8) -> Option<Class> {
        match label {
            0 => Some(Class::NonSuggestion),
            1 => Some(Class::Suggestion),
            _ => None,
        }
    }

    pub fn as_gold(self) -> u8 {
        match self {
            Class::NonSuggestion => 0,
            Class::Suggestion => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class::NonSuggestion => "non_suggestion",
            Class::Suggestion => "suggestion",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Class {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "suggestion" | "1" => Ok(Class::Suggestion),
            "non_suggestion" | "0" => Ok(Class::NonSuggestion),
            _ => Err(format!("unknown class `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subtask {
    A,
    B,
}

impl fmt::Display for Subtask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subtask::A => "A",
            Subtask::B => "B",
        })
    }
}

impl FromStr for Subtask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "A" | "a" => Ok(Subtask::A),
            "B" | "b" => Ok(Subtask::B),
            _ => Err(format!("unknown subtask `{s}` (expected A or B)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "dev" | "trial" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split `{s}` (expected train, dev or test)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub sentence: String,
    pub gold: Class,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub subtask: Subtask,
    pub split: Split,
    pub items: Vec<Item>,
}

impl LabeledCorpus {
    pub fn new(subtask: Subtask, split: Split, items: Vec<Item>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for item in &items {
            if !seen.insert(item.id.as_str()) {
                return Err(CorpusError::Contract(format!("duplicate sentence id `{}`", item.id)));
            }
        }
        Ok(LabeledCorpus { subtask, split, items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// (suggestions, non-suggestions)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.items.iter().filter(|i| i.gold == Class::Suggestion).count();
        (pos, self.items.len() - pos)
    }

    pub fn gold(&self) -> Vec<Class> {
        self.items.iter().map(|i| i.gold).collect()
    }
}

pub fn load_semeval_csv(path: impl AsRef<Path>, subtask: Subtask, split: Split) -> Result<LabeledCorpus, CorpusError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_semeval_csv(file, &path.display().to_string(), subtask, split)
}

/// Reads `id,sentence,label` rows. A first row whose label field is not an
/// integer is treated as a header. Fields may be double-quoted.
pub fn read_semeval_csv(
    reader: impl Read,
    source_name: &str,
    subtask: Subtask,
    split: Split,
) -> Result<LabeledCorpus, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let format_err = |row: u64, message: String| CorpusError::Format {
        path: source_name.to_string(),
        row,
        message,
    };

    let mut items = Vec::new();
    let mut ids = HashSet::new();
    for (n, record) in rdr.records().enumerate() {
        let row = n as u64 + 1;
        let record = record.map_err(|e| {
            let row = e.position().map(|p| p.line()).unwrap_or(row);
            format_err(row, e.to_string())
        })?;
        let row = record.position().map(|p| p.line()).unwrap_or(row);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != 3 {
            return Err(format_err(row, format!("expected 3 fields, found {}", record.len())));
        }
        let id = record[0].trim_start_matches('\u{feff}').trim();
        let label = record[2].trim();
        if n == 0 && label.parse::<i64>().is_err() {
            continue;
        }
        let gold = label
            .parse::<u8>()
            .ok()
            .and_then(Class::from_gold)
            .ok_or_else(|| format_err(row, format!("label `{label}` is not 0 or 1")))?;
        if !ids.insert(id.to_string()) {
            return Err(format_err(row, format!("duplicate id `{id}`")));
        }
        items.push(Item {
            id: id.to_string(),
            sentence: record[1].to_string(),
            gold,
        });
    }
    Ok(LabeledCorpus { subtask, split, items })
}

/// Confusion counts for the suggestion class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub f1: f64,
    pub accuracy: f64,
}

impl EvalResult {
    /// F1 is 0 when `2tp + fp + fn = 0`.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let denom = 2 * tp + fp + fn_;
        let f1 = if denom == 0 {
            0.0
        } else {
            (2 * tp) as f64 / denom as f64
        };
        let total = tp + fp + fn_ + tn;
        let accuracy = if total == 0 {
            0.0
        } else {
            (tp + tn) as f64 / total as f64
        };
        EvalResult {
            tp,
            fp,
            fn_,
            tn,
            f1,
            accuracy,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Class, Class)>) -> Self {
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for (predicted, gold) in pairs {
            match (predicted, gold) {
                (Class::Suggestion, Class::Suggestion) => tp += 1,
                (Class::Suggestion, Class::NonSuggestion) => fp += 1,
                (Class::NonSuggestion, Class::Suggestion) => fn_ += 1,
                (Class::NonSuggestion, Class::NonSuggestion) => tn += 1,
            }
        }
        EvalResult::from_counts(tp, fp, fn_, tn)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Aligned two-column table for terminals.
    pub fn table(&self) -> String {
        let rows = [
            ("F1 (suggestion)", format!("{:.4}", self.f1)),
            ("Accuracy", format!("{:.4}", self.accuracy)),
            ("Precision", format!("{:.4}", self.precision())),
            ("Recall", format!("{:.4}", self.recall())),
            ("TP", self.tp.to_string()),
            ("FP", self.fp.to_string()),
            ("FN", self.fn_.to_string()),
            ("TN", self.tn.to_string()),
            ("Total", self.total().to_string()),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<16} {v:>10}\n"));
        }
        out
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Scores predictions against gold labels, matching them by sentence id.
pub fn evaluate(predictions: &[Prediction], corpus: &LabeledCorpus) -> Result<EvalResult, CorpusError> {
    if predictions.len() != corpus.len() {
        return Err(CorpusError::Contract(format!(
            "{} predictions for {} sentences",
            predictions.len(),
            corpus.len()
        )));
    }
    let mut by_id: HashMap<&str, Class> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_id.insert(p.sentence_id.as_str(), p.predicted).is_some() {
            return Err(CorpusError::Contract(format!(
                "duplicate prediction for `{}`",
                p.sentence_id
            )));
        }
    }
    let pairs = corpus
        .items
        .iter()
        .map(|item| {
            by_id
                .get(item.id.as_str())
                .map(|&p| (p, item.gold))
                .ok_or_else(|| CorpusError::Contract(format!("no prediction for sentence `{}`", item.id)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalResult::from_pairs(pairs))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub mean_f1: f64,
    pub std_f1: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Mean and sample standard deviation of suggestion F1 when every sentence
/// is labeled suggestion with probability 0.5. Trial `t` draws from its own
/// ChaCha stream `t` under `seed`, so results do not depend on scheduling.
pub fn random_baseline(corpus: &LabeledCorpus, trials: usize, seed: u64) -> Result<BaselineResult, CorpusError> {
    if trials == 0 {
        return Err(CorpusError::Contract("trials must be at least 1".into()));
    }
    let gold = corpus.gold();
    let f1s: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            EvalResult::from_pairs(gold.iter().map(|&g| {
                let predicted = if rng.random_bool(0.5) {
                    Class::Suggestion
                } else {
                    Class::NonSuggestion
                };
                (predicted, g)
            }))
            .f1
        })
        .collect();
    let n = f1s.len() as f64;
    let mean = f1s.iter().sum::<f64>() / n;
    let std = if f1s.len() > 1 {
        (f1s.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(BaselineResult {
        mean_f1: mean,
        std_f1: std,
        trials,
        seed,
    })
}

/// Corpus with `positives` suggestions followed by `negatives` others.
pub fn synthetic_corpus(subtask: Subtask, split: Split, positives: usize, negatives: usize) -> LabeledCorpus {
    let items = (0..positives + negatives)
        .map(|i| Item {
            id: format!("s{i}"),
            sentence: format!("synthetic sentence {i}"),
            gold: if i < positives {
                Class::Suggestion
            } else {
                Class::NonSuggestion
            },
        })
        .collect();
    LabeledCorpus { subtask, split, items }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn read(text: &str) -> Result<LabeledCorpus, CorpusError> {
        read_semeval_csv(text.as_bytes(), "test.csv", Subtask::A, Split::Dev)
    }

    fn pred(id: &str, class: Class) -> Prediction {
        Prediction {
            sentence_id: id.into(),
            premise: String::new(),
            predicted: class,
            winning_label: String::new(),
            winning_score: 0.0,
        }
    }

    #[test]
    fn reads_quoted_rows_and_skips_header() {
        let text = "id,sentence,label\n\
                    1309_1,\"Please add a way to export, or at least print.\",1\n\
                    1309_2,\"He said \"\"no\"\" twice\",0\n\
                    7,plain text,0\n";
        let c = read(text).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.items[0].sentence, "Please add a way to export, or at least print.");
        assert_eq!(c.items[1].sentence, "He said \"no\" twice");
        assert_eq!(c.class_counts(), (1, 2));
    }

    #[test]
    fn headerless_file() {
        let c = read("a,first,1\nb,second,0\n").unwrap();
        assert_eq!(c.items[0].id, "a");
        assert_eq!(c.items[0].gold, Class::Suggestion);
    }

    #[test]
    fn empty_file() {
        assert!(read("").unwrap().is_empty());
    }

    #[test]
    fn non_binary_label() {
        match read("id,sentence,label\na,x,1\nb,y,2\n").unwrap_err() {
            CorpusError::Format { row, .. } => assert_eq!(row, 3),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn duplicate_id() {
        assert!(matches!(
            read("a,x,1\na,y,0\n"),
            Err(CorpusError::Format { row: 2, .. })
        ));
    }

    #[test]
    fn evaluate_examples() {
        let c = read("a,x,1\nb,y,0\nc,z,1\n").unwrap();
        let perfect: Vec<Prediction> = c.items.iter().map(|i| pred(&i.id, i.gold)).collect();
        let r = evaluate(&perfect, &c).unwrap();
        assert_eq!((r.f1, r.accuracy), (1.0, 1.0));

        let none = EvalResult::from_counts(0, 0, 0, 12);
        assert_eq!((none.f1, none.accuracy), (0.0, 1.0));

        assert!(matches!(
            evaluate(&[pred("a", Class::Suggestion)], &c),
            Err(CorpusError::Contract(_))
        ));
        let wrong_ids = vec![
            pred("a", Class::Suggestion),
            pred("b", Class::Suggestion),
            pred("q", Class::Suggestion),
        ];
        assert!(matches!(evaluate(&wrong_ids, &c), Err(CorpusError::Contract(_))));
    }

    #[test]
    fn all_suggestion_on_subtask_a_test_counts() {
        let c = synthetic_corpus(Subtask::A, Split::Test, 87, 746);
        let preds: Vec<Prediction> = c.items.iter().map(|i| pred(&i.id, Class::Suggestion)).collect();
        let r = evaluate(&preds, &c).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_, r.tn), (87, 746, 0, 0));
        assert!((r.f1 - 174.0 / 920.0).abs() < 1e-15);
        assert!((r.f1 - 0.18913).abs() < 1e-5);
        assert!((r.accuracy - 87.0 / 833.0).abs() < 1e-15);
    }

    #[test]
    fn baseline_is_seed_deterministic() {
        let c = synthetic_corpus(Subtask::B, Split::Test, 30, 40);
        let a = random_baseline(&c, 200, 7).unwrap();
        let b = random_baseline(&c, 200, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_baseline(&c, 200, 8).unwrap());
        assert!(random_baseline(&c, 0, 7).is_err());
        assert_eq!(random_baseline(&c, 1, 7).unwrap().std_f1, 0.0);
    }

    proptest! {
        #[test]
        fn f1_is_permutation_invariant(
            pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 0..50),
            seed in any::<u64>(),
        ) {
            let to = |b: bool| if b { Class::Suggestion } else { Class::NonSuggestion };
            let pairs: Vec<(Class, Class)> = pairs.into_iter().map(|(p, g)| (to(p), to(g))).collect();
            let mut shuffled = pairs.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rand::Rng::random_range(&mut rng, 0..=i));
            }
            let a = EvalResult::from_pairs(pairs.iter().copied());
            let b = EvalResult::from_pairs(shuffled);
            prop_assert_eq!(a, b);
            prop_assert_eq!(a.total(), pairs.len());
            prop_assert!((0.0..=1.0).contains(&a.f1));
        }
    }
}
