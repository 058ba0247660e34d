//! Zero-shot suggestion mining.
//!
//! Sentences are classified as suggestions or not by scoring NLI entailment
//! between each sentence (premise) and label-describing hypotheses. Label
//! spaces come from fixed templates, WordNet definitions of "suggestion", or
//! the direct hyponyms of `message.n.02`; for the last, the subset of labels
//! mapped to "suggestion" is chosen by exhaustive search on a labeled split.

pub mod classify;
pub mod corpus;
pub mod freq;
pub mod labels;
pub mod scoring;
pub mod subsets;
pub mod wordnet;

pub use classify::{classify, classify_corpus, score_corpus, DecisionMode, Prediction, PremiseScores};
pub use corpus::{evaluate, random_baseline, BaselineResult, Class, EvalResult, LabeledCorpus, Split, Subtask};
pub use labels::{LabelSpace, LabelSpec, MappedClass};
pub use scoring::{entail_prob, ProbMode, ScoreRecord, Scorer, ScorerConfig};
pub use subsets::{search, SearchReport, SearchSpec, SubsetResult};
pub use wordnet::{Lexicon, SenseName, Synset, SynsetId};
