//! Acceptance checks, one PASS/FAIL line each. Runs without the test harness.
//!
//! The WordNet check uses the database under `WORDNET_DIR` when set and the
//! bundled fixture otherwise.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zsmine_core::classify::{classify_corpus, score_corpus, DecisionMode};
use zsmine_core::corpus::{evaluate, random_baseline, synthetic_corpus, Class, Item, LabeledCorpus, Split, Subtask};
use zsmine_core::labels::{build_approach3, HyponymScope, RenderOptions};
use zsmine_core::scoring::{BackendError, BackendKind, EntailmentBackend, Logits, ProbMode, Scorer, ScorerConfig};
use zsmine_core::subsets::{enumerate_subsets, search, SearchSpec, DEFAULT_CANDIDATES};
use zsmine_core::wordnet::{fixture_lexicon, load_wordnet_dir, Lexicon};
use zsmine_core::Prediction;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const GOLDEN: [(&str, &str); 32] = [
    ("acknowledgment.n.03", "acknowledgment"),
    ("approval.n.04", "approval"),
    ("body.n.08", "body"),
    ("commitment.n.04", "commitment"),
    ("corker.n.01", "corker"),
    ("digression.n.01", "digression"),
    ("direction.n.06", "direction"),
    ("disapproval.n.02", "disapproval"),
    ("disrespect.n.01", "disrespect"),
    ("drivel.n.01", "drivel"),
    ("guidance.n.01", "guidance"),
    ("information.n.01", "information"),
    ("interpolation.n.01", "interpolation"),
    ("latent_content.n.01", "latent_content"),
    ("meaning.n.01", "meaning"),
    ("narrative.n.01", "narrative"),
    ("nonsense.n.01", "nonsense"),
    ("offer.n.02", "offer"),
    ("opinion.n.02", "opinion"),
    ("promotion.n.01", "promotion"),
    ("proposal.n.01", "proposal"),
    ("refusal.n.02", "refusal"),
    ("reminder.n.01", "reminder"),
    ("request.n.01", "request"),
    ("respects.n.01", "respects"),
    ("sensationalism.n.01", "sensationalism"),
    ("shocker.n.02", "shocker"),
    ("statement.n.01", "statement"),
    ("statement.n.04", "statement"),
    ("subject.n.01", "subject"),
    ("submission.n.01", "submission"),
    ("wit.n.01", "wit"),
];

const CHECKMARKED: [&str; 8] = [
    "direction.n.06",
    "guidance.n.01",
    "offer.n.02",
    "promotion.n.01",
    "proposal.n.01",
    "reminder.n.01",
    "request.n.01",
    "submission.n.01",
];

fn wordnet_golden_table() -> Check {
    let start = Instant::now();
    let (lex, source): (Lexicon, String) = match std::env::var_os("WORDNET_DIR") {
        Some(dir) => {
            let dir = PathBuf::from(dir);
            (
                load_wordnet_dir(&dir).map_err(|e| e.to_string())?,
                dir.display().to_string(),
            )
        }
        None => (fixture_lexicon(), "bundled fixture".to_string()),
    };
    let parent = lex.lookup("message.n.02").map_err(|e| e.to_string())?;
    let hyponyms = lex.hyponyms(parent.id).map_err(|e| e.to_string())?;
    let pairs: BTreeSet<(String, String)> = hyponyms
        .iter()
        .map(|s| {
            let name = lex.canonical_name(s.id).map(|n| n.to_string()).unwrap_or_default();
            (name, s.first_lemma().to_string())
        })
        .collect();
    for (name, lemma) in GOLDEN {
        ensure(pairs.contains(&(name.to_string(), lemma.to_string())), || {
            format!("({name}, {lemma}) missing")
        })?;
    }
    let candidates: BTreeSet<&str> = zsmine_core::wordnet::SUGGESTION_CANDIDATES.into_iter().collect();
    ensure(candidates == CHECKMARKED.into_iter().collect(), || {
        format!("candidates {candidates:?}")
    })?;
    for name in CHECKMARKED {
        let id = lex.lookup(name).map_err(|e| e.to_string())?.id;
        ensure(parent.hyponyms.contains(&id), || format!("{name} is not a hyponym"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "32/32 pairs and 8/8 candidates from {source} ({} direct hyponyms, {:.2}s)",
        hyponyms.len(),
        elapsed.as_secs_f64()
    ))
}

fn subset_enumeration() -> Check {
    let c: Vec<String> = DEFAULT_CANDIDATES.iter().map(|s| s.to_string()).collect();
    let mut per_size = [0usize; 9];
    let mut seen = BTreeSet::new();
    for s in enumerate_subsets(&c, 4, 8) {
        per_size[s.len()] += 1;
        seen.insert(s);
    }
    let total: usize = per_size.iter().sum();
    ensure(total == 163 && seen.len() == 163, || format!("{total} subsets"))?;
    ensure(per_size[4..] == [70, 56, 28, 8, 1], || {
        format!("per size {:?}", &per_size[4..])
    })?;
    Ok(format!("163 subsets, sizes 4..8: {:?}", &per_size[4..]))
}

fn evaluate_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2019);
    let class = |b: bool| if b { Class::Suggestion } else { Class::NonSuggestion };
    for round in 0..1000 {
        let n = rng.random_range(0..=50);
        let gold: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let pred: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let items = (0..n)
            .map(|i| Item {
                id: format!("r{round}-{i}"),
                sentence: String::new(),
                gold: class(gold[i]),
            })
            .collect();
        let corpus = LabeledCorpus::new(Subtask::A, Split::Dev, items).map_err(|e| e.to_string())?;
        let mut predictions: Vec<Prediction> = (0..n)
            .map(|i| Prediction {
                sentence_id: format!("r{round}-{i}"),
                premise: String::new(),
                predicted: class(pred[i]),
                winning_label: String::new(),
                winning_score: 0.0,
            })
            .collect();
        predictions.reverse();
        let r = evaluate(&predictions, &corpus).map_err(|e| e.to_string())?;

        let mut counts = [0usize; 4];
        for i in 0..n {
            counts[(pred[i] as usize) * 2 + gold[i] as usize] += 1;
        }
        let [tn, fn_, fp, tp] = counts;
        let f1 = if 2 * tp + fp + fn_ == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        };
        let acc = if n == 0 { 0.0 } else { (tp + tn) as f64 / n as f64 };
        ensure(
            (r.tp, r.fp, r.fn_, r.tn) == (tp, fp, fn_, tn) && r.f1 == f1 && r.accuracy == acc,
            || format!("round {round}: {r:?} vs ({tp},{fp},{fn_},{tn},{f1},{acc})"),
        )?;
    }
    Ok("1000 random corpora (n <= 50) match exactly".into())
}

fn random_baselines() -> Check {
    let start = Instant::now();
    let mut parts = Vec::new();
    for (subtask, pos, neg, expected) in [(Subtask::A, 87, 746, 0.1734), (Subtask::B, 348, 476, 0.4566)] {
        let corpus = synthetic_corpus(subtask, Split::Test, pos, neg);
        let r = random_baseline(&corpus, 10_000, 2019).map_err(|e| e.to_string())?;
        ensure((r.mean_f1 - expected).abs() <= 0.005, || {
            format!("{subtask}: mean F1 {:.4}, expected {expected}", r.mean_f1)
        })?;
        parts.push(format!("{subtask} {:.4}", r.mean_f1));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("{} ({:.2}s)", parts.join(", "), elapsed.as_secs_f64()))
}

const SEARCH_FIXTURE: &str = include_str!("../../core/tests/data/search_fixture.tsv");

struct TableBackend(HashMap<(String, String), f64>);

impl EntailmentBackend for TableBackend {
    fn score_batch(&self, _model: &str, pairs: &[(&str, &str)]) -> Result<Vec<Logits>, BackendError> {
        Ok(pairs
            .iter()
            .map(|(p, h)| {
                let q = self.0[&(p.to_string(), h.to_string())];
                Logits::new((q / (1.0 - q)).ln(), 0.0, 0.0)
            })
            .collect())
    }
}

fn mapping_search_vs_brute_force() -> Check {
    let space = build_approach3(
        &fixture_lexicon(),
        HyponymScope::Table,
        false,
        false,
        RenderOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let mut items = Vec::new();
    let mut table = HashMap::new();
    for line in SEARCH_FIXTURE
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
    {
        let cols: Vec<&str> = line.split('\t').collect();
        let mut row: HashMap<&str, f64> = space
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.label_id.as_str(), 0.05 - 0.001 * i as f64))
            .collect();
        for kv in cols[2].split(',') {
            let (k, v) = kv.split_once('=').ok_or("bad fixture")?;
            if k != "NOT_SUGGESTION" {
                row.insert(k, v.parse().map_err(|_| "bad score")?);
            }
        }
        let sentence = format!("premise {}", cols[0]);
        for l in &space.labels {
            table.insert((sentence.clone(), l.hypothesis.clone()), row[l.label_id.as_str()]);
        }
        items.push(Item {
            id: cols[0].to_string(),
            sentence,
            gold: if cols[1] == "1" {
                Class::Suggestion
            } else {
                Class::NonSuggestion
            },
        });
    }
    let corpus = LabeledCorpus::new(Subtask::A, Split::Dev, items).map_err(|e| e.to_string())?;
    ensure(corpus.len() == 30, || format!("{} sentences", corpus.len()))?;
    let config = ScorerConfig {
        backend: BackendKind::Remote,
        ..ScorerConfig::default()
    };
    let scorer = Scorer::with_backend(config, Arc::new(TableBackend(table))).map_err(|e| e.to_string())?;

    let scores = score_corpus(&corpus, &space, &scorer, ProbMode::DropNeutral).map_err(|e| e.to_string())?;
    let report = search(&SearchSpec::default(), &corpus, &space, &scores).map_err(|e| e.to_string())?;
    let by_subset: HashMap<Vec<String>, _> = report.ranking.iter().map(|r| (r.subset.clone(), r.eval)).collect();
    ensure(by_subset.len() == 163, || format!("{} results", by_subset.len()))?;

    let mut checked = 0;
    for mask in 0u32..256 {
        if mask.count_ones() < 4 {
            continue;
        }
        let subset: Vec<String> = (0..8)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| DEFAULT_CANDIDATES[i].to_string())
            .collect();
        let mode = DecisionMode::Mapping {
            suggestion_set: subset.clone(),
        };
        let predictions =
            classify_corpus(&corpus, &space, &mode, &scorer, ProbMode::DropNeutral).map_err(|e| e.to_string())?;
        let expected = evaluate(&predictions, &corpus).map_err(|e| e.to_string())?;
        let got = by_subset
            .get(&subset)
            .ok_or_else(|| format!("{subset:?} not reported"))?;
        ensure(*got == expected, || format!("{subset:?}: {got:?} vs {expected:?}"))?;
        checked += 1;
    }
    let distinct: BTreeSet<u64> = report.ranking.iter().map(|r| r.eval.f1.to_bits()).collect();
    ensure(distinct.len() > 1, || "every subset scores the same".into())?;
    let best = report.best().ok_or("empty report")?;
    Ok(format!(
        "{checked}/163 subsets equal ({} distinct F1 values); best {{{}}} F1 {:.4}",
        distinct.len(),
        best.subset.join(", "),
        best.eval.f1
    ))
}

/// Files under `dir` other than run manifests, relative path -> bytes.
fn artifacts(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    for sub in ["out-a1", "out-a3"] {
        let mut entries: Vec<_> = std::fs::read_dir(dir.join(sub))
            .map_err(|e| format!("{sub}: {e}"))?
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for path in entries {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            if name.starts_with("run-manifest.") {
                continue;
            }
            out.push((
                format!("{sub}/{name}"),
                std::fs::read(&path).map_err(|e| e.to_string())?,
            ));
        }
    }
    Ok(out)
}

fn config_hashes(dir: &Path) -> Result<Vec<String>, String> {
    let mut hashes = Vec::new();
    for m in [
        "out-a1/run-manifest.classify.json",
        "out-a1/run-manifest.eval.json",
        "out-a3/run-manifest.classify.json",
        "out-a3/run-manifest.eval.json",
    ] {
        let text = std::fs::read_to_string(dir.join(m)).map_err(|e| format!("{m}: {e}"))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        hashes.push(v["config_hash"].as_str().unwrap_or_default().to_string());
    }
    Ok(hashes)
}

fn end_to_end_determinism() -> Check {
    let seed_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::populate_cache(&seed_dir.path().join("cache.jsonl"));
    let cache = std::fs::read(seed_dir.path().join("cache.jsonl")).map_err(|e| e.to_string())?;

    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        std::fs::write(dir.path().join("data.csv"), common::DATASET_CSV).map_err(|e| e.to_string())?;
        std::fs::write(dir.path().join("cache.jsonl"), &cache).map_err(|e| e.to_string())?;
        for approach in ["a1", "a3"] {
            let out = format!("out-{approach}");
            let predictions = format!("{out}/predictions.csv");
            let base = [
                "--backend",
                "cache-only",
                "--cache",
                "cache.jsonl",
                "--out",
                out.as_str(),
            ];
            let steps: [Vec<&str>; 2] = [
                vec![
                    "classify",
                    "--approach",
                    approach,
                    "--subtask",
                    "A",
                    "--split",
                    "dev",
                    "--dataset",
                    "data.csv",
                ],
                vec![
                    "eval",
                    "--predictions",
                    predictions.as_str(),
                    "--subtask",
                    "A",
                    "--dataset",
                    "data.csv",
                ],
            ];
            for step in steps {
                let args: Vec<&str> = base.iter().copied().chain(step).collect();
                let o = common::zsmine(dir.path(), &args);
                ensure(o.status.success(), || format!("{args:?}: {}", common::stderr(&o)))?;
            }
        }
        let cache_after = std::fs::read(dir.path().join("cache.jsonl")).map_err(|e| e.to_string())?;
        ensure(cache_after == cache, || "cache changed during an offline run".into())?;
        runs.push((artifacts(dir.path())?, config_hashes(dir.path())?));
    }
    let (a, ha) = &runs[0];
    let (b, hb) = &runs[1];
    ensure(ha == hb, || "config hashes differ".into())?;
    ensure(a.len() == b.len() && a.len() == 4, || {
        format!("{} vs {} artifacts", a.len(), b.len())
    })?;
    for ((na, ba), (nb, bb)) in a.iter().zip(b) {
        ensure(na == nb && ba == bb, || format!("{na} differs"))?;
    }
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    Ok(format!("byte-identical: {}", names.join(", ")))
}

fn main() -> ExitCode {
    let checks: [Criterion; 6] = [
        ("wordnet golden table", wordnet_golden_table),
        ("subset enumeration", subset_enumeration),
        ("evaluate vs brute-force oracle", evaluate_oracle),
        ("random baseline", random_baselines),
        ("mapping search vs per-subset classifier", mapping_search_vs_brute_force),
        ("classify + eval determinism", end_to_end_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
