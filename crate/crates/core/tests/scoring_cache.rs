use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use proptest::prelude::*;
use zsmine_core::scoring::{BackendError, BackendKind, EntailmentBackend, Logits, ScoreError, Scorer, ScorerConfig};

/// Deterministic logits derived from the pair text; counts pairs served.
#[derive(Default)]
struct Echo {
    served: AtomicUsize,
}

fn logits_for(p: &str, h: &str) -> Logits {
    Logits::new(p.len() as f64 * 0.1, -(h.len() as f64) * 0.05, 0.25)
}

impl EntailmentBackend for Echo {
    fn score_batch(&self, _model: &str, pairs: &[(&str, &str)]) -> Result<Vec<Logits>, BackendError> {
        assert!(pairs.len() <= 4, "batch size respected");
        self.served.fetch_add(pairs.len(), Ordering::SeqCst);
        Ok(pairs.iter().map(|(p, h)| logits_for(p, h)).collect())
    }
}

fn config(path: &std::path::Path, backend: BackendKind, jobs: usize) -> ScorerConfig {
    ScorerConfig {
        backend,
        cache_path: Some(path.to_path_buf()),
        batch_size: 4,
        jobs,
        ..ScorerConfig::default()
    }
}

#[test]
fn cache_persists_across_scorers_and_serves_offline() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores.jsonl");
    let pairs: Vec<(String, String)> = (0..10)
        .map(|i| (format!("premise {i}"), format!("hyp {}", i % 3)))
        .collect();

    let echo = Arc::new(Echo::default());
    let first = Scorer::with_backend(config(&path, BackendKind::RemoteWithCache, 3), echo.clone()).unwrap();
    let a = first.score_pairs(&pairs).unwrap();
    assert_eq!(echo.served.load(Ordering::SeqCst), 10);
    drop(first);

    let offline = Scorer::from_config(config(&path, BackendKind::CacheOnly, 1)).unwrap();
    let b = offline.score_pairs(&pairs).unwrap();
    assert_eq!(a, b);
    for (r, (p, h)) in b.iter().zip(&pairs) {
        assert_eq!(&r.premise, p);
        assert_eq!(&r.hypothesis, h);
        assert_eq!(r.logits, logits_for(p, h));
    }

    let unseen = [("never scored", "hyp 0")];
    match offline.score_pairs(&unseen) {
        Err(ScoreError::CacheMiss { indices }) => assert_eq!(indices, [0]),
        other => panic!("expected a cache miss, got {other:?}"),
    }
}

#[test]
fn other_models_do_not_hit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores.jsonl");
    let echo = Arc::new(Echo::default());
    Scorer::with_backend(config(&path, BackendKind::RemoteWithCache, 1), echo)
        .unwrap()
        .score_pairs(&[("p", "h")])
        .unwrap();
    let other = ScorerConfig {
        model_id: "roberta-large-mnli".into(),
        ..config(&path, BackendKind::CacheOnly, 1)
    };
    assert!(matches!(
        Scorer::from_config(other).unwrap().score_pairs(&[("p", "h")]),
        Err(ScoreError::CacheMiss { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn output_order_is_input_order(
        pairs in prop::collection::vec(("[a-c]{1,3}", "[x-z]{1,2}"), 0..40),
        jobs in 1usize..4,
        warm in 0usize..10,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.jsonl");
        let echo = Arc::new(Echo::default());
        let scorer = Scorer::with_backend(config(&path, BackendKind::RemoteWithCache, jobs), echo.clone()).unwrap();
        let warm = warm.min(pairs.len());
        scorer.score_pairs(&pairs[..warm]).unwrap();
        let records = scorer.score_pairs(&pairs).unwrap();
        prop_assert_eq!(records.len(), pairs.len());
        for (r, (p, h)) in records.iter().zip(&pairs) {
            prop_assert_eq!(&r.premise, p);
            prop_assert_eq!(&r.hypothesis, h);
            prop_assert_eq!(r.logits, logits_for(p, h));
        }
        // each distinct pair reaches the backend once
        let distinct: std::collections::HashSet<_> = pairs.iter().collect();
        prop_assert_eq!(echo.served.load(Ordering::SeqCst), distinct.len());
    }
}
