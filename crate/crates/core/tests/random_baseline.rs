use std::time::{Duration, Instant};

use zsmine_core::corpus::{random_baseline, synthetic_corpus, Split, Subtask};

/// F1 of a fair-coin labeler with exact expected precision and recall.
fn analytic_f1(pos: usize, neg: usize) -> f64 {
    let p = pos as f64 / (pos + neg) as f64;
    2.0 * p * 0.5 / (p + 0.5)
}

#[test]
fn published_baselines() {
    let start = Instant::now();
    for (subtask, pos, neg, expected) in [(Subtask::A, 87, 746, 0.1734), (Subtask::B, 348, 476, 0.4566)] {
        let corpus = synthetic_corpus(subtask, Split::Test, pos, neg);
        let r = random_baseline(&corpus, 10_000, 2019).unwrap();
        assert!((r.mean_f1 - expected).abs() <= 0.005, "{subtask}: {}", r.mean_f1);
        assert!((r.mean_f1 - analytic_f1(pos, neg)).abs() <= 0.01);
        assert!(r.std_f1 > 0.0 && r.std_f1 < 0.1);
    }
    assert!(start.elapsed() < Duration::from_secs(30));
}

#[test]
fn seeded_and_schedule_independent() {
    let corpus = synthetic_corpus(Subtask::B, Split::Test, 40, 60);
    let a = random_baseline(&corpus, 500, 7).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| random_baseline(&corpus, 500, 7).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, random_baseline(&corpus, 500, 8).unwrap());
}

#[test]
fn zero_trials_is_rejected() {
    let corpus = synthetic_corpus(Subtask::A, Split::Dev, 1, 1);
    assert!(random_baseline(&corpus, 0, 1).is_err());
}
