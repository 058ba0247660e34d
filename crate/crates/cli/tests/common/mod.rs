#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use zsmine_core::corpus::{read_semeval_csv, Split, Subtask};
use zsmine_core::labels::{
    build_approach1, build_approach2, build_approach3, A1Wording, HyponymScope, LabelSpace, RenderOptions,
};
use zsmine_core::scoring::{Logits, ScoreCache, ScoreRecord, DEFAULT_MODEL};
use zsmine_core::wordnet::fixture_lexicon;

pub const DATASET_CSV: &str = r#"id,sentence,label
1001,"Please add an option to export notes as PDF.",1
1002,The app crashes when I rotate the screen.,0
1003,"It would be great if sync worked offline, too.",1
1004,"I love the new ""dark"" theme.",0
1005,Consider supporting multiple accounts.,1
1006,Version 2.3 was released last week.,0
1007,"You should allow tabs, not only windows.",1
1008,Nobody answered my support ticket.,0
1009,The tutorial covers every shortcut.,0
1010,Maybe offer a cheaper annual plan?,1
1011,"Works fine on my phone, thanks.",0
1012,Battery usage went up after the update.,0
"#;

pub fn sentences() -> Vec<String> {
    read_semeval_csv(DATASET_CSV.as_bytes(), "dataset", Subtask::A, Split::Dev)
        .unwrap()
        .items
        .into_iter()
        .map(|i| i.sentence)
        .collect()
}

/// Arbitrary but fixed logits for a pair.
pub fn synthetic_logits(premise: &str, hypothesis: &str) -> Logits {
    let mix = |s: &str, m: u64| s.bytes().fold(17u64, |acc, b| (acc * m + b as u64) % 10_007);
    let e = (mix(premise, 31) + mix(hypothesis, 131)) % 400;
    let c = (mix(premise, 37) * 3 + mix(hypothesis, 7)) % 400;
    Logits::new(e as f64 / 100.0 - 2.0, 0.5, c as f64 / 100.0 - 2.0)
}

/// Every label space the tests run: a1 (both wordings), a2 and the 32 message types plus the negative.
pub fn spaces() -> Vec<LabelSpace> {
    let lex = fixture_lexicon();
    vec![
        build_approach1(A1Wording::IsA),
        build_approach1(A1Wording::IsSuggesting),
        build_approach2(&lex).unwrap(),
        build_approach3(&lex, HyponymScope::Table, false, true, RenderOptions::default()).unwrap(),
    ]
}

pub fn populate_cache(path: &Path) {
    let cache = ScoreCache::open(path).unwrap();
    for s in sentences() {
        for space in spaces() {
            for l in &space.labels {
                cache
                    .put(ScoreRecord {
                        model_id: DEFAULT_MODEL.to_string(),
                        premise: s.clone(),
                        hypothesis: l.hypothesis.clone(),
                        logits: synthetic_logits(&s, &l.hypothesis),
                    })
                    .unwrap();
            }
        }
    }
    cache.flush().unwrap();
}

pub fn zsmine(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zsmine"))
        .current_dir(cwd)
        .env_remove("ZS_ENDPOINT")
        .env_remove("ZS_CACHE")
        .env_remove("RUST_LOG")
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
