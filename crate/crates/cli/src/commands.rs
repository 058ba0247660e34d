use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use zsmine_core::classify::{self, Aggregate, DecisionMode};
use zsmine_core::corpus::{self, load_semeval_csv, EvalResult, LabeledCorpus, Split, Subtask};
use zsmine_core::freq::{self, ClassFilter};
use zsmine_core::labels::{
    build_approach1, build_approach2, build_approach3, A1Wording, Approach, HyponymScope, LabelSpace, MappedClass,
    RenderOptions,
};
use zsmine_core::scoring::{BackendKind, ProbMode, Scorer};
use zsmine_core::subsets::{self, ReportFormat, SearchMode, SearchSpec, DEFAULT_CANDIDATES};
use zsmine_core::wordnet::{
    self, fixture_lexicon, load_wordnet_dir, snapshot, Lexicon, MESSAGE_SENSE, SUGGESTION_CANDIDATES,
};

use crate::config::{dataset_key, RunConfig};
use crate::run::Run;
use crate::{
    ApproachArg, BackendArg, BaselineArgs, ClassesArg, ClassifyArgs, Cli, Command, DataArgs, EvalArgs, FormatArg,
    FreqArgs, GlobalArgs, LabelArgs, LabelsCommand, MessageTypeArgs, ModeArg, ProbArg, ScopeArg, ScoreArgs, SearchArgs,
    SearchModeArg, UsageError, WordnetCommand,
};

/// `println!` that reports a closed stdout as an error instead of panicking.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        writeln!(std::io::stdout().lock(), $($t)*)?;
    }};
}

macro_rules! say_raw {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        write!(std::io::stdout().lock(), $($t)*)?;
    }};
}

pub fn dispatch(cli: Cli, argv: Vec<String>) -> Result<()> {
    let config = effective_config(&cli.global)?;
    if let Some(jobs) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Wordnet(cmd) => wordnet_cmd(cmd, config, argv),
        Command::Labels(cmd) => labels_cmd(cmd, config, argv),
        Command::Score(args) => score_cmd(args, config, argv),
        Command::Classify(args) => classify_cmd(args, config, argv),
        Command::Eval(args) => eval_cmd(args, config, argv),
        Command::Search(args) => search_cmd(args, config, argv),
        Command::Baseline(args) => baseline_cmd(args, config, argv),
        Command::Freq(args) => freq_cmd(args, config, argv),
    }
}

fn effective_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &g.out {
        c.output_dir = v.clone();
    }
    if let Some(v) = &g.endpoint {
        c.scorer.endpoint = v.clone();
    }
    if let Some(v) = &g.cache {
        c.scorer.cache_path = Some(v.clone());
    }
    if let Some(v) = g.backend {
        c.scorer.backend = match v {
            BackendArg::Remote => BackendKind::Remote,
            BackendArg::CacheOnly => BackendKind::CacheOnly,
            BackendArg::RemoteWithCache => BackendKind::RemoteWithCache,
        };
    }
    if let Some(v) = &g.model_id {
        c.scorer.model_id = v.clone();
    }
    if let Some(v) = g.batch_size {
        c.scorer.batch_size = v;
    }
    if let Some(v) = g.retries {
        c.scorer.retries = v;
    }
    if let Some(v) = g.timeout {
        c.scorer.request_timeout =
            std::time::Duration::try_from_secs_f64(v).map_err(|e| UsageError(format!("--timeout {v}: {e}")))?;
    }
    if let Some(v) = g.jobs {
        if v == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        c.scorer.jobs = v;
    }
    if let Some(v) = g.seed {
        c.seed = v;
    }
    if let Some(v) = &g.wordnet_dir {
        c.wordnet_dir = Some(v.clone());
    }
    if let Some(v) = &g.snapshot {
        c.snapshot = Some(v.clone());
    }
    c.validate()?;
    Ok(c)
}

/// Snapshot, else raw database directory, else the bundled fixture.
fn load_lexicon(config: &RunConfig, run: Option<&mut Run>) -> Result<Lexicon> {
    if let Some(path) = &config.snapshot {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        if let Some(run) = run {
            run.input(path)?;
        }
        return snapshot::decode(&bytes).with_context(|| format!("snapshot {}", path.display()));
    }
    if let Some(dir) = &config.wordnet_dir {
        if let Some(run) = run {
            run.input(&dir.join("index.noun"))?;
            run.input(&dir.join("data.noun"))?;
        }
        return load_wordnet_dir(dir).with_context(|| format!("WordNet in {}", dir.display()));
    }
    log::info!("using the bundled WordNet fixture");
    Ok(fixture_lexicon())
}

fn load_corpus(config: &RunConfig, data: &DataArgs, run: &mut Run) -> Result<LabeledCorpus> {
    let path = config.dataset(data.subtask, data.split, data.dataset.as_deref())?;
    run.input(&path)?;
    let corpus = load_semeval_csv(&path, data.subtask, data.split)?;
    let (pos, neg) = corpus.class_counts();
    log::info!(
        "{}: {} sentences ({pos} suggestions, {neg} others)",
        path.display(),
        corpus.len()
    );
    Ok(corpus)
}

fn open_scorer(config: &RunConfig, run: &mut Run) -> Result<Scorer> {
    if let Some(path) = &config.scorer.cache_path {
        if path.exists() {
            run.input(path)?;
        }
    }
    let scorer = Scorer::from_config(config.scorer.clone())?;
    if let Some(cache) = scorer.cache() {
        if cache.skipped_lines() > 0 {
            log::warn!(
                "{}: ignored {} corrupt line(s)",
                cache.path().display(),
                cache.skipped_lines()
            );
        }
    }
    Ok(scorer)
}

fn message_space(
    args: &MessageTypeArgs,
    include_negative: bool,
    config: &RunConfig,
    run: &mut Run,
) -> Result<LabelSpace> {
    if let Some(space) = custom_space(args, run)? {
        return Ok(space);
    }
    let lexicon = load_lexicon(config, Some(run))?;
    let scope = match args.scope {
        ScopeArg::Candidates => HyponymScope::Candidates,
        ScopeArg::Table => HyponymScope::Table,
        ScopeArg::AllDirect => HyponymScope::AllDirect,
    };
    let options = RenderOptions {
        smart_article: args.smart_article,
        space_underscores: args.space_underscores,
    };
    Ok(build_approach3(
        &lexicon,
        scope,
        args.extended,
        include_negative,
        options,
    )?)
}

fn custom_space(args: &MessageTypeArgs, run: &mut Run) -> Result<Option<LabelSpace>> {
    let Some(path) = &args.labels else {
        return Ok(None);
    };
    run.input(path)?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let space = LabelSpace::from_json(&text).with_context(|| format!("label space {}", path.display()))?;
    Ok(Some(space))
}

fn label_space(args: &LabelArgs, include_negative: bool, config: &RunConfig, run: &mut Run) -> Result<LabelSpace> {
    if let Some(space) = custom_space(&args.message, run)? {
        return Ok(space);
    }
    Ok(match args.approach {
        ApproachArg::A1 => build_approach1(A1Wording::IsA),
        ApproachArg::A1Suggesting => build_approach1(A1Wording::IsSuggesting),
        ApproachArg::A2 => build_approach2(&load_lexicon(config, Some(run))?)?,
        ApproachArg::A3 => message_space(&args.message, include_negative, config, run)?,
    })
}

fn prob_mode(p: ProbArg) -> ProbMode {
    match p {
        ProbArg::DropNeutral => ProbMode::DropNeutral,
        ProbArg::ThreeWay => ProbMode::ThreeWay,
    }
}

fn wordnet_cmd(cmd: WordnetCommand, config: RunConfig, argv: Vec<String>) -> Result<()> {
    match cmd {
        WordnetCommand::Inspect { sense } => {
            let lexicon = load_lexicon(&config, None)?;
            let synset = lexicon.lookup(&sense)?;
            say!("{sense}  {}  [{}]", synset.id, synset.lemmas.join(", "));
            say!("  {}", synset.definition());
            let hyponyms = lexicon.hyponyms(synset.id)?;
            say!("");
            say!("Direct hyponyms ({}), * = suggestion candidate:", hyponyms.len());
            let mut rows: Vec<(String, &wordnet::Synset)> = hyponyms
                .into_iter()
                .map(|h| {
                    let name = lexicon
                        .canonical_name(h.id)
                        .map(|n| n.to_string())
                        .unwrap_or_else(|| h.id.to_string());
                    (name, h)
                })
                .collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0));
            for (name, h) in rows {
                let mark = if SUGGESTION_CANDIDATES.contains(&name.as_str()) {
                    '*'
                } else {
                    ' '
                };
                say!("{mark} {name:<24} {:<20} {}", h.first_lemma(), h.definition());
            }
            Ok(())
        }
        WordnetCommand::Senses { lemma } => {
            let lexicon = load_lexicon(&config, None)?;
            let senses = lexicon.senses_of(&lemma);
            if senses.is_empty() {
                return Err(wordnet::WordNetError::NotFound(format!("no noun senses for `{lemma}`")).into());
            }
            for (k, id) in senses.iter().enumerate() {
                let synset = lexicon.synset(*id)?;
                let canonical = lexicon.canonical_name(*id).map(|n| n.to_string()).unwrap_or_default();
                say!("{lemma}.n.{:02}  {canonical:<20} {}", k + 1, synset.definition());
            }
            Ok(())
        }
        WordnetCommand::Snapshot { fixture, name } => {
            let mut run = Run::start("wordnet-snapshot", argv, config);
            let mut lexicon = load_lexicon(run.config(), None)?;
            if let Some(p) = &run.config().snapshot.clone() {
                run.input(p)?;
            }
            if let Some(dir) = run.config().wordnet_dir.clone() {
                run.input(&dir.join("index.noun"))?;
                run.input(&dir.join("data.noun"))?;
            }
            if fixture {
                let parent = lexicon.lookup(MESSAGE_SENSE)?.id;
                let mut keep = vec![parent];
                keep.extend(lexicon.hyponyms(parent)?.iter().map(|s| s.id));
                keep.extend(lexicon.senses_of("suggestion"));
                lexicon = lexicon.restrict(keep)?;
            }
            let path = run.write(&name, &snapshot::encode(&lexicon))?;
            say!("{} synsets -> {}", lexicon.len(), path.display());
            run.finish()
        }
    }
}

fn labels_cmd(cmd: LabelsCommand, config: RunConfig, argv: Vec<String>) -> Result<()> {
    match cmd {
        LabelsCommand::Build(args) => {
            let mut run = Run::start("labels", argv, config.clone());
            let space = label_space(&args, args.negative, &config, &mut run)?;
            let width = space.labels.iter().map(|l| l.label_id.len()).max().unwrap_or(0);
            for l in &space.labels {
                let class = match l.mapped_class {
                    MappedClass::Suggestion => "suggestion",
                    MappedClass::NonSuggestion => "non_suggestion",
                    MappedClass::Deferred => "deferred",
                };
                say!("{:<width$}  {class:<14}  {}", l.label_id, l.hypothesis);
            }
            Ok(())
        }
        LabelsCommand::Export(args) => {
            let mut run = Run::start("labels", argv, config.clone());
            let space = label_space(&args, args.negative, &config, &mut run)?;
            let mut text = space.to_json();
            if !text.ends_with('\n') {
                text.push('\n');
            }
            let path = run.write("labels.json", text.as_bytes())?;
            say!("{} labels -> {}", space.labels.len(), path.display());
            run.finish()
        }
    }
}

#[derive(Serialize)]
struct ScoreSummary<'a> {
    model_id: &'a str,
    subtask: Subtask,
    split: Split,
    sentences: usize,
    labels: usize,
    pairs: usize,
    cached_before: usize,
    fetched: usize,
}

fn score_cmd(args: ScoreArgs, config: RunConfig, argv: Vec<String>) -> Result<()> {
    let mut run = Run::start("score", argv, config.clone());
    let corpus = load_corpus(&config, &args.data, &mut run)?;
    // message-type spaces get the negative hypothesis too, so both decision modes can run offline
    let space = label_space(&args.labels, true, &config, &mut run)?;
    let scorer = open_scorer(&config, &mut run)?;

    let mut seen = HashSet::new();
    let pairs: Vec<(&str, &str)> = corpus
        .items
        .iter()
        .flat_map(|i| {
            space
                .labels
                .iter()
                .map(move |l| (i.sentence.as_str(), l.hypothesis.as_str()))
        })
        .filter(|p| seen.insert(*p))
        .collect();
    let model = config.scorer.model_id.as_str();
    let cached_before = scorer
        .cache()
        .map(|c| pairs.iter().filter(|(p, h)| c.get(model, p, h).is_some()).count())
        .unwrap_or(0);
    scorer.score_pairs(&pairs)?;

    let summary = ScoreSummary {
        model_id: model,
        subtask: args.data.subtask,
        split: args.data.split,
        sentences: corpus.len(),
        labels: space.labels.len(),
        pairs: pairs.len(),
        cached_before,
        fetched: pairs.len() - cached_before,
    };
    run.write_json("score-summary.json", &summary)?;
    say!(
        "{} pairs ({} sentences x {} labels, deduplicated): {} cached, {} fetched",
        summary.pairs,
        summary.sentences,
        summary.labels,
        summary.cached_before,
        summary.fetched
    );
    run.finish()
}

#[derive(Serialize)]
struct EvalDoc {
    subtask: Subtask,
    split: Split,
    precision: f64,
    recall: f64,
    #[serde(flatten)]
    eval: EvalResult,
}

impl EvalDoc {
    fn new(subtask: Subtask, split: Split, eval: EvalResult) -> Self {
        EvalDoc {
            subtask,
            split,
            precision: eval.precision(),
            recall: eval.recall(),
            eval,
        }
    }
}

fn decision_mode(args: &ClassifyArgs, approach: Approach) -> Result<DecisionMode> {
    let mode = args.mode.unwrap_or(match approach {
        Approach::A1 | Approach::A1Variant => ModeArg::Binary,
        Approach::A2 => ModeArg::DefsMax,
        Approach::A3Plain | Approach::A3Extended => ModeArg::Mapping,
    });
    let subset = || -> Vec<String> {
        if args.subset.is_empty() {
            DEFAULT_CANDIDATES.iter().map(|s| s.to_string()).collect()
        } else {
            args.subset.clone()
        }
    };
    if !args.subset.is_empty() && !matches!(mode, ModeArg::Mapping | ModeArg::Competition) {
        return Err(UsageError("--subset only applies to mapping and competition modes".into()).into());
    }
    Ok(match mode {
        ModeArg::Binary => DecisionMode::BinaryArgmax,
        ModeArg::DefsMax => DecisionMode::DefsVsNegative {
            aggregate: Aggregate::Max,
        },
        ModeArg::DefsMean => DecisionMode::DefsVsNegative {
            aggregate: Aggregate::Mean,
        },
        ModeArg::Mapping => DecisionMode::Mapping {
            suggestion_set: subset(),
        },
        ModeArg::Competition => DecisionMode::Competition {
            suggestion_set: subset(),
        },
    })
}

fn classify_cmd(args: ClassifyArgs, config: RunConfig, argv: Vec<String>) -> Result<()> {
    let mut run = Run::start("classify", argv, config.clone());
    let corpus = load_corpus(&config, &args.data, &mut run)?;
    let include_negative = args.labels.negative || args.mode == Some(ModeArg::Competition);
    let space = label_space(&args.labels, include_negative, &config, &mut run)?;
    let mode = decision_mode(&args, space.approach)?;
    mode.validate(&space)?;
    let scorer = open_scorer(&config, &mut run)?;

    let predictions = classify::classify_corpus(&corpus, &space, &mode, &scorer, prob_mode(args.prob))?;
    let mut csv = Vec::new();
    classify::write_predictions_csv(&predictions, &mut csv)?;
    run.write("predictions.csv", &csv)?;

    let eval = corpus::evaluate(&predictions, &corpus)?;
    run.write_json("eval.json", &EvalDoc::new(corpus.subtask, corpus.split, eval))?;
    say_raw!("{}", eval.table());
    run.finish()
}

fn eval_cmd(args: EvalArgs, config: RunConfig, argv: Vec<String>) -> Result<()> {
    let mut run = Run::start("eval", argv, config.clone());
    let corpus = load_corpus(&config, &args.data, &mut run)?;
    run.input(&args.predictions)?;
    let file =
        std::fs::File::open(&args.predictions).with_context(|| format!("opening {}", args.predictions.display()))?;
    let predictions =
        classify::read_predictions_csv(file).with_context(|| format!("reading {}", args.predictions.display()))?;
    let eval = corpus::evaluate(&predictions, &corpus)
        .with_context(|| format!("matching {} against the gold labels", args.predictions.display()))?;
    run.write_json("eval.json", &EvalDoc::new(corpus.subtask, corpus.split, eval))?;
    say_raw!("{}", eval.table());
    run.finish()
}

fn search_cmd(args: SearchArgs, config: RunConfig, argv: Vec<String>) -> Result<()> {
    let mut run = Run::start("search", argv, config.clone());
    let corpus = load_corpus(&config, &args.data, &mut run)?;
    let mode = match args.mode {
        SearchModeArg::Mapping => SearchMode::Mapping,
        SearchModeArg::Competition => SearchMode::Competition,
    };
    let space = message_space(&args.message, mode == SearchMode::Competition, &config, &mut run)?;
    let spec = SearchSpec {
        candidates: if args.candidates.is_empty() {
            DEFAULT_CANDIDATES.iter().map(|s| s.to_string()).collect()
        } else {
            args.candidates.clone()
        },
        k_min: args.k_min,
        k_max: args.k_max,
        mode,
        top_n: args.top_n,
    };
    spec.validate()?;
    let scorer = open_scorer(&config, &mut run)?;
    let scores = classify::score_corpus(&corpus, &space, &scorer, prob_mode(args.prob))?;
    let report = subsets::search(&spec, &corpus, &space, &scores)?;

    let (format, name) = match args.format {
        FormatArg::Table => (ReportFormat::Table, "search.txt"),
        FormatArg::Csv => (ReportFormat::Csv, "search.csv"),
        FormatArg::Json => (ReportFormat::Json, "search.json"),
    };
    let text = subsets::render(&report, format)?;
    run.write(name, text.as_bytes())?;
    say_raw!("{text}");
    run.finish()
}

#[derive(Serialize)]
struct BaselineDoc {
    subtask: Subtask,
    split: Split,
    suggestions: usize,
    non_suggestions: usize,
    mean_f1: f64,
    std_f1: f64,
    trials: usize,
    seed: u64,
}

fn baseline_cmd(args: BaselineArgs, config: RunConfig, argv: Vec<String>) -> Result<()> {
    let mut run = Run::start("baseline", argv, config.clone());
    let corpus = load_corpus(&config, &args.data, &mut run)?;
    let result = corpus::random_baseline(&corpus, args.trials, config.seed)?;
    let (pos, neg) = corpus.class_counts();
    run.write_json(
        "baseline.json",
        &BaselineDoc {
            subtask: corpus.subtask,
            split: corpus.split,
            suggestions: pos,
            non_suggestions: neg,
            mean_f1: result.mean_f1,
            std_f1: result.std_f1,
            trials: result.trials,
            seed: result.seed,
        },
    )?;
    say!(
        "mean F1 {:.4} (std {:.4}) over {} trials, seed {}",
        result.mean_f1,
        result.std_f1,
        result.trials,
        result.seed
    );
    run.finish()
}

fn domain_files(
    config: &RunConfig,
    explicit: &[PathBuf],
    subtask: Subtask,
    splits: &[Split],
) -> Result<Vec<(PathBuf, Split)>> {
    if !explicit.is_empty() {
        return Ok(explicit.iter().map(|p| (p.clone(), Split::Dev)).collect());
    }
    let files: Vec<(PathBuf, Split)> = splits
        .iter()
        .filter_map(|&s| config.datasets.get(&dataset_key(subtask, s)).map(|p| (p.clone(), s)))
        .collect();
    if files.is_empty() {
        return Err(UsageError(format!(
            "no subtask {subtask} corpora; pass --{} or configure datasets",
            subtask.to_string().to_lowercase()
        ))
        .into());
    }
    Ok(files)
}

fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

fn freq_cmd(args: FreqArgs, config: RunConfig, argv: Vec<String>) -> Result<()> {
    let mut run = Run::start("freq", argv, config.clone());
    let filter = match args.classes {
        ClassesArg::Suggestion => ClassFilter::Suggestion,
        ClassesArg::NonSuggestion => ClassFilter::NonSuggestion,
        ClassesArg::All => ClassFilter::All,
    };
    let stopwords = match &args.stopwords {
        Some(p) => {
            run.input(p)?;
            Some(load_stopwords(p)?)
        }
        None => None,
    };

    let mut load = |subtask: Subtask, explicit: &[PathBuf], splits: &[Split]| -> Result<Vec<LabeledCorpus>> {
        domain_files(&config, explicit, subtask, splits)?
            .into_iter()
            .map(|(path, split)| {
                run.input(&path)?;
                Ok(load_semeval_csv(&path, subtask, split)?)
            })
            .collect()
    };
    let a = load(Subtask::A, &args.a_files, &[Split::Train, Split::Dev, Split::Test])?;
    let b = load(Subtask::B, &args.b_files, &[Split::Dev, Split::Test])?;
    let pa = freq::profile("A", &a, filter, stopwords.as_ref())?;
    let pb = freq::profile("B", &b, filter, stopwords.as_ref())?;
    let (first, second) = match args.subtask {
        Subtask::A => (&pa, &pb),
        Subtask::B => (&pb, &pa),
    };
    let rows = freq::compare(first, second, args.top_k);
    let text = freq::comparison_csv(&rows);
    run.write("freq.csv", text.as_bytes())?;
    say!(
        "{:<20} {:>10} {:>10} {:>10}",
        "token",
        format!("{} rel", first.domain),
        format!("{} rel", second.domain),
        "log ratio"
    );
    for r in &rows {
        say!(
            "{:<20} {:>10.5} {:>10.5} {:>10.3}",
            r.token,
            r.rel_freq_a,
            r.rel_freq_b,
            r.log_ratio
        );
    }
    run.finish()
}
