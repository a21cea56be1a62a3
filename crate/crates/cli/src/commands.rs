//! One function per subcommand. Each reads its inputs, calls the library and
//! writes its outputs plus a run manifest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use log::{info, warn};
use serde::Serialize;
use subrec_core::als::ALS_MAGIC;
use subrec_core::corpus::{read_comments_file, read_name_list, write_comments};
use subrec_core::embeddings::{build_document_corpus, nearest_neighbors};
use subrec_core::eval::{EvalMode, DEFAULT_PAIR_BUDGET};
use subrec_core::ranking::RANK_MAGIC;
use subrec_core::{
    evaluate_auc, filter_comments, normalize_text, popularity_report, stratified_split, top_k, train_doc_vectors,
    AlsConfig, AlsModel, Comment, Doc2VecConfig, DocTag, FilterPolicy, InteractionDataset, RankModel, RankScorer,
    Scorer, SplitConfig, SplitDataset, Stopwords, TextFeatureSet, TrainConfig, Variant,
};

use crate::manifest::{self, RunInfo};
use crate::report;

fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| anyhow!("a seed is required: pass --seed or set `seed` in the config file"))
}

fn load_dataset(path: &Path) -> Result<InteractionDataset> {
    InteractionDataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn load_features(path: &Path) -> Result<TextFeatureSet> {
    TextFeatureSet::load(path).with_context(|| format!("loading vectors {}", path.display()))
}

fn load_stopwords(path: Option<&Path>, fallback: Stopwords) -> Result<Stopwords> {
    match path {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening stopwords {}", p.display()))?;
            Stopwords::read(BufReader::new(f)).with_context(|| format!("reading stopwords {}", p.display()))
        }
        None => Ok(fallback),
    }
}

fn finish<T: Serialize>(
    info: &RunInfo,
    command: &str,
    options: &T,
    inputs: &[&Path],
    outputs: &[&Path],
    seed: Option<u64>,
    started: Instant,
) -> Result<()> {
    let m = info.manifest(command, options, inputs, outputs, seed, started.elapsed())?;
    let path = manifest::write(&m, outputs[0])?;
    info!("wrote {}", path.display());
    Ok(())
}

fn appended(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Args, Debug, Serialize)]
pub struct IngestArgs {
    /// Newline-delimited JSON comments, optionally gzip-compressed.
    #[arg(long)]
    pub input: PathBuf,
    /// Binary interaction dataset to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Filtered comments with normalized bodies [default: <output>.comments.jsonl].
    #[arg(long)]
    pub comments_output: Option<PathBuf>,
    /// Also export the dataset as `user,subreddit,count` CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub min_body_chars: usize,
    #[arg(long, default_value_t = 5)]
    pub min_user_comments: usize,
    /// Author names to drop, one per line.
    #[arg(long)]
    pub bots: Option<PathBuf>,
    /// Stop words, one per line [default: bundled English list].
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Keep comments whose author or body is "[deleted]".
    #[arg(long)]
    pub keep_deleted: bool,
}

pub fn ingest(a: &IngestArgs, info: &RunInfo) -> Result<()> {
    let started = Instant::now();
    let parsed = read_comments_file(&a.input).with_context(|| format!("reading comments {}", a.input.display()))?;
    info!("parsed {} comments, {} malformed lines skipped", parsed.comments.len(), parsed.malformed);
    let bot_names = match &a.bots {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening bot list {}", p.display()))?;
            read_name_list(BufReader::new(f)).with_context(|| format!("reading bot list {}", p.display()))?
        }
        None => Default::default(),
    };
    let policy = FilterPolicy {
        min_body_chars: a.min_body_chars,
        min_user_comments: a.min_user_comments,
        bot_names,
        drop_deleted: !a.keep_deleted,
    };
    let stopwords = load_stopwords(a.stopwords.as_deref(), Stopwords::english())?;
    let parsed_count = parsed.comments.len();
    let kept = filter_comments(parsed.comments, &policy);
    info!("{} of {} comments survive filtering", kept.len(), parsed_count);
    if kept.is_empty() {
        bail!("no comments survive filtering of {}", a.input.display());
    }
    let dataset = subrec_core::build_dataset(&kept)?;
    info!("dataset: {} users, {} subreddits, {} pairs", dataset.n_users(), dataset.n_items(), dataset.len());
    dataset.save(&a.output).with_context(|| format!("writing {}", a.output.display()))?;

    let comments_path = a.comments_output.clone().unwrap_or_else(|| appended(&a.output, ".comments.jsonl"));
    let normalized: Vec<Comment> = kept
        .into_iter()
        .map(|mut c| {
            c.body = normalize_text(&c.body, &stopwords).join(" ");
            c
        })
        .collect();
    let f = File::create(&comments_path).with_context(|| format!("writing {}", comments_path.display()))?;
    write_comments(BufWriter::new(f), &normalized).with_context(|| format!("writing {}", comments_path.display()))?;

    let mut outputs = vec![a.output.as_path(), comments_path.as_path()];
    if let Some(csv) = &a.csv {
        let f = File::create(csv).with_context(|| format!("writing {}", csv.display()))?;
        dataset.write_csv(BufWriter::new(f)).with_context(|| format!("writing {}", csv.display()))?;
        outputs.push(csv);
    }
    let mut inputs = vec![a.input.as_path()];
    inputs.extend(a.bots.as_deref());
    inputs.extend(a.stopwords.as_deref());
    finish(info, "ingest", a, &inputs, &outputs, None, started)
}

#[derive(Args, Debug, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
    /// Fewest items a user keeps on the training side.
    #[arg(long, default_value_t = 1)]
    pub min_train: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_train: PathBuf,
    #[arg(long)]
    pub output_test: PathBuf,
}

pub fn split(a: &SplitArgs, info: &RunInfo) -> Result<()> {
    let started = Instant::now();
    let seed = require_seed(a.seed)?;
    let dataset = load_dataset(&a.dataset)?;
    let config = SplitConfig { test_fraction: a.test_fraction, min_train_per_user: a.min_train, seed };
    let s = stratified_split(&dataset, &config)?;
    info!("{} training pairs, {} held-out pairs", s.train.len(), s.test.len());
    s.train.save(&a.output_train).with_context(|| format!("writing {}", a.output_train.display()))?;
    s.test.save(&a.output_test).with_context(|| format!("writing {}", a.output_test.display()))?;
    finish(info, "split", a, &[&a.dataset], &[&a.output_train, &a.output_test], Some(seed), started)
}

#[derive(Args, Debug, Serialize)]
pub struct EmbedArgs {
    /// Dataset whose users and subreddits receive vectors.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Comments written by `ingest`.
    #[arg(long)]
    pub comments: PathBuf,
    /// Stop words removed before training [default: none; ingest output is already normalized].
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub negative: usize,
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0001)]
    pub min_lr: f64,
    /// Tokens seen fewer times are dropped from the vocabulary.
    #[arg(long, default_value_t = 5)]
    pub min_token_freq: u64,
    /// Cap on target tokens per document per epoch; 0 removes the cap.
    #[arg(long, default_value_t = 10_000)]
    pub max_targets: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lock-free parallel updates when more than one thread is available.
    #[arg(long)]
    pub hogwild: bool,
    /// Vector file; `.bin` selects the binary format, anything else text.
    #[arg(long)]
    pub output: PathBuf,
}

pub fn embed(a: &EmbedArgs, info: &RunInfo) -> Result<()> {
    let started = Instant::now();
    let seed = require_seed(a.seed)?;
    let dataset = load_dataset(&a.dataset)?;
    let parsed =
        read_comments_file(&a.comments).with_context(|| format!("reading comments {}", a.comments.display()))?;
    let stopwords = load_stopwords(a.stopwords.as_deref(), Stopwords::default())?;
    let corpus = build_document_corpus(&parsed.comments, &dataset, &stopwords, a.min_token_freq);
    let empty = corpus.empty_documents();
    if !empty.is_empty() {
        warn!("{} documents have no in-vocabulary tokens and keep their initial vectors", empty.len());
    }
    info!(
        "{} documents, {} vocabulary tokens, {} token occurrences",
        corpus.len(),
        corpus.vocab().len(),
        corpus.total_tokens()
    );
    let config = Doc2VecConfig {
        dim: a.dim,
        epochs: a.epochs,
        negative_samples: a.negative,
        learning_rate: a.lr,
        min_learning_rate: a.min_lr,
        max_targets_per_doc: (a.max_targets > 0).then_some(a.max_targets),
        seed,
        parallel: a.hogwild && info.threads > 1,
    };
    let features = train_doc_vectors(&corpus, &config)?;
    features.save(&a.output).with_context(|| format!("writing {}", a.output.display()))?;
    let mut inputs = vec![a.dataset.as_path(), a.comments.as_path()];
    inputs.extend(a.stopwords.as_deref());
    finish(info, "embed", a, &inputs, &[&a.output], Some(seed), started)
}

#[derive(Args, Debug, Serialize)]
pub struct TrainAlsArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(short = 'k', long, default_value_t = 128)]
    pub factors: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    /// Confidence weight: c = 1 + alpha · comment count.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 15)]
    pub iterations: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: PathBuf,
    /// Also export the factors as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn train_als(a: &TrainAlsArgs, info: &RunInfo) -> Result<()> {
    let started = Instant::now();
    let seed = require_seed(a.seed)?;
    let train = load_dataset(&a.train)?;
    let config =
        AlsConfig { k: a.factors, lambda: a.lambda, confidence_alpha: a.alpha, iterations: a.iterations, seed };
    let model = subrec_core::train_als(&train, &config)?;
    info!("final objective {:.6}", subrec_core::als_objective(&model, &train)?);
    model.save(&a.output).with_context(|| format!("writing {}", a.output.display()))?;
    let mut outputs = vec![a.output.as_path()];
    if let Some(csv) = &a.csv {
        let f = File::create(csv).with_context(|| format!("writing {}", csv.display()))?;
        model.write_csv(BufWriter::new(f)).with_context(|| format!("writing {}", csv.display()))?;
        outputs.push(csv);
    }
    finish(info, "train als", a, &[&a.train], &outputs, Some(seed), started)
}

#[derive(Args, Debug, Serialize)]
pub struct TrainRankArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Document vectors from `embed` (required by the text variants).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Latent factor width [default: 32 for bpr, 16 for the text variants].
    #[arg(short = 'k', long)]
    pub factors: Option<usize>,
    /// Width of the trained user text factors (learnt variant).
    #[arg(long, default_value_t = 16)]
    pub text_k: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// Sampled triples per epoch [default: one per training pair].
    #[arg(long)]
    pub samples_per_epoch: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub init_std: f64,
    /// Vanilla variant: train the text factors instead of freezing them.
    #[arg(long, visible_alias = "train-theta")]
    pub train_text: bool,
    /// Lock-free parallel updates when more than one thread is available.
    #[arg(long)]
    pub hogwild: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: PathBuf,
}

pub fn train_rank(variant: Variant, a: &TrainRankArgs, info: &RunInfo) -> Result<()> {
    let started = Instant::now();
    let seed = require_seed(a.seed)?;
    let train = load_dataset(&a.train)?;
    let features = match (&a.features, variant.uses_text()) {
        (Some(p), true) => Some(load_features(p)?.aligned_to(&train)?),
        (None, true) => bail!("{variant} needs --features"),
        (Some(_), false) => bail!("{variant} takes no --features"),
        (None, false) => None,
    };
    let defaults = TrainConfig::for_variant(variant);
    let config = TrainConfig {
        k: a.factors.unwrap_or(defaults.k),
        text_k: a.text_k,
        learning_rate: a.lr,
        lambda: a.lambda,
        epochs: a.epochs,
        samples_per_epoch: a.samples_per_epoch,
        seed,
        train_text: a.train_text,
        init_std: a.init_std,
        parallel: a.hogwild && info.threads > 1,
    };
    let model = subrec_core::train_rank(variant, &train, features.as_ref(), &config)?;
    model.save(&a.output).with_context(|| format!("writing {}", a.output.display()))?;
    let mut inputs = vec![a.train.as_path()];
    inputs.extend(a.features.as_deref());
    finish(info, &format!("train {variant}"), a, &inputs, &[&a.output], Some(seed), started)
}

enum Model {
    Als(AlsModel),
    Rank(Box<RankModel>),
}

fn load_model(path: &Path) -> Result<Model> {
    let mut magic = [0u8; 4];
    File::open(path)
        .and_then(|mut f| f.read_exact(&mut magic))
        .with_context(|| format!("reading model {}", path.display()))?;
    if &magic == ALS_MAGIC {
        Ok(Model::Als(AlsModel::load(path).with_context(|| format!("loading model {}", path.display()))?))
    } else if &magic == RANK_MAGIC {
        Ok(Model::Rank(Box::new(RankModel::load(path).with_context(|| format!("loading model {}", path.display()))?)))
    } else {
        bail!("{} is not a model file", path.display())
    }
}

impl Model {
    fn kind(&self) -> &'static str {
        match self {
            Model::Als(_) => "als",
            Model::Rank(m) => m.variant.as_str(),
        }
    }

    fn dims(&self) -> (usize, usize) {
        match self {
            Model::Als(m) => (m.n_users(), m.n_items()),
            Model::Rank(m) => (m.n_users(), m.n_items()),
        }
    }
}

/// Loads the features a model needs, aligned to `dataset`.
fn model_features(model: &Model, path: Option<&Path>, dataset: &InteractionDataset) -> Result<Option<TextFeatureSet>> {
    let needs = matches!(model, Model::Rank(m) if m.variant.uses_text());
    match (needs, path) {
        (true, Some(p)) => Ok(Some(load_features(p)?.aligned_to(dataset)?)),
        (true, None) => bail!("a {} model needs --features", model.kind()),
        (false, Some(_)) => bail!("a {} model takes no --features", model.kind()),
        (false, None) => Ok(None),
    }
}

fn check_dims(model: &Model, dataset: &InteractionDataset) -> Result<()> {
    let (u, i) = model.dims();
    if (u, i) != (dataset.n_users(), dataset.n_items()) {
        bail!("model has {u} users × {i} items but the dataset has {} × {}", dataset.n_users(), dataset.n_items());
    }
    Ok(())
}

/// Runs `f` with a scorer for `model`.
fn with_scorer<T>(
    model: &Model,
    features: Option<&TextFeatureSet>,
    f: impl FnOnce(&dyn Scorer) -> Result<T>,
) -> Result<T> {
    match model {
        Model::Als(m) => f(m),
        Model::Rank(m) => f(&RankScorer::new(m, features)?),
    }
}

#[derive(Args, Debug, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Sample this many pairs per user instead of enumerating them all.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Pairs sampled per user when the exact pair count exceeds the budget.
    #[arg(long, default_value_t = 5000)]
    pub auto_sample: usize,
    /// Largest total pair count evaluated exactly when --sample is absent.
    #[arg(long, default_value_t = DEFAULT_PAIR_BUDGET)]
    pub pair_budget: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Text report to write.
    #[arg(long)]
    pub report: PathBuf,
    /// Per-user AUC CSV [default: <report>.users.csv].
    #[arg(long)]
    pub per_user_csv: Option<PathBuf>,
}

pub fn evaluate(a: &EvaluateArgs, info: &RunInfo) -> Result<()> {
    let started = Instant::now();
    let model = load_model(&a.model)?;
    let split =
        SplitDataset { train: load_dataset(&a.train)?, test: load_dataset(&a.test)?, seed: a.seed.unwrap_or(0) };
    if !split.train.same_id_maps(&split.test) {
        bail!("{} and {} do not come from the same split", a.train.display(), a.test.display());
    }
    check_dims(&model, &split.train)?;
    let features = model_features(&model, a.features.as_deref(), &split.train)?;

    let mode = match a.sample {
        Some(n) => EvalMode::Sampled { per_user: n, seed: require_seed(a.seed)? },
        None => match EvalMode::auto(&split, a.pair_budget, a.auto_sample, a.seed.unwrap_or(0)) {
            EvalMode::Exact => EvalMode::Exact,
            sampled => {
                let seed = require_seed(a.seed)
                    .context("the exact pair count exceeds --pair-budget, so evaluation must sample")?;
                warn!("pair count exceeds the budget; sampling {} pairs per user with seed {seed}", a.auto_sample);
                match sampled {
                    EvalMode::Sampled { per_user, .. } => EvalMode::Sampled { per_user, seed },
                    EvalMode::Exact => unreachable!(),
                }
            }
        },
    };
    let result = with_scorer(&model, features.as_ref(), |s| Ok(evaluate_auc(s, &split, mode)?))?;
    info!("AUC {:.6} over {} users ({} skipped)", result.auc, result.users_evaluated, result.users_skipped);

    let model_hash = manifest::sha256_file(&a.model)?;
    let features_hash = features.as_ref().map(|f| hex::encode(f.content_hash()));
    let (mode_name, sample, seed) = match mode {
        EvalMode::Exact => ("exact", None, None),
        EvalMode::Sampled { per_user, seed } => ("sampled", Some(per_user), Some(seed)),
    };
    let ctx = report::AucContext {
        model_kind: model.kind(),
        model_sha256: &model_hash,
        features_sha256: features_hash.as_deref(),
        mode: mode_name,
        sample_per_user: sample,
        seed,
    };
    report::write_file(&a.report, &report::auc_text(&result, &ctx))?;
    let csv_path = a.per_user_csv.clone().unwrap_or_else(|| appended(&a.report, ".users.csv"));
    report::write_file(&csv_path, &report::per_user_csv(&result, split.train.users().names()))?;
    let mut inputs = vec![a.model.as_path(), a.train.as_path(), a.test.as_path()];
    inputs.extend(a.features.as_deref());
    finish(info, "evaluate", a, &inputs, &[&a.report, &csv_path], seed, started)
}

fn emit(header: &[&str], rows: &[Vec<String>], csv: Option<&Path>) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(report::table(header, rows).as_bytes())?;
    if let Some(p) = csv {
        report::write_file(p, &report::csv(header, rows))?;
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct RecommendArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Dataset the model was trained on.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub user: String,
    #[arg(short = 'k', long = "top-k", default_value_t = 10)]
    pub k: usize,
    /// Keep subreddits the user already commented in.
    #[arg(long)]
    pub include_train: bool,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn recommend(a: &RecommendArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let dataset = load_dataset(&a.dataset)?;
    check_dims(&model, &dataset)?;
    let features = model_features(&model, a.features.as_deref(), &dataset)?;
    let top = with_scorer(&model, features.as_ref(), |s| Ok(top_k(s, &dataset, &a.user, a.k, !a.include_train)?))?;
    if top.truncated {
        warn!("only {} subreddits are eligible for {}", top.items.len(), a.user);
    }
    let rows: Vec<Vec<String>> = top
        .items
        .iter()
        .map(|r| vec![r.rank.to_string(), r.item.clone(), format!("{:.6}", r.score), r.popularity_rank.to_string()])
        .collect();
    emit(&["rank", "subreddit", "score", "popularity_rank"], &rows, a.csv.as_deref())
}

#[derive(Args, Debug, Serialize)]
pub struct SimilarArgs {
    #[arg(long)]
    pub vectors: PathBuf,
    /// `item:<subreddit>` or `user:<name>`.
    #[arg(long)]
    pub query: String,
    #[arg(short = 'k', long = "top-k", default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn similar(a: &SimilarArgs) -> Result<()> {
    let features = load_features(&a.vectors)?;
    let query: DocTag = a.query.parse()?;
    let hits = nearest_neighbors(&features, &query, a.k)?;
    let rows: Vec<Vec<String>> = hits
        .iter()
        .enumerate()
        .map(|(r, n)| vec![(r + 1).to_string(), n.tag.to_string(), format!("{:.6}", n.similarity)])
        .collect();
    emit(&["rank", "document", "cosine"], &rows, a.csv.as_deref())
}

#[derive(Args, Debug, Serialize)]
pub struct PopularityArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub top: usize,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn popularity(a: &PopularityArgs) -> Result<()> {
    let dataset = load_dataset(&a.dataset)?;
    let entries = popularity_report(&dataset, a.top)?;
    let rows: Vec<Vec<String>> = entries
        .iter()
        .enumerate()
        .map(|(r, e)| {
            vec![(r + 1).to_string(), e.item.clone(), e.comments.to_string(), format!("{:.4}", e.cumulative_fraction)]
        })
        .collect();
    emit(&["rank", "subreddit", "comments", "cumulative_fraction"], &rows, a.csv.as_deref())
}
