//! `subrec`: batch front end for preprocessing, training, evaluation and queries.

mod commands;
mod config;
mod manifest;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{CommandFactory, Parser, Subcommand};

use crate::commands::{
    EmbedArgs, EvaluateArgs, IngestArgs, PopularityArgs, RecommendArgs, SimilarArgs, SplitArgs, TrainAlsArgs,
    TrainRankArgs,
};
use crate::config::ConfigFile;
use crate::manifest::RunInfo;

#[derive(Parser, Debug)]
#[command(name = "subrec", version, about = "Implicit-feedback subreddit recommender")]
struct Cli {
    /// Worker threads; 1 selects the deterministic sequential path everywhere.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Flat `key = value` file of option defaults; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// More log output (repeat for trace). `RUST_LOG` takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Filter a comment dump and build the interaction dataset.
    Ingest(IngestArgs),
    /// Split a dataset into per-user stratified train and test halves.
    Split(SplitArgs),
    /// Train subreddit and user document vectors.
    Embed(EmbedArgs),
    /// Train a recommendation model.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Compute AUC of a model on a held-out split.
    Evaluate(EvaluateArgs),
    /// Top-k subreddits for one user.
    Recommend(RecommendArgs),
    /// Nearest documents by cosine similarity of their vectors.
    Similar(SimilarArgs),
    /// Most-commented subreddits with their cumulative share.
    Popularity(PopularityArgs),
}

#[derive(Subcommand, Debug)]
enum TrainCommand {
    /// Implicit alternating least squares.
    Als(TrainAlsArgs),
    /// Bayesian personalized ranking on latent factors only.
    Bpr(TrainRankArgs),
    /// BPR plus inner products of fixed document vectors.
    TbprVanilla(TrainRankArgs),
    /// BPR plus a learnt projection of subreddit document vectors.
    TbprLearnt(TrainRankArgs),
}

/// The command tree with every argument optional, so a first pass can read
/// `--config` before required options are known to be satisfied.
fn relaxed(mut cmd: clap::Command) -> clap::Command {
    let ids: Vec<clap::Id> = cmd.get_arguments().map(|a| a.get_id().clone()).collect();
    for id in ids {
        cmd = cmd.mut_arg(id, |a| a.required(false));
    }
    let subs: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in subs {
        cmd = cmd.mut_subcommand(name, relaxed);
    }
    cmd
}

fn config_path(matches: &clap::ArgMatches) -> Option<PathBuf> {
    let mut m = matches;
    let mut found = m.get_one::<PathBuf>("config").cloned();
    while let Some((_, sub)) = m.subcommand() {
        m = sub;
        if let Ok(Some(p)) = m.try_get_one::<PathBuf>("config") {
            found = Some(p.clone());
        }
    }
    found
}

/// Parses `argv`, folding in config-file defaults for options left unset.
fn parse(argv: Vec<OsString>) -> Result<(Cli, Option<ConfigFile>), clap::Error> {
    let matches = match relaxed(Cli::command()).try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => return Err(Cli::try_parse_from(&argv).err().unwrap_or(e)),
    };
    let Some(path) = config_path(&matches) else {
        return Ok((Cli::try_parse_from(&argv)?, None));
    };
    let fail = |kind, e: anyhow::Error| Cli::command().error(kind, format!("{e:#}"));
    let config = ConfigFile::read(&path).map_err(|e| fail(clap::error::ErrorKind::Io, e))?;
    let (merged, unused) = config::merge(relaxed(Cli::command()), &argv, &matches, &config)
        .map_err(|e| fail(clap::error::ErrorKind::InvalidValue, e))?;
    for key in unused {
        eprintln!("warning: config key `{key}` does not apply to this command");
    }
    Ok((Cli::try_parse_from(merged)?, Some(config)))
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp_millis().init();
}

fn run(cli: Cli, config: Option<ConfigFile>, argv: Vec<String>) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            anyhow::bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let info = RunInfo { argv, config, threads: rayon::current_num_threads() };
    match cli.command {
        Command::Ingest(a) => commands::ingest(&a, &info),
        Command::Split(a) => commands::split(&a, &info),
        Command::Embed(a) => commands::embed(&a, &info),
        Command::Train(TrainCommand::Als(a)) => commands::train_als(&a, &info),
        Command::Train(TrainCommand::Bpr(a)) => commands::train_rank(subrec_core::Variant::Bpr, &a, &info),
        Command::Train(TrainCommand::TbprVanilla(a)) => {
            commands::train_rank(subrec_core::Variant::TbprVanilla, &a, &info)
        }
        Command::Train(TrainCommand::TbprLearnt(a)) => {
            commands::train_rank(subrec_core::Variant::TbprLearnt, &a, &info)
        }
        Command::Evaluate(a) => commands::evaluate(&a, &info),
        Command::Recommend(a) => commands::recommend(&a),
        Command::Similar(a) => commands::similar(&a),
        Command::Popularity(a) => commands::popularity(&a),
    }
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let (cli, config) = match parse(argv.clone()) {
        Ok(parsed) => parsed,
        Err(e) => e.exit(),
    };
    init_logging(cli.verbose);
    let argv = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, config, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
