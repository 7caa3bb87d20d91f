use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sric_core::eval::Variant;
use sric_core::Error;

mod commands;

/// Hate-speech classification with hashtag relation inference.
#[derive(Debug, Parser)]
#[command(name = "sric", version)]
struct Cli {
    /// Flat JSON config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct DataArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labelled synthetic corpus and its lexicon.
    Synth {
        #[arg(long)]
        n_per_class: Option<usize>,
        #[arg(long)]
        hashtag_rate: Option<f64>,
    },
    /// Fill in hashtag segmentations for a lexicon.
    Segment {
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        freq: Option<PathBuf>,
        /// Defaults to `<out>/lexicon.segmented.tsv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train one model (the teacher, or a baseline) on the posts with hashtags.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Assign pseudo-hashtags to hashtag-free posts with a teacher.
    Augment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train a student on the teacher's data plus the augmented posts.
    TrainStudent {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score a checkpoint on every post of a corpus.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// k-fold cross-validation of one variant.
    Crossval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        variant: Option<Variant>,
    },
}

fn report(err: &Error) -> ExitCode {
    let mut obj = serde_json::json!({
        "error": err.kind(),
        "message": err.to_string(),
    });
    if let Error::Config { field, .. } = err {
        obj["field"] = serde_json::json!(field);
    }
    eprintln!("{obj}");
    ExitCode::from(if matches!(err, Error::Config { .. }) { 2 } else { 1 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
