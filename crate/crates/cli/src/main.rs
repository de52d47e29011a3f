//! `cmo`: optimize, score and inspect commit messages.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "cmo", version, about = "Search-based commit message optimization")]
pub struct Cli {
    /// Config file (TOML or JSON). Defaults to $CMO_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Answer LLM requests from a mock script instead of the HTTP backend.
    #[arg(long, global = true, value_name = "FILE")]
    pub mock_script: Option<PathBuf>,
    /// Chat model for generation, updates, summaries and classification.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// On-disk response cache directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Improve a commit's message and print it.
    Optimize(OptimizeArgs),
    /// Build a retrieval corpus from JSON-lines commits.
    BuildCorpus(BuildCorpusArgs),
    /// Score a message against a diff and print the quality vector.
    Score(ScoreArgs),
    /// Print the context items extracted for a commit.
    Extract(ExtractArgs),
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("start").multiple(false))]
pub struct OptimizeArgs {
    #[arg(long)]
    pub repo: PathBuf,
    #[arg(long)]
    pub commit: String,
    /// Start from this message instead of the commit's own.
    #[arg(long, group = "start")]
    pub message: Option<String>,
    /// Start from the message in this file.
    #[arg(long, group = "start", value_name = "FILE")]
    pub from: Option<PathBuf>,
    /// Generate the starting message from retrieved examples.
    #[arg(long, group = "start")]
    pub blank: bool,
    /// Defaults to `retrieval.corpus` from the config.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Also write the message to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON-lines search trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub step_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildCorpusArgs {
    /// JSON lines of {diff, message, id?, repo?, commit_id?, timestamp?}.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Embedding threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Filter messages with the offline rule classifier instead of the LLM.
    #[arg(long)]
    pub rule_filter: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Unified diff file.
    #[arg(long)]
    pub diff: PathBuf,
    /// File holding the message.
    #[arg(long)]
    pub message: PathBuf,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub repo: PathBuf,
    #[arg(long)]
    pub commit: String,
    /// Comma-separated context kinds; all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub kinds: Vec<String>,
}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

fn run(argv: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(commands::Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    ExitCode::from(run(std::env::args_os()))
}
