//! `prescribe`: ingest corpora, annotate with the rule engine or an LLM,
//! score single texts, measure agreement, export and serve the workbench API.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 transport error.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use prescribe_core::agreement::LabelKind;
use prescribe_core::corpus::ExportKind;
use prescribe_core::AnnotationMode;

pub use config::{CliConfig, OutputFormat, Pair, TransportMode};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "prescribe", version, about = "Prescriptive offensive-language annotation toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Directory holding corpus.jsonl, annotations.jsonl and llm_runs.jsonl.
    #[arg(long, global = true)]
    pub workspace: Option<PathBuf>,
    /// TOML file with defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub output: Option<OutputFormat>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load every source in a dataset manifest into the workspace corpus.
    Ingest {
        manifest: PathBuf,
        /// Directory source paths are relative to (defaults to the manifest's).
        #[arg(long)]
        root: Option<PathBuf>,
    },
    /// Annotate every corpus unit not yet labelled by the chosen annotator.
    Annotate(AnnotateArgs),
    /// Analyse one text and print findings, score, level, DI and verdict.
    Score {
        text: String,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Pairwise agreement (percent, Cohen's kappa, Gwet's AC1).
    Agree {
        /// Annotator pair `A,B`; repeat for several pairs.
        #[arg(long, required = true)]
        pair: Vec<Pair>,
        /// di, ag or toxicity.
        #[arg(long, default_value = "toxicity")]
        kind: LabelKind,
        /// Which stored records to compare.
        #[arg(long, value_parser = parse_mode, default_value = "prescriptive")]
        mode: AnnotationMode,
        /// Wide CSV label table (`id` plus one column per annotator) used instead of the store.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Write the latest records as analysis or training JSON lines.
    Export {
        #[arg(long, default_value = "analysis")]
        kind: ExportKind,
        #[arg(long)]
        annotator: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the annotation API (and optionally the workbench bundle).
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// TOML file mapping annotator ids to bearer tokens.
        #[arg(long)]
        annotators: PathBuf,
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("backend").required(true).args(["engine", "llm"]))]
pub struct AnnotateArgs {
    #[arg(long)]
    pub engine: bool,
    #[arg(long)]
    pub llm: bool,
    #[arg(long, value_parser = parse_mode, default_value = "prescriptive")]
    pub mode: AnnotationMode,
    #[arg(long, value_enum)]
    pub transport: Option<TransportMode>,
    #[arg(long)]
    pub recording: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Requests started per minute.
    #[arg(long)]
    pub rate_limit: Option<u32>,
    #[arg(long)]
    pub max_failure_ratio: Option<f64>,
}

fn parse_mode(s: &str) -> Result<AnnotationMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "prescriptive" => Ok(AnnotationMode::Prescriptive),
        "descriptive" => Ok(AnnotationMode::Descriptive),
        other => Err(format!("unknown mode `{other}` (expected prescriptive or descriptive)")),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            return output::emit(out, &e.render().to_string());
        }
        Err(e) => {
            let text = e.render().to_string();
            return Err(CliError::Usage(text.trim_start_matches("error: ").trim_end().to_owned()));
        }
    };
    let mut config = match &cli.global.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    if let Some(w) = cli.global.workspace {
        config.workspace = w;
    }
    if let Some(o) = cli.global.output {
        config.output = o;
    }
    commands::dispatch(cli.command, config, out)
}
