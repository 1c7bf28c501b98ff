use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Table,
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TransportMode {
    #[default]
    Live,
    Record,
    Replay,
    Mock,
}

/// Settings shared by all commands. File values are overridden by flags.
///
/// ```toml
/// workspace = "work"
/// lexicon = "lexicon.tsv"
/// transport = "replay"
/// recording = "runs/recording.jsonl"
/// concurrency = 8
/// rate_limit = 60
/// ```
///
/// Relative paths in the file resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub workspace: PathBuf,
    pub lexicon: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub transport: TransportMode,
    pub recording: Option<PathBuf>,
    pub model: String,
    pub temperature: f64,
    pub base_url: String,
    pub timeout_secs: u64,
    pub concurrency: usize,
    /// Requests started per minute; unlimited when absent.
    pub rate_limit: Option<u32>,
    pub max_failure_ratio: f64,
    pub output: OutputFormat,
}

impl Default for CliConfig {
    fn default() -> Self {
        let model = prescribe_llm::ModelConfig::default();
        let batch = prescribe_llm::BatchOptions::default();
        CliConfig {
            workspace: PathBuf::from("."),
            lexicon: None,
            templates: None,
            transport: TransportMode::default(),
            recording: None,
            model: model.model,
            temperature: model.temperature,
            base_url: "https://api.openai.com/v1".into(),
            timeout_secs: 60,
            concurrency: batch.concurrency,
            rate_limit: batch.rate_per_minute,
            max_failure_ratio: batch.max_failure_ratio,
            output: OutputFormat::default(),
        }
    }
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: CliConfig =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.workspace);
        for p in [&mut config.lexicon, &mut config.templates, &mut config.recording].into_iter().flatten() {
            resolve(p);
        }
        Ok(config)
    }

    /// Replay and record modes need a recording file.
    pub fn recording_path(&self) -> Result<&Path, CliError> {
        self.recording.as_deref().ok_or_else(|| {
            CliError::Usage(format!("--transport {:?} requires --recording <FILE>", self.transport).to_lowercase())
        })
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.workspace.join("corpus.jsonl")
    }

    pub fn store_path(&self) -> PathBuf {
        self.workspace.join("annotations.jsonl")
    }

    pub fn run_log_path(&self) -> PathBuf {
        self.workspace.join("llm_runs.jsonl")
    }
}

/// `A,B` annotator pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair(pub String, pub String);

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(',') {
            Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => {
                Ok(Pair(a.trim().to_owned(), b.trim().to_owned()))
            }
            _ => Err(format!("expected two annotator ids separated by a comma, got `{s}`")),
        }
    }
}
