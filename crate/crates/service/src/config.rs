use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use prescribe_core::AnnotatorId;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read service config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid service config {path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
}

/// Registered annotators and their bearer tokens.
///
/// ```toml
/// [annotators]
/// alice = "token-for-alice"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default)]
    pub annotators: BTreeMap<String, String>,
}

impl ServiceConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        let config: ServiceConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Invalid { path: path.to_owned(), reason: e.to_string() })?;
        config.validate().map_err(|reason| ConfigError::Invalid { path: path.to_owned(), reason })?;
        Ok(config)
    }

    pub fn with_annotator(mut self, id: &str, token: &str) -> Self {
        self.annotators.insert(id.to_owned(), token.to_owned());
        self
    }

    fn validate(&self) -> Result<(), String> {
        let mut seen = BTreeMap::new();
        for (id, token) in &self.annotators {
            if token.is_empty() {
                return Err(format!("annotator `{id}` has an empty token"));
            }
            if let Some(other) = seen.insert(token, id) {
                return Err(format!("annotators `{other}` and `{id}` share a token"));
            }
        }
        Ok(())
    }

    /// Annotator owning `token`.
    pub fn annotator_for(&self, token: &str) -> Option<AnnotatorId> {
        self.annotators.iter().find(|(_, t)| t.as_str() == token).map(|(id, _)| AnnotatorId::new(id.clone()))
    }

    pub fn is_registered(&self, id: &str) -> bool {
        self.annotators.contains_key(id)
    }
}
