use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Transport(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Transport(_) => 3,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

impl From<prescribe_core::corpus::CorpusError> for CliError {
    fn from(e: prescribe_core::corpus::CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<prescribe_core::agreement::AgreementError> for CliError {
    fn from(e: prescribe_core::agreement::AgreementError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<prescribe_core::lexicon::LexiconError> for CliError {
    fn from(e: prescribe_core::lexicon::LexiconError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<prescribe_llm::TemplateError> for CliError {
    fn from(e: prescribe_llm::TemplateError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<prescribe_llm::TransportError> for CliError {
    fn from(e: prescribe_llm::TransportError) -> Self {
        CliError::Transport(e.to_string())
    }
}

impl From<prescribe_llm::LlmError> for CliError {
    fn from(e: prescribe_llm::LlmError) -> Self {
        match e {
            prescribe_llm::LlmError::InvalidOptions(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}
