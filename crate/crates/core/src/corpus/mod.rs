//! Dataset ingestion, the append-only annotation store and exports.

mod export;
mod ingest;
mod store;

use std::path::PathBuf;

use thiserror::Error;

pub use export::{export_analysis, export_training, import_analysis, ExportKind, TrainingRow};
pub use ingest::{
    ingest, Corpus, DatasetManifest, DroppedDuplicate, IngestReport, SourceFormat, SourceReport, SourceSpec,
};
pub use store::{AnnotationStore, RecordKey, StoredRecord};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("{path} line {line}: {reason}")]
    Malformed { path: PathBuf, line: u64, reason: String },
    #[error("source `{source_name}` has {loaded} rows but the manifest expects {expected}")]
    CountMismatch { source_name: String, expected: usize, loaded: usize },
    #[error("duplicate unit id `{id}` (sources `{first}` and `{second}`)")]
    DuplicateId { id: String, first: String, second: String },
    #[error("annotator `{requested}` not found; available: {available}")]
    UnknownAnnotator { requested: String, available: String },
}

impl CorpusError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CorpusError {
        let path = path.into();
        move |source| CorpusError::Io { path, source }
    }
}
