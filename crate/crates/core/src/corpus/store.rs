use std::collections::{BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::types::{AnnotationMode, AnnotationRecord, AnnotatorId};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey {
    pub unit_id: String,
    pub annotator: AnnotatorId,
    pub mode: AnnotationMode,
}

impl RecordKey {
    pub fn of(record: &AnnotationRecord) -> Self {
        RecordKey { unit_id: record.unit_id().to_owned(), annotator: record.annotator().clone(), mode: record.mode() }
    }
}

/// One line of the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub seq: u64,
    /// 0 for the first record under a key, then 1, 2, ... for resubmissions.
    pub revision: u32,
    pub record: AnnotationRecord,
}

/// Append-only JSON-lines annotation log with an in-memory latest-record index.
///
/// Records are never rewritten. The latest record for a key is the one
/// with the greatest `(created_at, seq)`. One writer per file.
#[derive(Debug)]
pub struct AnnotationStore {
    path: Option<PathBuf>,
    file: Option<File>,
    entries: Vec<StoredRecord>,
    latest: HashMap<RecordKey, usize>,
    revisions: HashMap<RecordKey, u32>,
}

impl AnnotationStore {
    /// Store that lives only in memory.
    pub fn in_memory() -> Self {
        AnnotationStore {
            path: None,
            file: None,
            entries: Vec::new(),
            latest: HashMap::new(),
            revisions: HashMap::new(),
        }
    }

    /// Opens (creating if needed) a store for appending.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let mut store = AnnotationStore::read(path)?;
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(CorpusError::io(path))?;
        store.file = Some(file);
        Ok(store)
    }

    /// Snapshot of the log; appends are rejected.
    pub fn open_read_only(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        AnnotationStore::read(path.as_ref())
    }

    fn read(path: &Path) -> Result<Self, CorpusError> {
        let mut store = AnnotationStore::in_memory();
        store.path = Some(path.to_owned());
        if !path.exists() {
            return Ok(store);
        }
        let file = File::open(path).map_err(CorpusError::io(path))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(CorpusError::io(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: StoredRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                path: path.to_owned(),
                line: i as u64 + 1,
                reason: e.to_string(),
            })?;
            if entry.seq != store.entries.len() as u64 {
                return Err(CorpusError::Malformed {
                    path: path.to_owned(),
                    line: i as u64 + 1,
                    reason: format!("expected seq {}, found {}", store.entries.len(), entry.seq),
                });
            }
            store.index(entry);
        }
        Ok(store)
    }

    fn index(&mut self, entry: StoredRecord) {
        let key = RecordKey::of(&entry.record);
        let idx = self.entries.len();
        let replace = match self.latest.get(&key) {
            None => true,
            Some(&cur) => {
                let cur = &self.entries[cur];
                (entry.record.created_at(), entry.seq) >= (cur.record.created_at(), cur.seq)
            }
        };
        if replace {
            self.latest.insert(key.clone(), idx);
        }
        let rev = self.revisions.entry(key).or_insert(0);
        *rev = (*rev).max(entry.revision + 1);
        self.entries.push(entry);
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Appends a record and returns its stored envelope.
    pub fn append(&mut self, record: AnnotationRecord) -> Result<&StoredRecord, CorpusError> {
        let key = RecordKey::of(&record);
        let entry = StoredRecord {
            seq: self.entries.len() as u64,
            revision: self.revisions.get(&key).copied().unwrap_or(0),
            record,
        };
        match (&mut self.file, &self.path) {
            (Some(file), Some(path)) => {
                let mut line = serde_json::to_vec(&entry).expect("record serializes");
                line.push(b'\n');
                file.write_all(&line).map_err(CorpusError::io(path))?;
                file.flush().map_err(CorpusError::io(path))?;
            }
            (None, Some(path)) => {
                return Err(CorpusError::Io {
                    path: path.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::PermissionDenied, "store opened read-only"),
                })
            }
            _ => {}
        }
        self.index(entry);
        Ok(self.entries.last().expect("just pushed"))
    }

    /// Full log in append order.
    pub fn entries(&self) -> &[StoredRecord] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn latest(&self, key: &RecordKey) -> Option<&StoredRecord> {
        self.latest.get(key).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, unit_id: &str, annotator: &AnnotatorId, mode: AnnotationMode) -> bool {
        self.latest.contains_key(&RecordKey { unit_id: unit_id.to_owned(), annotator: annotator.clone(), mode })
    }

    /// Latest record for every key, in log order of those records.
    pub fn latest_records(&self) -> Vec<&AnnotationRecord> {
        let mut idx: Vec<usize> = self.latest.values().copied().collect();
        idx.sort_unstable();
        idx.into_iter().map(|i| &self.entries[i].record).collect()
    }

    /// Latest records of one annotator, optionally restricted to a mode.
    pub fn records_for(&self, annotator: &AnnotatorId, mode: Option<AnnotationMode>) -> Vec<AnnotationRecord> {
        self.latest_records()
            .into_iter()
            .filter(|r| r.annotator() == annotator && mode.is_none_or(|m| r.mode() == m))
            .cloned()
            .collect()
    }

    pub fn annotators(&self) -> BTreeSet<AnnotatorId> {
        self.latest.keys().map(|k| k.annotator.clone()).collect()
    }

    /// Unknown-annotator error listing who is present.
    pub fn unknown_annotator(&self, requested: &str) -> CorpusError {
        CorpusError::UnknownAnnotator {
            requested: requested.to_owned(),
            available: self.annotators().iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", "),
        }
    }
}
