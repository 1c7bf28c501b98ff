use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AnnotationStore, Corpus, CorpusError};
use crate::types::{AnnotationMode, AnnotationRecord, AnnotatorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    /// Full annotation records, one JSON object per line.
    Analysis,
    /// Text plus labels for downstream model training.
    Training,
}

impl FromStr for ExportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "analysis" => Ok(ExportKind::Analysis),
            "training" => Ok(ExportKind::Training),
            other => Err(format!("unknown export kind `{other}` (expected analysis or training)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub unit_id: String,
    pub annotator: AnnotatorId,
    pub text: String,
    pub di: u8,
    pub ag: u8,
    pub toxic: bool,
}

/// Latest records ordered by corpus position, then annotator and mode.
/// Records for units missing from the corpus go last, by unit id.
fn selected<'a>(
    store: &'a AnnotationStore,
    corpus: &Corpus,
    annotator: Option<&str>,
) -> Result<Vec<&'a AnnotationRecord>, CorpusError> {
    if let Some(name) = annotator {
        if !store.annotators().contains(&AnnotatorId::from(name)) {
            return Err(store.unknown_annotator(name));
        }
    }
    let mut records: Vec<&AnnotationRecord> =
        store.latest_records().into_iter().filter(|r| annotator.is_none_or(|a| r.annotator().as_str() == a)).collect();
    records.sort_by(|a, b| {
        let key = |r: &AnnotationRecord| {
            (
                corpus.position(r.unit_id()).unwrap_or(usize::MAX),
                r.unit_id().to_owned(),
                r.annotator().clone(),
                r.mode(),
            )
        };
        key(a).cmp(&key(b))
    });
    Ok(records)
}

fn write_jsonl<T: Serialize>(rows: &[T], out: &Path) -> Result<(), CorpusError> {
    let file = File::create(out).map_err(CorpusError::io(out))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).expect("rows serialize");
        w.write_all(b"\n").map_err(CorpusError::io(out))?;
    }
    w.flush().map_err(CorpusError::io(out))
}

/// Writes the latest record per (unit, annotator, mode). Returns the row count.
pub fn export_analysis(
    store: &AnnotationStore,
    corpus: &Corpus,
    annotator: Option<&str>,
    out: &Path,
) -> Result<usize, CorpusError> {
    let records = selected(store, corpus, annotator)?;
    write_jsonl(&records, out)?;
    Ok(records.len())
}

/// Reads an analysis export back, re-validating every record.
pub fn import_analysis(path: &Path) -> Result<Vec<AnnotationRecord>, CorpusError> {
    let file = File::open(path).map_err(CorpusError::io(path))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(CorpusError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            path: path.to_owned(),
            line: i as u64 + 1,
            reason: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Writes prescriptive records joined with unit text. Units absent from the
/// corpus are skipped. Returns the rows written.
pub fn export_training(
    store: &AnnotationStore,
    corpus: &Corpus,
    annotator: Option<&str>,
    out: &Path,
) -> Result<Vec<TrainingRow>, CorpusError> {
    let rows: Vec<TrainingRow> = selected(store, corpus, annotator)?
        .into_iter()
        .filter(|r| r.mode() == AnnotationMode::Prescriptive)
        .filter_map(|r| {
            let unit = corpus.get(r.unit_id())?;
            Some(TrainingRow {
                unit_id: r.unit_id().to_owned(),
                annotator: r.annotator().clone(),
                text: unit.raw().to_owned(),
                di: r.di()?.value(),
                ag: r.ag()?.value(),
                toxic: r.toxic(),
            })
        })
        .collect();
    write_jsonl(&rows, out)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Engine;
    use crate::types::TextUnit;
    use chrono::{TimeZone, Utc};

    fn fixture() -> (AnnotationStore, Corpus) {
        let corpus = Corpus::new(vec![
            TextUnit::new("b", "you are a fucking dumbass", "t"),
            TextUnit::new("a", "Well, FUCK.", "t"),
        ])
        .unwrap();
        let engine = Engine::default();
        let mut store = AnnotationStore::in_memory();
        let at = Utc.timestamp_opt(0, 0).unwrap();
        for unit in corpus.units().iter().rev() {
            store.append(engine.annotate(unit, at)).unwrap();
            store.append(AnnotationRecord::descriptive(unit.id(), "human".into(), true, at)).unwrap();
        }
        (store, corpus)
    }

    #[test]
    fn analysis_round_trips_in_corpus_order() {
        let (store, corpus) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out.jsonl");
        assert_eq!(export_analysis(&store, &corpus, None, &out).unwrap(), 4);
        let back = import_analysis(&out).unwrap();
        assert_eq!(back.iter().map(|r| r.unit_id()).collect::<Vec<_>>(), ["b", "b", "a", "a"]);
        let mut expected: Vec<AnnotationRecord> = store.latest_records().into_iter().cloned().collect();
        expected.sort_by_key(|r| (corpus.position(r.unit_id()), r.annotator().clone()));
        assert_eq!(back, expected);
    }

    #[test]
    fn training_rows_are_prescriptive_only() {
        let (store, corpus) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let rows = export_training(&store, &corpus, None, &dir.path().join("t.jsonl")).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].unit_id.as_str(), rows[0].di, rows[0].ag, rows[0].toxic), ("b", 1, 2, true));
        assert_eq!((rows[1].unit_id.as_str(), rows[1].di, rows[1].ag, rows[1].toxic), ("a", 0, 1, false));
    }

    #[test]
    fn unknown_annotator_is_an_error() {
        let (store, corpus) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let err = export_analysis(&store, &corpus, Some("nobody"), &dir.path().join("x")).unwrap_err();
        assert!(err.to_string().contains("human"), "{err}");
    }
}
