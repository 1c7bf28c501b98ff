use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CorpusError;
use crate::lexicon::ItemCategory;
use crate::types::{DiscourseTag, TextUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Csv,
    Jsonl,
}

/// Column (CSV) or field (JSON-lines) names for one source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub id: String,
    pub text: String,
    pub source: Option<String>,
    pub discourse_tags: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap { id: "id".into(), text: "text".into(), source: None, discourse_tags: Some("discourse_tags".into()) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub name: String,
    pub path: PathBuf,
    pub format: SourceFormat,
    #[serde(default)]
    pub expected_count: Option<usize>,
    /// Prepended to every id from this source.
    #[serde(default)]
    pub id_prefix: String,
    #[serde(default)]
    pub columns: ColumnMap,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergePolicy {
    /// Drop units whose normalized text was already seen.
    #[default]
    DedupNormalizedText,
    KeepAll,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default)]
    pub merge: MergePolicy,
    #[serde(rename = "source")]
    pub sources: Vec<SourceSpec>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(CorpusError::io(path))?;
        toml::from_str(&text).map_err(|e| CorpusError::Manifest { path: path.to_owned(), reason: e.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedDuplicate {
    pub id: String,
    pub source: String,
    pub duplicate_of: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceReport {
    pub name: String,
    pub loaded: usize,
    pub kept: usize,
    pub dropped: Vec<DroppedDuplicate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub sources: Vec<SourceReport>,
    pub total_loaded: usize,
    pub total_kept: usize,
}

impl IngestReport {
    pub fn render(&self) -> String {
        let mut out = String::from("source\tloaded\tkept\tdropped\n");
        for s in &self.sources {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", s.name, s.loaded, s.kept, s.dropped.len()));
        }
        out.push_str(&format!(
            "total\t{}\t{}\t{}\n",
            self.total_loaded,
            self.total_kept,
            self.total_loaded - self.total_kept
        ));
        for d in self.sources.iter().flat_map(|s| &s.dropped) {
            out.push_str(&format!("dropped {} ({}) duplicate of {}\n", d.id, d.source, d.duplicate_of));
        }
        out
    }
}

/// An ordered collection of units with id lookup.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    units: Vec<TextUnit>,
    by_id: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct CorpusLine {
    id: String,
    text: String,
    source: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    discourse_tags: Vec<DiscourseTag>,
}

impl Corpus {
    /// Builds a corpus; ids must be unique.
    pub fn new(units: Vec<TextUnit>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::new();
        for (i, u) in units.iter().enumerate() {
            if let Some(prev) = by_id.insert(u.id().to_owned(), i) {
                return Err(CorpusError::DuplicateId {
                    id: u.id().to_owned(),
                    first: units[prev].source().to_owned(),
                    second: u.source().to_owned(),
                });
            }
        }
        Ok(Corpus { units, by_id })
    }

    pub fn units(&self) -> &[TextUnit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TextUnit> {
        self.by_id.get(id).map(|&i| &self.units[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let file = File::create(path).map_err(CorpusError::io(path))?;
        let mut w = BufWriter::new(file);
        for u in &self.units {
            let line = CorpusLine {
                id: u.id().to_owned(),
                text: u.raw().to_owned(),
                source: u.source().to_owned(),
                discourse_tags: u.discourse_tags().to_vec(),
            };
            serde_json::to_writer(&mut w, &line).expect("corpus line serializes");
            w.write_all(b"\n").map_err(CorpusError::io(path))?;
        }
        w.flush().map_err(CorpusError::io(path))
    }

    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let spec = SourceSpec {
            name: "corpus".into(),
            path: path.as_ref().to_owned(),
            format: SourceFormat::Jsonl,
            expected_count: None,
            id_prefix: String::new(),
            columns: ColumnMap { source: Some("source".into()), ..ColumnMap::default() },
        };
        Corpus::new(read_source(&spec, path.as_ref())?)
    }
}

/// Loads every source in manifest order, normalizes and merges.
pub fn ingest(manifest: &DatasetManifest, root: &Path) -> Result<(Corpus, IngestReport), CorpusError> {
    let mut seen_text: HashMap<[u8; 32], String> = HashMap::new();
    let mut units = Vec::new();
    let mut reports = Vec::new();
    for spec in &manifest.sources {
        let path = root.join(&spec.path);
        let loaded = read_source(spec, &path)?;
        if let Some(expected) = spec.expected_count {
            if expected != loaded.len() {
                return Err(CorpusError::CountMismatch {
                    source_name: spec.name.clone(),
                    expected,
                    loaded: loaded.len(),
                });
            }
        }
        let mut report = SourceReport { name: spec.name.clone(), loaded: loaded.len(), kept: 0, dropped: vec![] };
        for unit in loaded {
            if manifest.merge == MergePolicy::DedupNormalizedText {
                let key = text_hash(&unit);
                if let Some(first) = seen_text.get(&key) {
                    report.dropped.push(DroppedDuplicate {
                        id: unit.id().to_owned(),
                        source: spec.name.clone(),
                        duplicate_of: first.clone(),
                    });
                    continue;
                }
                seen_text.insert(key, unit.id().to_owned());
            }
            report.kept += 1;
            units.push(unit);
        }
        reports.push(report);
    }
    let corpus = Corpus::new(units)?;
    let report = IngestReport {
        total_loaded: reports.iter().map(|r| r.loaded).sum(),
        total_kept: corpus.len(),
        sources: reports,
    };
    Ok((corpus, report))
}

fn text_hash(unit: &TextUnit) -> [u8; 32] {
    let mut h = Sha256::new();
    for t in unit.tokens() {
        h.update(t.text.as_bytes());
        h.update([0x1f]);
    }
    h.finalize().into()
}

fn read_source(spec: &SourceSpec, path: &Path) -> Result<Vec<TextUnit>, CorpusError> {
    if !path.exists() {
        return Err(CorpusError::Io {
            path: path.to_owned(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        });
    }
    match spec.format {
        SourceFormat::Csv => read_csv(spec, path),
        SourceFormat::Jsonl => read_jsonl(spec, path),
    }
}

fn read_csv(spec: &SourceSpec, path: &Path) -> Result<Vec<TextUnit>, CorpusError> {
    let malformed = |line: u64, reason: String| CorpusError::Malformed { path: path.to_owned(), line, reason };
    let mut reader =
        csv::ReaderBuilder::new().flexible(false).from_path(path).map_err(|e| malformed(0, e.to_string()))?;
    let headers = reader.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col =
        column(&spec.columns.id).ok_or_else(|| malformed(1, format!("missing column `{}`", spec.columns.id)))?;
    let text_col =
        column(&spec.columns.text).ok_or_else(|| malformed(1, format!("missing column `{}`", spec.columns.text)))?;
    let source_col = spec.columns.source.as_deref().and_then(column);
    let tags_col = spec.columns.discourse_tags.as_deref().and_then(column);

    let mut units = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let id = row.get(id_col).unwrap_or("").trim();
        if id.is_empty() {
            return Err(malformed(line, "empty id".into()));
        }
        let text = row.get(text_col).unwrap_or("");
        let source = source_col.and_then(|c| row.get(c)).filter(|s| !s.is_empty()).unwrap_or(&spec.name);
        let tags = match tags_col.and_then(|c| row.get(c)) {
            Some(cell) if !cell.trim().is_empty() => cell
                .split(';')
                .map(|name| {
                    name.parse::<ItemCategory>()
                        .map(|category| DiscourseTag { category, span: None })
                        .map_err(|e| malformed(line, e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?,
            _ => Vec::new(),
        };
        let unit = TextUnit::new(format!("{}{id}", spec.id_prefix), text, source)
            .with_discourse_tags(tags)
            .map_err(|e| malformed(line, e.to_string()))?;
        units.push(unit);
    }
    Ok(units)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TagField {
    Name(String),
    Tag(DiscourseTag),
}

fn read_jsonl(spec: &SourceSpec, path: &Path) -> Result<Vec<TextUnit>, CorpusError> {
    let malformed = |line: u64, reason: String| CorpusError::Malformed { path: path.to_owned(), line, reason };
    let file = File::open(path).map_err(CorpusError::io(path))?;
    let mut units = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| malformed(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| malformed(line_no, e.to_string()))?;
        let field = |name: &str| value.get(name);
        let id = match field(&spec.columns.id) {
            Some(serde_json::Value::String(s)) if !s.is_empty() => s.clone(),
            Some(serde_json::Value::Number(n)) => n.to_string(),
            _ => return Err(malformed(line_no, format!("missing or invalid `{}`", spec.columns.id))),
        };
        let Some(text) = field(&spec.columns.text).and_then(|v| v.as_str()) else {
            return Err(malformed(line_no, format!("missing or invalid `{}`", spec.columns.text)));
        };
        let source_key = spec.columns.source.as_deref().unwrap_or("source");
        let source = field(source_key).and_then(|v| v.as_str()).unwrap_or(&spec.name);
        let tags = match spec.columns.discourse_tags.as_deref().and_then(field) {
            None | Some(serde_json::Value::Null) => Vec::new(),
            Some(v) => {
                let raw: Vec<TagField> =
                    serde_json::from_value(v.clone()).map_err(|e| malformed(line_no, e.to_string()))?;
                raw.into_iter()
                    .map(|t| match t {
                        TagField::Tag(tag) => Ok(tag),
                        TagField::Name(name) => name
                            .parse::<ItemCategory>()
                            .map(|category| DiscourseTag { category, span: None })
                            .map_err(|e| malformed(line_no, e.to_string())),
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
        };
        let unit = TextUnit::new(format!("{}{id}", spec.id_prefix), text, source)
            .with_discourse_tags(tags)
            .map_err(|e| malformed(line_no, e.to_string()))?;
        units.push(unit);
    }
    Ok(units)
}
