//! Pairwise inter-annotator reliability: percent agreement, Cohen's kappa
//! and Gwet's AC1, with the confusion matrix they are computed from.
//!
//! Both coefficients are evaluated from integer counts so that the
//! degenerate case (chance agreement exactly 1) is detected exactly:
//!
//! ```text
//! kappa = (n·trace − Σ row_k·col_k) / (n² − Σ row_k·col_k)
//! AC1   = (4n(K−1)·trace − Σ (row_k+col_k)(2n−row_k−col_k))
//!       / (4n²(K−1)   − Σ (row_k+col_k)(2n−row_k−col_k))
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{AnnotationRecord, AnnotatorId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgreementError {
    #[error("confusion matrix is empty (n = 0)")]
    Empty,
    #[error("duplicate unit id `{unit_id}` in annotations of {annotator}")]
    DuplicateUnit { annotator: String, unit_id: String },
    #[error("label {label} is outside the {kind} domain")]
    LabelOutOfDomain { kind: LabelKind, label: u8 },
    #[error("no aligned units between {a} and {b}")]
    NoAlignedPairs { a: String, b: String },
    #[error("confusion matrix needs at least two categories")]
    TooFewCategories,
    #[error("label table {path}: {reason}")]
    Table { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelKind {
    #[serde(rename = "DI")]
    Di,
    #[serde(rename = "AG")]
    Ag,
    Toxicity,
}

impl LabelKind {
    pub fn domain(self) -> Vec<u8> {
        match self {
            LabelKind::Ag => vec![0, 1, 2],
            LabelKind::Di | LabelKind::Toxicity => vec![0, 1],
        }
    }

    /// The label a record carries for this kind, if any.
    pub fn label_of(self, record: &AnnotationRecord) -> Option<u8> {
        match self {
            LabelKind::Di => record.di().map(|d| d.value()),
            LabelKind::Ag => record.ag().map(|a| a.value()),
            LabelKind::Toxicity => Some(u8::from(record.toxic())),
        }
    }
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelKind::Di => "DI",
            LabelKind::Ag => "AG",
            LabelKind::Toxicity => "Toxicity",
        })
    }
}

impl std::str::FromStr for LabelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "di" => Ok(LabelKind::Di),
            "ag" => Ok(LabelKind::Ag),
            "t" | "tox" | "toxic" | "toxicity" => Ok(LabelKind::Toxicity),
            other => Err(format!("unknown label kind `{other}` (expected di, ag or toxicity)")),
        }
    }
}

/// A reliability coefficient, or an explicit marker when chance agreement is 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Value(f64),
    Undefined(UndefinedMarker),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UndefinedMarker {
    Undefined,
}

impl Coefficient {
    pub const UNDEFINED: Coefficient = Coefficient::Undefined(UndefinedMarker::Undefined);

    pub fn value(self) -> Option<f64> {
        match self {
            Coefficient::Value(v) => Some(v),
            Coefficient::Undefined(_) => None,
        }
    }

    pub fn is_undefined(self) -> bool {
        self.value().is_none()
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Value(v) => write!(f, "{v:.4}"),
            Coefficient::Undefined(_) => f.write_str("undefined"),
        }
    }
}

/// Rows are rater A, columns rater B, both in `categories` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    categories: Vec<u8>,
    counts: Vec<Vec<u64>>,
    n: u64,
}

impl ConfusionMatrix {
    pub fn new(categories: Vec<u8>, counts: Vec<Vec<u64>>) -> Result<Self, AgreementError> {
        let k = categories.len();
        if k < 2 {
            return Err(AgreementError::TooFewCategories);
        }
        assert!(counts.len() == k && counts.iter().all(|r| r.len() == k), "counts must be {k}x{k}");
        let n = counts.iter().flatten().sum();
        Ok(ConfusionMatrix { categories, counts, n })
    }

    /// Square matrix over categories `0..k`.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, AgreementError> {
        let k = counts.len() as u8;
        ConfusionMatrix::new((0..k).collect(), counts)
    }

    pub fn from_pairs(kind: LabelKind, pairs: impl IntoIterator<Item = (u8, u8)>) -> Result<Self, AgreementError> {
        let categories = kind.domain();
        let k = categories.len();
        let mut counts = vec![vec![0u64; k]; k];
        let pos = |label: u8| {
            categories.iter().position(|&c| c == label).ok_or(AgreementError::LabelOutOfDomain { kind, label })
        };
        for (a, b) in pairs {
            counts[pos(a)?][pos(b)?] += 1;
        }
        ConfusionMatrix::new(categories, counts)
    }

    pub fn categories(&self) -> &[u8] {
        &self.categories
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.categories.len()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.k()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn transpose(&self) -> ConfusionMatrix {
        let k = self.k();
        let counts = (0..k).map(|i| (0..k).map(|j| self.counts[j][i]).collect()).collect();
        ConfusionMatrix { categories: self.categories.clone(), counts, n: self.n }
    }

    /// CSV with a header row of rater-B categories and one row per rater-A category.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a\\b");
        for c in &self.categories {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (c, row) in self.categories.iter().zip(&self.counts) {
            out.push_str(&c.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn percent_agreement(m: &ConfusionMatrix) -> Result<f64, AgreementError> {
    if m.n == 0 {
        return Err(AgreementError::Empty);
    }
    Ok(m.trace() as f64 / m.n as f64)
}

pub fn cohen_kappa(m: &ConfusionMatrix) -> Result<Coefficient, AgreementError> {
    if m.n == 0 {
        return Err(AgreementError::Empty);
    }
    let n = u128::from(m.n);
    let chance: u128 = m.row_totals().iter().zip(m.col_totals()).map(|(&r, c)| u128::from(r) * u128::from(c)).sum();
    let denominator = n * n - chance;
    if denominator == 0 {
        return Ok(Coefficient::UNDEFINED);
    }
    let numerator = (n * u128::from(m.trace())) as f64 - chance as f64;
    Ok(Coefficient::Value(numerator / denominator as f64))
}

pub fn gwet_ac1(m: &ConfusionMatrix) -> Result<Coefficient, AgreementError> {
    if m.n == 0 {
        return Err(AgreementError::Empty);
    }
    let n = u128::from(m.n);
    let k_minus_1 = (m.k() - 1) as u128;
    let chance: u128 = m
        .row_totals()
        .iter()
        .zip(m.col_totals())
        .map(|(&r, c)| {
            let s = u128::from(r) + u128::from(c);
            s * (2 * n - s)
        })
        .sum();
    let scale = 4 * n * n * k_minus_1;
    if scale == chance {
        return Ok(Coefficient::UNDEFINED);
    }
    let numerator = (4 * n * k_minus_1 * u128::from(m.trace())) as f64 - chance as f64;
    Ok(Coefficient::Value(numerator / (scale - chance) as f64))
}

/// Records of two annotators joined on unit id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub pairs: Vec<(String, u8, u8)>,
    /// Units present for only one of the two annotators.
    pub unmatched_a: Vec<String>,
    pub unmatched_b: Vec<String>,
    /// Units present for both but lacking the label on at least one side.
    pub not_applicable: Vec<String>,
}

impl Alignment {
    pub fn unmatched(&self) -> usize {
        self.unmatched_a.len() + self.unmatched_b.len()
    }
}

fn keyed(records: &[AnnotationRecord]) -> Result<BTreeMap<&str, &AnnotationRecord>, AgreementError> {
    let mut map = BTreeMap::new();
    for r in records {
        if map.insert(r.unit_id(), r).is_some() {
            return Err(AgreementError::DuplicateUnit {
                annotator: r.annotator().to_string(),
                unit_id: r.unit_id().to_owned(),
            });
        }
    }
    Ok(map)
}

/// Inner join of two record sets on unit id; order follows `a`.
pub fn align(a: &[AnnotationRecord], b: &[AnnotationRecord], kind: LabelKind) -> Result<Alignment, AgreementError> {
    let map_a = keyed(a)?;
    let map_b = keyed(b)?;
    let mut out =
        Alignment { pairs: Vec::new(), unmatched_a: Vec::new(), unmatched_b: Vec::new(), not_applicable: Vec::new() };
    for ra in a {
        let id = ra.unit_id();
        match map_b.get(id) {
            None => out.unmatched_a.push(id.to_owned()),
            Some(rb) => match (kind.label_of(ra), kind.label_of(rb)) {
                (Some(la), Some(lb)) => out.pairs.push((id.to_owned(), la, lb)),
                _ => out.not_applicable.push(id.to_owned()),
            },
        }
    }
    out.unmatched_b = b.iter().map(|r| r.unit_id()).filter(|id| !map_a.contains_key(id)).map(str::to_owned).collect();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub pair: (String, String),
    pub label_kind: LabelKind,
    pub n: u64,
    pub unmatched: usize,
    pub percent_agreement: f64,
    pub cohen_kappa: Coefficient,
    pub gwet_ac1: Coefficient,
    pub matrix: ConfusionMatrix,
}

impl AgreementReport {
    /// Builds a report from already-paired labels.
    pub fn from_labels(
        pair: (String, String),
        kind: LabelKind,
        labels: impl IntoIterator<Item = (u8, u8)>,
        unmatched: usize,
    ) -> Result<Self, AgreementError> {
        let matrix = ConfusionMatrix::from_pairs(kind, labels)?;
        if matrix.n() == 0 {
            return Err(AgreementError::NoAlignedPairs { a: pair.0, b: pair.1 });
        }
        Ok(AgreementReport {
            n: matrix.n(),
            unmatched,
            percent_agreement: percent_agreement(&matrix)?,
            cohen_kappa: cohen_kappa(&matrix)?,
            gwet_ac1: gwet_ac1(&matrix)?,
            matrix,
            pair,
            label_kind: kind,
        })
    }

    /// One tab-separated row in the layout `pair  CK  AC1  Agr.%`.
    pub fn table_row(&self) -> String {
        format!(
            "{} & {}\t{}\t{}\t{:.2}",
            self.pair.0,
            self.pair.1,
            self.cohen_kappa,
            self.gwet_ac1,
            self.percent_agreement * 100.0
        )
    }

    pub fn render_table(&self) -> String {
        let mut out =
            format!(
            "{} agreement, n = {} ({} unmatched)\nPair\tCK\tAC1\tAgr.%\n{}\n\nConfusion matrix (rows {}, cols {}):\n",
            self.label_kind, self.n, self.unmatched, self.table_row(), self.pair.0, self.pair.1
        );
        out.push('\t');
        out.push_str(&self.matrix.categories().iter().map(u8::to_string).collect::<Vec<_>>().join("\t"));
        out.push('\n');
        for (c, row) in self.matrix.categories().iter().zip(self.matrix.counts()) {
            out.push_str(&format!("{c}\t{}\n", row.iter().map(u64::to_string).collect::<Vec<_>>().join("\t")));
        }
        out
    }
}

pub fn report_pair(
    a: &[AnnotationRecord],
    b: &[AnnotationRecord],
    kind: LabelKind,
) -> Result<AgreementReport, AgreementError> {
    let name =
        |records: &[AnnotationRecord]| records.first().map_or_else(|| "?".to_owned(), |r| r.annotator().to_string());
    let alignment = align(a, b, kind)?;
    AgreementReport::from_labels(
        (name(a), name(b)),
        kind,
        alignment.pairs.iter().map(|(_, x, y)| (*x, *y)),
        alignment.unmatched(),
    )
}

/// Labels keyed by unit id for each annotator, as read from a wide label table.
pub type LabelTable = HashMap<AnnotatorId, BTreeMap<String, u8>>;

/// Reads a wide CSV label table: an `id` column followed by one column per
/// annotator. Empty cells mean "not labelled".
pub fn read_label_table(path: &std::path::Path) -> Result<LabelTable, AgreementError> {
    let fail = |reason: String| AgreementError::Table { path: path.display().to_string(), reason };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| fail(e.to_string()))?;
    let headers = reader.headers().map_err(|e| fail(e.to_string()))?.clone();
    let id_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("id") || h.eq_ignore_ascii_case("unit_id"))
        .ok_or_else(|| fail("missing `id` column".to_owned()))?;
    let mut table = LabelTable::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| fail(e.to_string()))?;
        let id = row.get(id_col).unwrap_or_default().to_owned();
        for (c, name) in headers.iter().enumerate() {
            if c == id_col {
                continue;
            }
            let cell = row.get(c).unwrap_or_default();
            if cell.is_empty() {
                continue;
            }
            let label: u8 = cell
                .parse()
                .map_err(|_| fail(format!("row {}: column `{name}` holds `{cell}`, not a label", i + 2)))?;
            let column = table.entry(AnnotatorId::new(name)).or_default();
            if column.insert(id.clone(), label).is_some() {
                return Err(fail(format!("row {}: duplicate id `{id}`", i + 2)));
            }
        }
    }
    Ok(table)
}

/// Pairs two columns of a label table on unit id.
pub fn report_from_table(
    table: &LabelTable,
    a: &AnnotatorId,
    b: &AnnotatorId,
    kind: LabelKind,
) -> Option<Result<AgreementReport, AgreementError>> {
    let (col_a, col_b) = (table.get(a)?, table.get(b)?);
    let pairs: Vec<(u8, u8)> = col_a.iter().filter_map(|(id, &la)| col_b.get(id).map(|&lb| (la, lb))).collect();
    let unmatched = col_a.keys().filter(|k| !col_b.contains_key(*k)).count()
        + col_b.keys().filter(|k| !col_a.contains_key(*k)).count();
    Some(AgreementReport::from_labels((a.to_string(), b.to_string()), kind, pairs, unmatched))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{AggressionScore, DiLabel};
    use chrono::Utc;

    fn m(counts: &[&[u64]]) -> ConfusionMatrix {
        ConfusionMatrix::from_counts(counts.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn empty_matrix_errors() {
        let z = m(&[&[0, 0], &[0, 0]]);
        assert_eq!(cohen_kappa(&z), Err(AgreementError::Empty));
        assert_eq!(gwet_ac1(&z), Err(AgreementError::Empty));
    }

    #[test]
    fn single_category_matrix_rejected() {
        assert_eq!(ConfusionMatrix::from_counts(vec![vec![3]]), Err(AgreementError::TooFewCategories));
    }

    #[test]
    fn degenerate_prevalence() {
        let d = m(&[&[100, 0], &[0, 0]]);
        assert!(cohen_kappa(&d).unwrap().is_undefined());
        assert_eq!(gwet_ac1(&d).unwrap().value(), Some(1.0));
    }

    #[test]
    fn undefined_serializes_as_marker() {
        let json = serde_json::to_string(&Coefficient::UNDEFINED).unwrap();
        assert_eq!(json, "\"undefined\"");
        let back: Coefficient = serde_json::from_str(&json).unwrap();
        assert!(back.is_undefined());
        assert_eq!(serde_json::to_string(&Coefficient::Value(0.5)).unwrap(), "0.5");
    }

    fn rec(id: &str, annotator: &str, di: u8) -> AnnotationRecord {
        AnnotationRecord::prescriptive(
            id,
            annotator.into(),
            DiLabel::new(di).unwrap(),
            Default::default(),
            AggressionScore::ONE,
            vec![],
            Utc::now(),
        )
        .unwrap()
    }

    #[test]
    fn align_reports_unmatched() {
        let a = vec![rec("1", "a", 0), rec("2", "a", 1), rec("3", "a", 1)];
        let b = vec![rec("2", "b", 1), rec("3", "b", 0), rec("4", "b", 0)];
        let al = align(&a, &b, LabelKind::Di).unwrap();
        assert_eq!(al.pairs.len(), 2);
        assert_eq!(al.unmatched(), 2);
    }

    #[test]
    fn align_empty() {
        let al = align(&[], &[], LabelKind::Ag).unwrap();
        assert_eq!((al.pairs.len(), al.unmatched()), (0, 0));
    }

    #[test]
    fn align_rejects_duplicates() {
        let a = vec![rec("1", "a", 0), rec("1", "a", 1)];
        let err = align(&a, &[], LabelKind::Di).unwrap_err();
        assert!(matches!(err, AgreementError::DuplicateUnit { ref unit_id, .. } if unit_id == "1"));
    }

    #[test]
    fn report_needs_pairs() {
        let a = vec![rec("1", "a", 0)];
        let b = vec![rec("2", "b", 0)];
        assert!(matches!(report_pair(&a, &b, LabelKind::Di), Err(AgreementError::NoAlignedPairs { .. })));
    }

    #[test]
    fn identical_labels_full_agreement() {
        let a: Vec<_> = (0..10).map(|i| rec(&i.to_string(), "a", (i % 2) as u8)).collect();
        let b: Vec<_> = (0..10).map(|i| rec(&i.to_string(), "b", (i % 2) as u8)).collect();
        let r = report_pair(&a, &b, LabelKind::Di).unwrap();
        assert_eq!(r.percent_agreement, 1.0);
        assert_eq!(r.cohen_kappa.value(), Some(1.0));
        assert_eq!(r.gwet_ac1.value(), Some(1.0));
        // AG is constant (score 1 everywhere): kappa undefined, AC1 1.
        let r = report_pair(&a, &b, LabelKind::Ag).unwrap();
        assert!(r.cohen_kappa.is_undefined());
        assert_eq!(r.gwet_ac1.value(), Some(1.0));
        assert_eq!(r.matrix.k(), 3);
    }

    #[test]
    fn csv_export() {
        assert_eq!(m(&[&[1, 2], &[3, 4]]).to_csv(), "a\\b,0,1\n0,1,2\n1,3,4\n");
    }
}
