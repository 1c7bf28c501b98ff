//! Shared domain types and the toxicity verdict.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::aggression::AggressionFinding;
use crate::error::DomainError;
use crate::normalize::{self, sentence_ranges, Token};
use crate::Span;

/// Direction-of-intent label: 1 when the text explicitly targets others.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct DiLabel(u8);

impl DiLabel {
    pub const NOT_DIRECTED: DiLabel = DiLabel(0);
    pub const DIRECTED: DiLabel = DiLabel(1);

    pub fn new(value: u8) -> Result<Self, DomainError> {
        match value {
            0 | 1 => Ok(DiLabel(value)),
            _ => Err(DomainError::OutOfDomain { field: "di", value: value.to_string() }),
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_directed(self) -> bool {
        self.0 == 1
    }

    pub fn other(self) -> DiLabel {
        DiLabel(1 - self.0)
    }
}

impl TryFrom<u8> for DiLabel {
    type Error = DomainError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        DiLabel::new(value)
    }
}

impl From<DiLabel> for u8 {
    fn from(label: DiLabel) -> u8 {
        label.0
    }
}

impl fmt::Display for DiLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Aggression level: 0 none, 1 mild, 2 intense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct AgLevel(u8);

impl AgLevel {
    pub const NONE: AgLevel = AgLevel(0);
    pub const MILD: AgLevel = AgLevel(1);
    pub const INTENSE: AgLevel = AgLevel(2);

    pub fn new(value: u8) -> Result<Self, DomainError> {
        match value {
            0..=2 => Ok(AgLevel(value)),
            _ => Err(DomainError::OutOfDomain { field: "ag", value: value.to_string() }),
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Level mapping: 0 at score 0, 1 for 0 < score <= 1, 2 above 1.
    pub fn from_score(score: AggressionScore) -> AgLevel {
        match score.half_points() {
            0 => AgLevel::NONE,
            1 | 2 => AgLevel::MILD,
            _ => AgLevel::INTENSE,
        }
    }
}

impl TryFrom<u8> for AgLevel {
    type Error = DomainError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        AgLevel::new(value)
    }
}

impl From<AgLevel> for u8 {
    fn from(level: AgLevel) -> u8 {
        level.0
    }
}

impl fmt::Display for AgLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Relative aggression score, stored exactly as a count of half points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AggressionScore(u32);

impl AggressionScore {
    pub const ZERO: AggressionScore = AggressionScore(0);
    pub const HALF: AggressionScore = AggressionScore(1);
    pub const ONE: AggressionScore = AggressionScore(2);

    pub fn from_half_points(half_points: u32) -> Self {
        AggressionScore(half_points)
    }

    /// Accepts only finite, non-negative multiples of 0.5.
    pub fn from_f64(value: f64) -> Result<Self, DomainError> {
        let doubled = value * 2.0;
        if !value.is_finite() || value < 0.0 || doubled.fract() != 0.0 || doubled > u32::MAX as f64 {
            return Err(DomainError::OutOfDomain { field: "ag_score", value: value.to_string() });
        }
        Ok(AggressionScore(doubled as u32))
    }

    pub fn half_points(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 2.0
    }
}

impl std::ops::Add for AggressionScore {
    type Output = AggressionScore;
    fn add(self, rhs: Self) -> Self::Output {
        AggressionScore(self.0 + rhs.0)
    }
}

impl std::iter::Sum for AggressionScore {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(AggressionScore::ZERO, |acc, s| acc + s)
    }
}

impl TryFrom<f64> for AggressionScore {
    type Error = DomainError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        AggressionScore::from_f64(value)
    }
}

impl From<AggressionScore> for f64 {
    fn from(score: AggressionScore) -> f64 {
        score.as_f64()
    }
}

impl fmt::Display for AggressionScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.as_f64())
    }
}

/// Toxic iff the text is directed at others and carries some aggression.
pub fn verdict(di: DiLabel, ag: AgLevel) -> bool {
    di.is_directed() && matches!(ag.value(), 1 | 2)
}

/// Externally supplied discourse judgement for a unit (human or LLM tag).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscourseTag {
    pub category: crate::lexicon::ItemCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
}

/// One annotatable text with its normalized tokens.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextUnit {
    id: String,
    raw: String,
    tokens: Vec<Token>,
    source: String,
    discourse_tags: Vec<DiscourseTag>,
}

impl TextUnit {
    pub fn new(id: impl Into<String>, raw: impl Into<String>, source: impl Into<String>) -> Self {
        let raw = raw.into();
        let tokens = normalize::normalize(&raw);
        TextUnit { id: id.into(), raw, tokens, source: source.into(), discourse_tags: Vec::new() }
    }

    pub fn from_bytes(
        id: impl Into<String>,
        raw: &[u8],
        source: impl Into<String>,
    ) -> Result<Self, normalize::NormalizeError> {
        let text = normalize::decode_utf8(raw)?;
        Ok(TextUnit::new(id, text, source))
    }

    /// Attaches discourse tags; spans outside the raw text are rejected.
    pub fn with_discourse_tags(mut self, tags: Vec<DiscourseTag>) -> Result<Self, DomainError> {
        for tag in &tags {
            if let Some(span) = tag.span {
                if span.start > span.end || span.end > self.raw.len() {
                    return Err(DomainError::SpanOutOfBounds { span, len: self.raw.len() });
                }
            }
        }
        self.discourse_tags = tags;
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn discourse_tags(&self) -> &[DiscourseTag] {
        &self.discourse_tags
    }

    /// Token index ranges of the unit's sentences.
    pub fn sentences(&self) -> Vec<std::ops::Range<usize>> {
        sentence_ranges(&self.raw, &self.tokens)
    }

    /// Original (un-folded) text of a token.
    pub fn surface(&self, token: &Token) -> &str {
        &self.raw[token.span.start..token.span.end]
    }
}

/// Who produced an annotation: a human id, an LLM fingerprint or the rule engine.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnnotatorId(String);

impl AnnotatorId {
    pub fn new(id: impl Into<String>) -> Self {
        AnnotatorId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AnnotatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AnnotatorId {
    fn from(s: &str) -> Self {
        AnnotatorId(s.to_owned())
    }
}

/// Descriptive records carry only a toxicity judgement; prescriptive ones carry DI and AG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationMode {
    Descriptive,
    Prescriptive,
}

impl fmt::Display for AnnotationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnnotationMode::Descriptive => "descriptive",
            AnnotationMode::Prescriptive => "prescriptive",
        })
    }
}

/// One annotator's judgement of one unit.
///
/// Invariants are checked in every constructor and on deserialization:
/// the toxicity flag always equals the verdict of `di` and `ag`, `ag`
/// always equals the level mapping of `ag_score`, and `di_alternates`
/// never contains `di`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RecordFields")]
pub struct AnnotationRecord {
    unit_id: String,
    annotator: AnnotatorId,
    mode: AnnotationMode,
    di: Option<DiLabel>,
    di_alternates: BTreeSet<DiLabel>,
    ag: Option<AgLevel>,
    ag_score: Option<AggressionScore>,
    findings: Vec<AggressionFinding>,
    toxic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    notes: Option<String>,
    created_at: DateTime<Utc>,
}

#[derive(Deserialize)]
struct RecordFields {
    unit_id: String,
    annotator: AnnotatorId,
    mode: AnnotationMode,
    di: Option<DiLabel>,
    #[serde(default)]
    di_alternates: BTreeSet<DiLabel>,
    ag: Option<AgLevel>,
    ag_score: Option<AggressionScore>,
    #[serde(default)]
    findings: Vec<AggressionFinding>,
    toxic: bool,
    #[serde(default)]
    notes: Option<String>,
    created_at: DateTime<Utc>,
}

impl TryFrom<RecordFields> for AnnotationRecord {
    type Error = DomainError;

    fn try_from(f: RecordFields) -> Result<Self, Self::Error> {
        let record = match f.mode {
            AnnotationMode::Prescriptive => {
                let (Some(di), Some(ag), Some(score)) = (f.di, f.ag, f.ag_score) else {
                    return Err(DomainError::Inconsistent("prescriptive record requires di, ag and ag_score".into()));
                };
                if AgLevel::from_score(score) != ag {
                    return Err(DomainError::Inconsistent(format!(
                        "ag {ag} does not match level mapping of score {score}"
                    )));
                }
                if f.toxic != verdict(di, ag) {
                    return Err(DomainError::Inconsistent(format!(
                        "toxic={} contradicts verdict(di={di}, ag={ag})",
                        f.toxic
                    )));
                }
                AnnotationRecord::prescriptive(
                    f.unit_id,
                    f.annotator,
                    di,
                    f.di_alternates,
                    score,
                    f.findings,
                    f.created_at,
                )?
            }
            AnnotationMode::Descriptive => {
                if f.di.is_some() || f.ag.is_some() || f.ag_score.is_some() || !f.di_alternates.is_empty() {
                    return Err(DomainError::Inconsistent("descriptive record must not carry di/ag labels".into()));
                }
                AnnotationRecord::descriptive(f.unit_id, f.annotator, f.toxic, f.created_at)
            }
        };
        Ok(record.with_notes(f.notes))
    }
}

impl AnnotationRecord {
    /// Builds a prescriptive record; level and toxicity are derived, never supplied.
    pub fn prescriptive(
        unit_id: impl Into<String>,
        annotator: AnnotatorId,
        di: DiLabel,
        di_alternates: BTreeSet<DiLabel>,
        ag_score: AggressionScore,
        findings: Vec<AggressionFinding>,
        created_at: DateTime<Utc>,
    ) -> Result<Self, DomainError> {
        if di_alternates.contains(&di) {
            return Err(DomainError::Inconsistent(format!("di_alternates contains the primary label {di}")));
        }
        let ag = AgLevel::from_score(ag_score);
        Ok(AnnotationRecord {
            unit_id: unit_id.into(),
            annotator,
            mode: AnnotationMode::Prescriptive,
            di: Some(di),
            di_alternates,
            ag: Some(ag),
            ag_score: Some(ag_score),
            findings,
            toxic: verdict(di, ag),
            notes: None,
            created_at,
        })
    }

    pub fn descriptive(
        unit_id: impl Into<String>,
        annotator: AnnotatorId,
        toxic: bool,
        created_at: DateTime<Utc>,
    ) -> Self {
        AnnotationRecord {
            unit_id: unit_id.into(),
            annotator,
            mode: AnnotationMode::Descriptive,
            di: None,
            di_alternates: BTreeSet::new(),
            ag: None,
            ag_score: None,
            findings: Vec::new(),
            toxic,
            notes: None,
            created_at,
        }
    }

    pub fn with_notes(mut self, notes: Option<String>) -> Self {
        self.notes = notes.filter(|n| !n.is_empty());
        self
    }

    pub fn unit_id(&self) -> &str {
        &self.unit_id
    }

    pub fn annotator(&self) -> &AnnotatorId {
        &self.annotator
    }

    pub fn mode(&self) -> AnnotationMode {
        self.mode
    }

    pub fn di(&self) -> Option<DiLabel> {
        self.di
    }

    pub fn di_alternates(&self) -> &BTreeSet<DiLabel> {
        &self.di_alternates
    }

    pub fn ag(&self) -> Option<AgLevel> {
        self.ag
    }

    pub fn ag_score(&self) -> Option<AggressionScore> {
        self.ag_score
    }

    pub fn findings(&self) -> &[AggressionFinding] {
        &self.findings
    }

    pub fn toxic(&self) -> bool {
        self.toxic
    }

    pub fn notes(&self) -> Option<&str> {
        self.notes.as_deref()
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }
}
