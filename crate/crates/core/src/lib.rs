//! Rule engine for prescriptive offensive-language annotation.
//!
//! A text is toxic iff its direction of intent (DI) is 1 and its aggression
//! level (AG) is 1 or 2. Aggression is scored from lexical, syntactic and
//! discourse items; DI comes from an ordered rule cascade. The crate also
//! carries pairwise agreement statistics and the corpus/annotation store.

use std::fmt;

use serde::{Deserialize, Serialize};

pub mod aggression;
pub mod agreement;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod intent;
pub mod lexicon;
pub mod normalize;
pub mod types;

pub use aggression::{analyze, detect, score, AggressionFinding, AggressionResult, FindingRole};
pub use engine::{Analysis, Engine};
pub use error::DomainError;
pub use intent::{classify_di, DiResult};
pub use lexicon::{ItemCategory, Lexicon, LexiconEntry};
pub use types::{
    verdict, AgLevel, AggressionScore, AnnotationMode, AnnotationRecord, AnnotatorId, DiLabel, DiscourseTag, TextUnit,
};

/// Half-open byte range into a unit's raw text. Serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn cover(a: Span, b: Span) -> Span {
        Span { start: a.start.min(b.start), end: a.end.max(b.end) }
    }
}

impl From<(usize, usize)> for Span {
    fn from((start, end): (usize, usize)) -> Self {
        Span { start, end }
    }
}

impl From<Span> for (usize, usize) {
    fn from(span: Span) -> Self {
        (span.start, span.end)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}
