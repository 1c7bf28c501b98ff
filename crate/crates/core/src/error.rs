use thiserror::Error;

use crate::Span;

/// Violations of a domain type's invariants.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("{field} value {value} is outside its domain")]
    OutOfDomain { field: &'static str, value: String },
    #[error("span {span} lies outside text of {len} bytes")]
    SpanOutOfBounds { span: Span, len: usize },
    #[error("inconsistent record: {0}")]
    Inconsistent(String),
}
