//! LLM-driven descriptive and prescriptive annotation.
//!
//! Prompts come from editable templates. Prescriptive annotation issues a
//! direction-of-intent prompt, then an aggression-usage prompt, then a
//! scoring prompt fed with the usage answer. The aggression level is always
//! recomputed locally from the returned score. Transports are pluggable so
//! that runs can be recorded and replayed offline.

pub mod annotate;
pub mod parse;
pub mod prompt;
pub mod template;
pub mod transport;

pub use annotate::{
    annotate_batch, BatchOptions, BatchReport, BatchSummary, LlmAnnotator, LlmError, LlmRunRecord, RateLimiter,
    RetryPolicy, RunLog, UnitOutcome, UnitStatus,
};
pub use prompt::{build_prompt, ChatMessage, ChatPayload, ChatRequest, ModelConfig, Role};
pub use template::{FewShot, PromptKind, PromptTemplate, TemplateError, TemplateSet};
pub use transport::{
    HttpTransport, MockTransport, RecordedExchange, RecordingTransport, ReplayTransport, Reply, Transport,
    TransportError, API_KEY_ENV,
};
