use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, TimeZone, Utc};
use prescribe_core::{Engine, TextUnit};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::ChatRequest;
use crate::template::PromptKind;

pub const API_KEY_ENV: &str = "PRESCRIBE_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub text: String,
    pub received_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("request failed: {0}")]
    Network(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response body: {0}")]
    Body(String),
    #[error("environment variable {API_KEY_ENV} is not set")]
    MissingApiKey,
    #[error("no recorded response for request {fingerprint}")]
    NotRecorded { fingerprint: String },
    #[error("recording {path}: {reason}")]
    Recording { path: PathBuf, reason: String },
}

impl TransportError {
    /// Whether retrying the same request may succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Network(_) => true,
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[async_trait]
pub trait Transport: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<Reply, TransportError>;
}

#[async_trait]
impl<T: Transport + ?Sized> Transport for Arc<T> {
    async fn complete(&self, request: &ChatRequest) -> Result<Reply, TransportError> {
        (**self).complete(request).await
    }
}

/// Live chat-completion endpoint (`POST {base_url}/chat/completions`).
#[derive(Debug, Clone)]
pub struct HttpTransport {
    client: reqwest::Client,
    base_url: String,
    api_key: String,
}

impl HttpTransport {
    /// Reads the API key from the environment.
    pub fn from_env(base_url: impl Into<String>, timeout: Duration) -> Result<Self, TransportError> {
        let api_key = std::env::var(API_KEY_ENV).map_err(|_| TransportError::MissingApiKey)?;
        Ok(HttpTransport::new(base_url, api_key, timeout))
    }

    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Self {
        let client = reqwest::Client::builder().timeout(timeout).build().expect("http client");
        HttpTransport { client, base_url: base_url.into().trim_end_matches('/').to_owned(), api_key: api_key.into() }
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

#[async_trait]
impl Transport for HttpTransport {
    async fn complete(&self, request: &ChatRequest) -> Result<Reply, TransportError> {
        let response = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&request.payload)
            .send()
            .await
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = response.status();
        let body = response.text().await.map_err(|e| TransportError::Network(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Status { status: status.as_u16(), body });
        }
        let parsed: CompletionBody = serde_json::from_str(&body).map_err(|e| TransportError::Body(e.to_string()))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| TransportError::Body("no choices[0].message.content".into()))?;
        Ok(Reply { text, received_at: Utc::now() })
    }
}

/// One line of a recording file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedExchange {
    pub fingerprint: String,
    pub kind: PromptKind,
    pub response: String,
    pub recorded_at: DateTime<Utc>,
}

/// Passes requests through and appends every successful exchange to a JSON-lines file.
pub struct RecordingTransport<T> {
    inner: T,
    path: PathBuf,
    file: Mutex<File>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, path: impl AsRef<Path>) -> Result<Self, TransportError> {
        let path = path.as_ref().to_owned();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| TransportError::Recording { path: path.clone(), reason: e.to_string() })?;
        Ok(RecordingTransport { inner, path, file: Mutex::new(file) })
    }
}

#[async_trait]
impl<T: Transport> Transport for RecordingTransport<T> {
    async fn complete(&self, request: &ChatRequest) -> Result<Reply, TransportError> {
        let reply = self.inner.complete(request).await?;
        let exchange = RecordedExchange {
            fingerprint: request.fingerprint(),
            kind: request.kind,
            response: reply.text.clone(),
            recorded_at: reply.received_at,
        };
        let mut line = serde_json::to_vec(&exchange).expect("exchange serializes");
        line.push(b'\n');
        let mut file = self.file.lock().expect("recording lock");
        file.write_all(&line)
            .and_then(|_| file.flush())
            .map_err(|e| TransportError::Recording { path: self.path.clone(), reason: e.to_string() })?;
        Ok(reply)
    }
}

/// Answers only from a recording; unknown requests are errors.
#[derive(Debug, Clone)]
pub struct ReplayTransport {
    exchanges: HashMap<String, RecordedExchange>,
}

impl ReplayTransport {
    /// Loads a recording. For a repeated fingerprint the first exchange is used.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TransportError> {
        let path = path.as_ref();
        let fail = |reason: String| TransportError::Recording { path: path.to_owned(), reason };
        let file = File::open(path).map_err(|e| fail(e.to_string()))?;
        let mut exchanges = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| fail(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let exchange: RecordedExchange =
                serde_json::from_str(&line).map_err(|e| fail(format!("line {}: {e}", i + 1)))?;
            exchanges.entry(exchange.fingerprint.clone()).or_insert(exchange);
        }
        Ok(ReplayTransport { exchanges })
    }

    pub fn len(&self) -> usize {
        self.exchanges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exchanges.is_empty()
    }
}

#[async_trait]
impl Transport for ReplayTransport {
    async fn complete(&self, request: &ChatRequest) -> Result<Reply, TransportError> {
        let fingerprint = request.fingerprint();
        let exchange = self.exchanges.get(&fingerprint).ok_or(TransportError::NotRecorded { fingerprint })?;
        Ok(Reply { text: exchange.response.clone(), received_at: exchange.recorded_at })
    }
}

type Responder = dyn Fn(&ChatRequest) -> Result<String, TransportError> + Send + Sync;

/// Offline transport answering through a closure, with a fixed reply timestamp
/// and optional simulated latency. Counts the requests it receives.
pub struct MockTransport {
    responder: Box<Responder>,
    timestamp: DateTime<Utc>,
    latency: Duration,
    calls: AtomicUsize,
}

impl MockTransport {
    pub fn new(responder: impl Fn(&ChatRequest) -> Result<String, TransportError> + Send + Sync + 'static) -> Self {
        MockTransport {
            responder: Box::new(responder),
            timestamp: Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(),
            latency: Duration::ZERO,
            calls: AtomicUsize::new(0),
        }
    }

    /// Answers the way the rule engine would label each unit.
    pub fn from_engine(engine: Engine, units: &[TextUnit]) -> Self {
        let analyses: HashMap<String, prescribe_core::Analysis> =
            units.iter().map(|u| (u.id().to_owned(), engine.analyze(u))).collect();
        MockTransport::new(move |req| {
            let a = analyses
                .get(&req.unit_id)
                .ok_or_else(|| TransportError::Body(format!("unknown unit {}", req.unit_id)))?;
            Ok(match req.kind {
                PromptKind::Descriptive => format!("toxic: {}", u8::from(a.toxic)),
                PromptKind::PrescriptiveDi => format!("DI: {}", a.di.primary),
                PromptKind::PrescriptiveAgUsage => {
                    let mut cats: Vec<&str> = a.aggression.findings.iter().map(|f| f.category.name()).collect();
                    cats.sort_unstable();
                    cats.dedup();
                    format!("items: [{}]", cats.join(", "))
                }
                PromptKind::PrescriptiveAgScoring => {
                    format!("score: {}\nlevel: {}", a.aggression.score, a.aggression.level)
                }
            })
        })
    }

    pub fn with_timestamp(mut self, timestamp: DateTime<Utc>) -> Self {
        self.timestamp = timestamp;
        self
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl Transport for MockTransport {
    async fn complete(&self, request: &ChatRequest) -> Result<Reply, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if !self.latency.is_zero() {
            tokio::time::sleep(self.latency).await;
        }
        let text = (self.responder)(request)?;
        Ok(Reply { text, received_at: self.timestamp })
    }
}
