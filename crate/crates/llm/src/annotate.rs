use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt};
use prescribe_core::aggression::{resolve_roles, FindingSource};
use prescribe_core::corpus::{AnnotationStore, CorpusError};
use prescribe_core::{AggressionFinding, AnnotationMode, AnnotationRecord, AnnotatorId, ItemCategory, TextUnit};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::time::Instant;

use crate::parse::{self, ParseError, Parsed};
use crate::prompt::{build_prompt, ChatRequest, ModelConfig};
use crate::template::{PromptKind, TemplateError, TemplateSet};
use crate::transport::{Reply, Transport, TransportError};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Store(#[from] CorpusError),
    #[error("cannot write run log {path}: {source}")]
    RunLog {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid batch options: {0}")]
    InvalidOptions(String),
}

/// Everything that happened for one request, including any retries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRunRecord {
    pub unit_id: String,
    pub kind: PromptKind,
    pub fingerprint: String,
    pub model: String,
    pub temperature: f64,
    pub template_hash: String,
    /// True for the follow-up sent after an unreadable answer.
    pub reprompt: bool,
    pub raw_response: Option<String>,
    /// Present iff the response parsed.
    pub parsed: Option<Parsed>,
    pub retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitStatus {
    Annotated,
    /// Transport kept failing after the allowed retries.
    Failed,
    /// The answer could not be read even after a format reminder.
    Unparseable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitOutcome {
    pub unit_id: String,
    pub status: UnitStatus,
    pub record: Option<AnnotationRecord>,
    pub runs: Vec<LlmRunRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 2, initial_backoff: Duration::from_millis(500) }
    }
}

/// Spaces request starts evenly so that no more than `per_minute` begin per minute.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: tokio::sync::Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(per_minute: u32) -> Self {
        assert!(per_minute > 0, "rate limit must be positive");
        RateLimiter { interval: Duration::from_secs(60) / per_minute, next: tokio::sync::Mutex::new(None) }
    }

    pub async fn acquire(&self) {
        let slot = {
            let mut next = self.next.lock().await;
            let now = Instant::now();
            let slot = next.filter(|n| *n > now).unwrap_or(now);
            *next = Some(slot + self.interval);
            slot
        };
        tokio::time::sleep_until(slot).await;
    }
}

fn format_reminder(kind: PromptKind) -> String {
    let form = match kind {
        PromptKind::Descriptive => "toxic: <0 or 1>",
        PromptKind::PrescriptiveDi => "DI: <0 or 1>",
        PromptKind::PrescriptiveAgUsage => "items: [Category, ...]",
        PromptKind::PrescriptiveAgScoring => "score: <number>\nlevel: <0, 1 or 2>",
    };
    format!("Your answer could not be read. Reply again with only:\n{form}")
}

enum StepError {
    Transport(String),
    Unparseable(String),
}

/// Annotates units through a chat-completion transport.
pub struct LlmAnnotator<T> {
    templates: Arc<TemplateSet>,
    model: ModelConfig,
    transport: T,
    retry: RetryPolicy,
}

impl<T: Transport> LlmAnnotator<T> {
    pub fn new(templates: Arc<TemplateSet>, model: ModelConfig, transport: T) -> Self {
        LlmAnnotator { templates, model, transport, retry: RetryPolicy::default() }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    /// `llm:<model>:t<temperature>:<first 8 hex of the template-set hash>`.
    pub fn annotator_id(&self) -> AnnotatorId {
        AnnotatorId::new(format!(
            "llm:{}:t{}:{}",
            self.model.model,
            self.model.temperature,
            &self.templates.hash()[..8]
        ))
    }

    pub async fn annotate_unit(&self, unit: &TextUnit, mode: AnnotationMode) -> Result<UnitOutcome, LlmError> {
        self.annotate_limited(unit, mode, None).await
    }

    async fn annotate_limited(
        &self,
        unit: &TextUnit,
        mode: AnnotationMode,
        limiter: Option<&RateLimiter>,
    ) -> Result<UnitOutcome, LlmError> {
        let mut runs = Vec::new();
        let result = match mode {
            AnnotationMode::Descriptive => self.descriptive(unit, limiter, &mut runs).await?,
            AnnotationMode::Prescriptive => self.prescriptive(unit, limiter, &mut runs).await?,
        };
        let (status, record, error) = match result {
            Ok(record) => (UnitStatus::Annotated, Some(record), None),
            Err(StepError::Transport(e)) => (UnitStatus::Failed, None, Some(e)),
            Err(StepError::Unparseable(e)) => (UnitStatus::Unparseable, None, Some(e)),
        };
        Ok(UnitOutcome { unit_id: unit.id().to_owned(), status, record, runs, error })
    }

    async fn descriptive(
        &self,
        unit: &TextUnit,
        limiter: Option<&RateLimiter>,
        runs: &mut Vec<LlmRunRecord>,
    ) -> Result<Result<AnnotationRecord, StepError>, LlmError> {
        let request = build_prompt(unit, PromptKind::Descriptive, &self.templates, &self.model, None)?;
        let step = self.ask(&request, limiter, runs, |r| parse::parse_toxic(r).map(Parsed::Toxic)).await;
        Ok(step.map(|(parsed, at)| {
            let Parsed::Toxic(toxic) = parsed else { unreachable!("toxic parser") };
            AnnotationRecord::descriptive(unit.id(), self.annotator_id(), toxic, at)
        }))
    }

    async fn prescriptive(
        &self,
        unit: &TextUnit,
        limiter: Option<&RateLimiter>,
        runs: &mut Vec<LlmRunRecord>,
    ) -> Result<Result<AnnotationRecord, StepError>, LlmError> {
        let request = build_prompt(unit, PromptKind::PrescriptiveDi, &self.templates, &self.model, None)?;
        let di = match self.ask(&request, limiter, runs, |r| parse::parse_di(r).map(Parsed::Di)).await {
            Ok((Parsed::Di(di), _)) => di,
            Ok(_) => unreachable!("DI parser"),
            Err(e) => return Ok(Err(e)),
        };

        let request = build_prompt(unit, PromptKind::PrescriptiveAgUsage, &self.templates, &self.model, None)?;
        let items = match self.ask(&request, limiter, runs, |r| parse::parse_items(r).map(Parsed::Items)).await {
            Ok((Parsed::Items(items), _)) => items,
            Ok(_) => unreachable!("items parser"),
            Err(e) => return Ok(Err(e)),
        };

        let listed = format!("[{}]", items.iter().map(|c| c.name()).collect::<Vec<_>>().join(", "));
        let request =
            build_prompt(unit, PromptKind::PrescriptiveAgScoring, &self.templates, &self.model, Some(&listed))?;
        let parse_score =
            |r: &str| parse::parse_score(r).map(|(score, stated_level)| Parsed::Score { score, stated_level });
        let (score, stated_level, at) = match self.ask(&request, limiter, runs, parse_score).await {
            Ok((Parsed::Score { score, stated_level }, at)) => (score, stated_level, at),
            Ok(_) => unreachable!("score parser"),
            Err(e) => return Ok(Err(e)),
        };

        let mut findings: Vec<AggressionFinding> =
            items.iter().map(|&c: &ItemCategory| AggressionFinding::new(c, None, FindingSource::Tag)).collect();
        resolve_roles(&mut findings);
        let record =
            AnnotationRecord::prescriptive(unit.id(), self.annotator_id(), di, Default::default(), score, findings, at)
                .expect("no alternates supplied")
                .with_notes(stated_level.map(|l| format!("model-stated level: {l}")));
        Ok(Ok(record))
    }

    /// Sends a request, retrying transport failures and re-prompting once on an unreadable answer.
    async fn ask(
        &self,
        request: &ChatRequest,
        limiter: Option<&RateLimiter>,
        runs: &mut Vec<LlmRunRecord>,
        parser: impl Fn(&str) -> Result<Parsed, ParseError>,
    ) -> Result<(Parsed, DateTime<Utc>), StepError> {
        let mut current = request.clone();
        for reprompt in [false, true] {
            let (reply, retries) = self.send(&current, limiter).await;
            let mut run = LlmRunRecord {
                unit_id: current.unit_id.clone(),
                kind: current.kind,
                fingerprint: current.fingerprint(),
                model: current.payload.model.clone(),
                temperature: current.payload.temperature,
                template_hash: current.template_hash.clone(),
                reprompt,
                raw_response: None,
                parsed: None,
                retries,
                error: None,
                timestamp: Utc::now(),
            };
            let reply = match reply {
                Ok(reply) => reply,
                Err(e) => {
                    run.error = Some(e.to_string());
                    runs.push(run);
                    return Err(StepError::Transport(format!("{}: {e}", current.kind)));
                }
            };
            run.timestamp = reply.received_at;
            run.raw_response = Some(reply.text.clone());
            match parser(&reply.text) {
                Ok(parsed) => {
                    run.parsed = Some(parsed.clone());
                    runs.push(run);
                    return Ok((parsed, reply.received_at));
                }
                Err(e) => {
                    run.error = Some(e.to_string());
                    runs.push(run);
                    if reprompt {
                        return Err(StepError::Unparseable(format!("{}: {e}", current.kind)));
                    }
                    current = request.with_format_reminder(&reply.text, &format_reminder(request.kind));
                }
            }
        }
        unreachable!("loop returns on its second pass")
    }

    async fn send(&self, request: &ChatRequest, limiter: Option<&RateLimiter>) -> (Result<Reply, TransportError>, u32) {
        let mut retries = 0;
        let mut backoff = self.retry.initial_backoff;
        loop {
            if let Some(limiter) = limiter {
                limiter.acquire().await;
            }
            match self.transport.complete(request).await {
                Err(e) if e.is_retryable() && retries < self.retry.max_retries => {
                    retries += 1;
                    tokio::time::sleep(backoff).await;
                    backoff *= 2;
                }
                result => return (result, retries),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchOptions {
    /// Units in flight at once.
    pub concurrency: usize,
    pub rate_per_minute: Option<u32>,
    /// Largest tolerated share of failed or unparseable units.
    pub max_failure_ratio: f64,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions { concurrency: 4, rate_per_minute: None, max_failure_ratio: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub total: usize,
    /// Units already in the store for this annotator and mode.
    pub skipped: usize,
    pub annotated: usize,
    pub failed: usize,
    pub unparseable: usize,
    /// Requests sent, counting retries.
    pub requests: usize,
    pub failure_ratio: f64,
    pub max_failure_ratio: f64,
}

impl BatchSummary {
    pub fn exceeds_threshold(&self) -> bool {
        self.failure_ratio > self.max_failure_ratio
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub summary: BatchSummary,
    /// Outcomes of processed units, in input order.
    pub outcomes: Vec<UnitOutcome>,
}

impl BatchReport {
    pub fn records(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.outcomes.iter().filter_map(|o| o.record.as_ref())
    }
}

/// Append-only JSON-lines log of [`LlmRunRecord`]s.
pub struct RunLog {
    path: PathBuf,
    file: File,
}

impl RunLog {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref().to_owned();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| LlmError::RunLog { path: path.clone(), source })?;
        Ok(RunLog { path, file })
    }

    pub fn append(&mut self, run: &LlmRunRecord) -> Result<(), LlmError> {
        let mut line = serde_json::to_vec(run).expect("run serializes");
        line.push(b'\n');
        self.file.write_all(&line).map_err(|source| LlmError::RunLog { path: self.path.clone(), source })
    }
}

/// Annotates every unit not yet in `store` for this annotator and mode.
///
/// Requests run concurrently, but outcomes are consumed and persisted in
/// input order by this single task, so the store and run log contents do
/// not depend on completion order.
pub async fn annotate_batch<T: Transport>(
    annotator: &LlmAnnotator<T>,
    units: &[TextUnit],
    mode: AnnotationMode,
    store: &mut AnnotationStore,
    mut run_log: Option<&mut RunLog>,
    options: &BatchOptions,
) -> Result<BatchReport, LlmError> {
    if options.concurrency == 0 {
        return Err(LlmError::InvalidOptions("concurrency must be positive".into()));
    }
    if options.rate_per_minute == Some(0) {
        return Err(LlmError::InvalidOptions("rate limit must be positive".into()));
    }
    if !(0.0..=1.0).contains(&options.max_failure_ratio) {
        return Err(LlmError::InvalidOptions("failure ratio threshold must lie in [0, 1]".into()));
    }
    let limiter = options.rate_per_minute.map(RateLimiter::per_minute);
    let annotator_id = annotator.annotator_id();
    let pending: Vec<&TextUnit> = units.iter().filter(|u| !store.contains(u.id(), &annotator_id, mode)).collect();

    let mut summary = BatchSummary {
        total: units.len(),
        skipped: units.len() - pending.len(),
        annotated: 0,
        failed: 0,
        unparseable: 0,
        requests: 0,
        failure_ratio: 0.0,
        max_failure_ratio: options.max_failure_ratio,
    };
    let mut outcomes = Vec::with_capacity(pending.len());
    let mut results = stream::iter(pending)
        .map(|unit| annotator.annotate_limited(unit, mode, limiter.as_ref()))
        .buffered(options.concurrency);
    while let Some(outcome) = results.next().await {
        let outcome = outcome?;
        if let Some(log) = run_log.as_deref_mut() {
            for run in &outcome.runs {
                log.append(run)?;
            }
        }
        summary.requests += outcome.runs.iter().map(|r| 1 + r.retries as usize).sum::<usize>();
        match outcome.status {
            UnitStatus::Annotated => summary.annotated += 1,
            UnitStatus::Failed => summary.failed += 1,
            UnitStatus::Unparseable => summary.unparseable += 1,
        }
        if let Some(record) = &outcome.record {
            store.append(record.clone())?;
        }
        outcomes.push(outcome);
    }
    let processed = outcomes.len();
    if processed > 0 {
        summary.failure_ratio = (summary.failed + summary.unparseable) as f64 / processed as f64;
    }
    Ok(BatchReport { summary, outcomes })
}
