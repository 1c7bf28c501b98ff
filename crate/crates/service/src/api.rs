use std::collections::BTreeSet;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::{DateTime, Utc};
use prescribe_core::aggression::FindingSource;
use prescribe_core::agreement::{report_pair, AgreementError, LabelKind};
use prescribe_core::corpus::{AnnotationStore, Corpus};
use prescribe_core::lexicon::REFERENCE_EXEMPLARS;
use prescribe_core::{
    score, AggressionFinding, AggressionScore, AnnotationMode, AnnotationRecord, AnnotatorId, DiLabel, Engine,
    ItemCategory, Span, TextUnit,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;

use crate::config::ServiceConfig;

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// Shared, immutable inputs plus the single store writer.
#[derive(Clone)]
pub struct AppState {
    corpus: Arc<Corpus>,
    engine: Engine,
    config: Arc<ServiceConfig>,
    store: Arc<Mutex<AnnotationStore>>,
    clock: Clock,
}

impl AppState {
    pub fn new(corpus: Corpus, store: AnnotationStore, engine: Engine, config: ServiceConfig) -> Self {
        AppState {
            corpus: Arc::new(corpus),
            engine,
            config: Arc::new(config),
            store: Arc::new(Mutex::new(store)),
            clock: Arc::new(Utc::now),
        }
    }

    /// Replaces the timestamp source for stored records.
    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn store(&self) -> &Arc<Mutex<AnnotationStore>> {
        &self.store
    }
}

#[derive(Debug)]
pub enum ApiError {
    Unauthorized(String),
    Forbidden(String),
    NotFound(String),
    Validation { field: String, message: String },
    Internal(String),
}

impl ApiError {
    fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError::Validation { field: field.into(), message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Unauthorized(m) => (StatusCode::UNAUTHORIZED, json!({"error": "unauthorized", "message": m})),
            ApiError::Forbidden(m) => (StatusCode::FORBIDDEN, json!({"error": "forbidden", "message": m})),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({"error": "not_found", "message": m})),
            ApiError::Validation { field, message } => {
                (StatusCode::UNPROCESSABLE_ENTITY, json!({"error": "validation", "field": field, "message": message}))
            }
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "internal", "message": m})),
        };
        (status, Json(body)).into_response()
    }
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ").map(str::trim)
}

/// The annotator owning the request's bearer token.
fn authenticate(state: &AppState, headers: &HeaderMap) -> Result<AnnotatorId, ApiError> {
    let token = bearer(headers).ok_or_else(|| ApiError::Unauthorized("missing bearer token".into()))?;
    state.config.annotator_for(token).ok_or_else(|| ApiError::Unauthorized("unknown token".into()))
}

/// Authenticates and checks the token belongs to `claimed`.
fn authorize(state: &AppState, headers: &HeaderMap, claimed: &str) -> Result<AnnotatorId, ApiError> {
    if !state.config.is_registered(claimed) {
        return Err(ApiError::NotFound(format!("annotator `{claimed}` is not registered")));
    }
    let who = authenticate(state, headers)?;
    if who.as_str() != claimed {
        return Err(ApiError::Forbidden(format!("token does not belong to `{claimed}`")));
    }
    Ok(who)
}

#[derive(Serialize)]
struct Assist {
    advisory: bool,
    findings: Vec<AggressionFinding>,
    score: AggressionScore,
    level: u8,
    di: prescribe_core::DiResult,
}

fn assist_for(engine: &Engine, unit: &TextUnit) -> Assist {
    let a = engine.analyze(unit);
    Assist {
        advisory: true,
        findings: a.aggression.findings,
        score: a.aggression.score,
        level: a.aggression.level.value(),
        di: a.di,
    }
}

#[derive(Deserialize)]
pub struct NextQuery {
    annotator: String,
}

pub async fn next_task(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<NextQuery>,
) -> Result<Json<Value>, ApiError> {
    let who = authorize(&state, &headers, &q.annotator)?;
    let store = state.store.lock().await;
    let total = state.corpus.len();
    let completed =
        state.corpus.units().iter().filter(|u| store.contains(u.id(), &who, AnnotationMode::Prescriptive)).count();
    let progress = json!({"completed": completed, "total": total});
    let next = state
        .corpus
        .units()
        .iter()
        .enumerate()
        .find(|(_, u)| !store.contains(u.id(), &who, AnnotationMode::Prescriptive));
    let Some((index, unit)) = next else {
        return Ok(Json(json!({"status": "done", "progress": progress})));
    };
    let done_by: BTreeSet<String> = store
        .annotators()
        .into_iter()
        .filter(|a| store.contains(unit.id(), a, AnnotationMode::Prescriptive))
        .map(|a| a.to_string())
        .collect();
    Ok(Json(json!({
        "status": "pending",
        "progress": progress,
        "task": {
            "unit_id": unit.id(),
            "index": index,
            "text": unit.raw(),
            "source": unit.source(),
            "discourse_tags": unit.discourse_tags(),
            "done_by": done_by,
            "assist": assist_for(&state.engine, unit),
        }
    })))
}

#[derive(Deserialize)]
pub struct FindingInput {
    category: String,
    #[serde(default)]
    span: Option<(usize, usize)>,
}

#[derive(Deserialize)]
pub struct Submission {
    unit_id: String,
    annotator: String,
    di: Value,
    #[serde(default)]
    di_alternates: Vec<Value>,
    #[serde(default)]
    ag_findings: Option<Vec<FindingInput>>,
    #[serde(default)]
    ag_score: Option<Value>,
    #[serde(default)]
    notes: Option<String>,
}

fn di_label(field: &str, value: &Value) -> Result<DiLabel, ApiError> {
    value
        .as_u64()
        .and_then(|v| u8::try_from(v).ok())
        .and_then(|v| DiLabel::new(v).ok())
        .ok_or_else(|| ApiError::validation(field, format!("must be 0 or 1, got {value}")))
}

pub async fn submit(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Result<Json<Submission>, JsonRejection>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let Json(sub) = body.map_err(|e| ApiError::validation("body", e.body_text()))?;
    let who = authorize(&state, &headers, &sub.annotator)?;
    let unit = state
        .corpus
        .get(&sub.unit_id)
        .ok_or_else(|| ApiError::NotFound(format!("unit `{}` does not exist", sub.unit_id)))?;

    let di = di_label("di", &sub.di)?;
    let mut alternates = BTreeSet::new();
    for (i, v) in sub.di_alternates.iter().enumerate() {
        let alt = di_label(&format!("di_alternates[{i}]"), v)?;
        if alt == di {
            return Err(ApiError::validation(format!("di_alternates[{i}]"), "must differ from di"));
        }
        alternates.insert(alt);
    }

    let (ag_score, findings) = match (&sub.ag_findings, &sub.ag_score) {
        (Some(inputs), _) => {
            let mut findings = Vec::with_capacity(inputs.len());
            for (i, f) in inputs.iter().enumerate() {
                let category: ItemCategory =
                    f.category.parse().map_err(|e: prescribe_core::lexicon::UnknownCategory| {
                        ApiError::validation(format!("ag_findings[{i}].category"), e.to_string())
                    })?;
                let span = match f.span {
                    Some((start, end)) if start >= end || end > unit.raw().len() => {
                        return Err(ApiError::validation(
                            format!("ag_findings[{i}].span"),
                            format!("span {start}..{end} is empty or outside the text (length {})", unit.raw().len()),
                        ))
                    }
                    Some((start, end)) => Some(Span::new(start, end)),
                    None => None,
                };
                findings.push(AggressionFinding::new(category, span, FindingSource::Tag));
            }
            let result = score(&findings);
            (result.score, result.findings)
        }
        (None, Some(v)) => {
            let s = v.as_f64().and_then(|x| AggressionScore::from_f64(x).ok()).ok_or_else(|| {
                ApiError::validation("ag_score", format!("must be a non-negative multiple of 0.5, got {v}"))
            })?;
            (s, Vec::new())
        }
        (None, None) => return Err(ApiError::validation("ag_findings", "either ag_findings or ag_score is required")),
    };

    let record = AnnotationRecord::prescriptive(unit.id(), who, di, alternates, ag_score, findings, (state.clock)())
        .map_err(|e| ApiError::validation("record", e.to_string()))?
        .with_notes(sub.notes);
    let mut store = state.store.lock().await;
    let stored = store.append(record).map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "record": stored.record,
            "seq": stored.seq,
            "revision": stored.revision,
            "is_revision": stored.revision > 0,
            "score": stored.record.ag_score(),
            "level": stored.record.ag().map(|l| l.value()),
            "toxic": stored.record.toxic(),
        })),
    ))
}

#[derive(Deserialize)]
pub struct AssistQuery {
    unit_id: String,
}

pub async fn assist(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<AssistQuery>,
) -> Result<Json<Value>, ApiError> {
    authenticate(&state, &headers)?;
    let unit = state
        .corpus
        .get(&q.unit_id)
        .ok_or_else(|| ApiError::NotFound(format!("unit `{}` does not exist", q.unit_id)))?;
    let mut body = serde_json::to_value(assist_for(&state.engine, unit)).expect("assist serializes");
    body["unit_id"] = json!(unit.id());
    Ok(Json(body))
}

#[derive(Deserialize)]
pub struct AgreementQuery {
    pair: String,
    #[serde(default)]
    kind: Option<String>,
}

pub async fn agreement(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<AgreementQuery>,
) -> Result<Json<Value>, ApiError> {
    authenticate(&state, &headers)?;
    let (a, b) = q
        .pair
        .split_once(',')
        .map(|(a, b)| (a.trim(), b.trim()))
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| ApiError::validation("pair", "expected two annotator ids separated by a comma"))?;
    let kind: LabelKind = match &q.kind {
        Some(k) => k.parse().map_err(|e: String| ApiError::validation("kind", e))?,
        None => LabelKind::Toxicity,
    };
    let store = state.store.lock().await;
    let records_a = store.records_for(&AnnotatorId::new(a), Some(AnnotationMode::Prescriptive));
    let records_b = store.records_for(&AnnotatorId::new(b), Some(AnnotationMode::Prescriptive));
    drop(store);
    let empty = |reason: String| Json(json!({"status": "empty", "pair": [a, b], "kind": kind, "reason": reason}));
    if records_a.is_empty() || records_b.is_empty() {
        let missing = if records_a.is_empty() { a } else { b };
        return Ok(empty(format!("`{missing}` has no annotations yet")));
    }
    match report_pair(&records_a, &records_b, kind) {
        Ok(report) => {
            let mut body = serde_json::to_value(&report).expect("report serializes");
            body["status"] = json!("ok");
            Ok(Json(body))
        }
        Err(e @ AgreementError::NoAlignedPairs { .. }) => Ok(empty(e.to_string())),
        Err(e) => Err(ApiError::Internal(e.to_string())),
    }
}

/// Category taxonomy and reference exemplars for the annotation UI.
pub async fn codebook() -> Json<Value> {
    let categories: Vec<Value> = ItemCategory::ALL
        .iter()
        .map(|c| {
            let exemplars: Vec<&str> =
                REFERENCE_EXEMPLARS.iter().filter(|(e, _)| e == c).map(|(_, text)| *text).collect();
            json!({
                "name": c.name(),
                "kind": format!("{:?}", c.kind()),
                "level": format!("{:?}", c.level()),
                "exemplars": exemplars,
            })
        })
        .collect();
    Json(json!({"categories": categories}))
}
