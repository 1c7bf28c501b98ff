use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use chrono::{DateTime, TimeZone, Utc};
use prescribe_core::corpus::{AnnotationStore, Corpus};
use prescribe_core::{DiscourseTag, Engine, ItemCategory, Span, TextUnit};
use prescribe_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

const CASE_ONE: &str =
    "And apparently I'm committed to going to a new level since I used the key. Well, FUCK. Curiosity killed the Cat(hy)";

fn corpus() -> Corpus {
    let tagged = TextUnit::new("u3", "how come your people really believe in flat earth?", "test")
        .with_discourse_tags(vec![DiscourseTag { category: ItemCategory::ControversialContent, span: None }])
        .unwrap();
    Corpus::new(vec![
        TextUnit::new("u1", CASE_ONE, "test"),
        TextUnit::new("u2", "you are a bitch and a dumbass", "test"),
        tagged,
    ])
    .unwrap()
}

fn fixed_clock() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap()
}

fn state() -> AppState {
    let config = ServiceConfig::default().with_annotator("alice", "tok-a").with_annotator("bob", "tok-b");
    AppState::new(corpus(), AnnotationStore::in_memory(), Engine::default(), config).with_clock(Arc::new(fixed_clock))
}

async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    token: Option<&str>,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header(header::CONTENT_TYPE, "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn submit(app: &Router, token: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, "/api/annotations", Some(token), Some(body)).await
}

#[tokio::test]
async fn two_noun_findings_store_one_point() {
    let app = router(state(), None);
    let body = json!({
        "unit_id": "u2", "annotator": "alice", "di": 1,
        "ag_findings": [
            {"category": "AggressiveNounDetPhrase", "span": [10, 15]},
            {"category": "AggressiveNounDetPhrase", "span": [22, 29]},
        ],
    });
    let (status, v) = submit(&app, "tok-a", body).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["score"], json!(1.0));
    assert_eq!(v["level"], json!(1));
    assert_eq!(v["toxic"], json!(true));
    assert_eq!(v["revision"], json!(0));
    assert_eq!(v["record"]["unit_id"], json!("u2"));
}

#[tokio::test]
async fn catalyzers_alone_store_zero() {
    let app = router(state(), None);
    let body = json!({
        "unit_id": "u3", "annotator": "alice", "di": 1,
        "ag_findings": [
            {"category": "RhetoricalQuestion"},
            {"category": "AggressiveAdvPhrase", "span": [9, 15]},
            {"category": "IronicExpression"},
        ],
    });
    let (status, v) = submit(&app, "tok-a", body).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["score"], json!(0.0));
    assert_eq!(v["level"], json!(0));
    assert_eq!(v["toxic"], json!(false));
}

#[tokio::test]
async fn level_is_derived_from_submitted_score() {
    let app = router(state(), None);
    let (status, v) =
        submit(&app, "tok-a", json!({"unit_id": "u1", "annotator": "alice", "di": 0, "ag_score": 1.5})).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["level"], json!(2));
    assert_eq!(v["toxic"], json!(false));
}

#[tokio::test]
async fn validation_errors_name_the_field() {
    let app = router(state(), None);
    let cases = [
        (json!({"unit_id": "u1", "annotator": "alice", "di": 2, "ag_score": 0}), "di"),
        (json!({"unit_id": "u1", "annotator": "alice", "di": 1}), "ag_findings"),
        (json!({"unit_id": "u1", "annotator": "alice", "di": 1, "ag_score": 0.7}), "ag_score"),
        (json!({"unit_id": "u1", "annotator": "alice", "di": 1, "ag_score": -1}), "ag_score"),
        (
            json!({"unit_id": "u1", "annotator": "alice", "di": 1, "di_alternates": [1], "ag_score": 0}),
            "di_alternates[0]",
        ),
        (
            json!({"unit_id": "u1", "annotator": "alice", "di": 1, "ag_findings": [{"category": "Sarcasm"}]}),
            "ag_findings[0].category",
        ),
        (
            json!({"unit_id": "u1", "annotator": "alice", "di": 1,
                   "ag_findings": [{"category": "AggressiveVerbPhrase", "span": [5, 9999]}]}),
            "ag_findings[0].span",
        ),
    ];
    for (body, field) in cases {
        let (status, v) = submit(&app, "tok-a", body.clone()).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body} -> {v}");
        assert_eq!(v["field"], json!(field), "{body} -> {v}");
    }
    let (status, v) = call(&app, Method::POST, "/api/annotations", Some("tok-a"), Some(json!({"di": 1}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["field"], json!("body"));
}

#[tokio::test]
async fn auth_is_enforced() {
    let app = router(state(), None);
    let next = "/api/tasks/next?annotator=alice";
    assert_eq!(call(&app, Method::GET, next, None, None).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(call(&app, Method::GET, next, Some("nope"), None).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(call(&app, Method::GET, next, Some("tok-b"), None).await.0, StatusCode::FORBIDDEN);
    let unknown = "/api/tasks/next?annotator=carol";
    assert_eq!(call(&app, Method::GET, unknown, Some("tok-a"), None).await.0, StatusCode::NOT_FOUND);
    let body = json!({"unit_id": "u1", "annotator": "alice", "di": 0, "ag_score": 0});
    assert_eq!(submit(&app, "tok-b", body).await.0, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn assist_suggests_verb_phrase_on_the_expletive() {
    let app = router(state(), None);
    let (status, v) = call(&app, Method::GET, "/api/assist?unit_id=u1", Some("tok-a"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["advisory"], json!(true));
    let start = CASE_ONE.find("FUCK").unwrap();
    let hit = v["findings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f["category"] == json!("AggressiveVerbPhrase") && f["span"] == json!([start, start + 4]));
    assert!(hit, "{v}");
    assert_eq!(v["di"]["primary"], json!(0));
    let (status, _) = call(&app, Method::GET, "/api/assist?unit_id=missing", Some("tok-a"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn tasks_follow_corpus_order_and_finish_with_done() {
    let app = router(state(), None);
    let next = "/api/tasks/next?annotator=alice";
    let (_, first) = call(&app, Method::GET, next, Some("tok-a"), None).await;
    let (_, again) = call(&app, Method::GET, next, Some("tok-a"), None).await;
    assert_eq!(first, again, "task is stable until submitted");
    assert_eq!(first["task"]["unit_id"], json!("u1"));
    assert_eq!(first["progress"], json!({"completed": 0, "total": 3}));

    // bob's work does not advance alice, but is visible in done_by
    submit(&app, "tok-b", json!({"unit_id": "u1", "annotator": "bob", "di": 0, "ag_score": 1})).await;
    let (_, v) = call(&app, Method::GET, next, Some("tok-a"), None).await;
    assert_eq!(v["task"]["unit_id"], json!("u1"));
    assert_eq!(v["task"]["done_by"], json!(["bob"]));

    for id in ["u1", "u2"] {
        let (s, _) = submit(&app, "tok-a", json!({"unit_id": id, "annotator": "alice", "di": 0, "ag_score": 0})).await;
        assert_eq!(s, StatusCode::CREATED);
    }
    let (_, v) = call(&app, Method::GET, next, Some("tok-a"), None).await;
    assert_eq!(v["task"]["unit_id"], json!("u3"));
    assert_eq!(v["task"]["index"], json!(2));
    assert_eq!(v["task"]["discourse_tags"], json!([{"category": "ControversialContent"}]), "tags are passed through");
    submit(&app, "tok-a", json!({"unit_id": "u3", "annotator": "alice", "di": 0, "ag_score": 0})).await;
    let (_, v) = call(&app, Method::GET, next, Some("tok-a"), None).await;
    assert_eq!(v["status"], json!("done"));
    assert_eq!(v["progress"], json!({"completed": 3, "total": 3}));
}

#[tokio::test]
async fn resubmission_is_a_revision() {
    let state = state();
    let app = router(state.clone(), None);
    let body = json!({"unit_id": "u1", "annotator": "alice", "di": 0, "ag_score": 1, "notes": "first"});
    let (_, v) = submit(&app, "tok-a", body).await;
    assert_eq!(v["revision"], json!(0));
    let body = json!({"unit_id": "u1", "annotator": "alice", "di": 1, "ag_score": 1, "notes": "second"});
    let (_, v) = submit(&app, "tok-a", body).await;
    assert_eq!(v["revision"], json!(1));
    assert_eq!(v["toxic"], json!(true));
    let store = state.store().lock().await;
    assert_eq!(store.len(), 2);
    assert_eq!(store.latest_records().len(), 1);
    assert_eq!(store.latest_records()[0].notes(), Some("second"));
}

#[tokio::test]
async fn agreement_reports_or_explains_emptiness() {
    let app = router(state(), None);
    let url = "/api/agreement?pair=alice,bob&kind=toxicity";
    let (status, v) = call(&app, Method::GET, url, Some("tok-a"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], json!("empty"));

    for (who, tok) in [("alice", "tok-a"), ("bob", "tok-b")] {
        for (id, di) in [("u1", 1), ("u2", 1), ("u3", 0)] {
            let body = json!({"unit_id": id, "annotator": who, "di": di, "ag_score": 1});
            assert_eq!(submit(&app, tok, body).await.0, StatusCode::CREATED);
        }
    }
    let (status, v) = call(&app, Method::GET, url, Some("tok-a"), None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["status"], json!("ok"));
    assert_eq!(v["n"], json!(3));
    assert_eq!(v["percent_agreement"], json!(1.0));

    let (status, v) = call(&app, Method::GET, "/api/agreement?pair=alice", Some("tok-a"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["field"], json!("pair"));
    let (status, v) = call(&app, Method::GET, "/api/agreement?pair=alice,bob&kind=xyz", Some("tok-a"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["field"], json!("kind"));
}

#[tokio::test]
async fn codebook_lists_every_category() {
    let app = router(state(), None);
    let (status, v) = call(&app, Method::GET, "/api/codebook", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["categories"].as_array().unwrap().len(), ItemCategory::ALL.len());
}

#[tokio::test]
async fn static_bundle_is_served_as_fallback() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>workbench</p>").unwrap();
    let app = router(state(), Some(dir.path()));
    let resp = app.oneshot(Request::get("/index.html").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    assert_eq!(&bytes[..], b"<p>workbench</p>");
}

#[tokio::test]
async fn file_store_persists_submissions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.jsonl");
    let config = ServiceConfig::default().with_annotator("alice", "tok-a");
    let state = AppState::new(corpus(), AnnotationStore::open(&path).unwrap(), Engine::default(), config)
        .with_clock(Arc::new(fixed_clock));
    let app = router(state, None);
    let body = json!({"unit_id": "u2", "annotator": "alice", "di": 1,
                      "ag_findings": [{"category": "AggressiveNounDetPhrase", "span": [10, 15]}]});
    assert_eq!(submit(&app, "tok-a", body).await.0, StatusCode::CREATED);
    let reopened = AnnotationStore::open_read_only(&path).unwrap();
    let rec = reopened.latest_records()[0];
    assert_eq!(rec.findings()[0].span, Some(Span::new(10, 15)));
}
