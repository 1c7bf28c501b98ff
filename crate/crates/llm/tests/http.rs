use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use prescribe_core::TextUnit;
use prescribe_llm::{build_prompt, HttpTransport, ModelConfig, PromptKind, TemplateSet, Transport, TransportError};
use serde_json::{json, Value};

#[derive(Clone, Default)]
struct Seen {
    bodies: Arc<Mutex<Vec<Value>>>,
    auth: Arc<Mutex<Vec<String>>>,
}

async fn completions(
    State(seen): State<Seen>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> (StatusCode, Json<Value>) {
    seen.auth.lock().unwrap().push(headers["authorization"].to_str().unwrap().to_owned());
    let last = body["messages"].as_array().unwrap().last().unwrap()["content"].as_str().unwrap().to_owned();
    seen.bodies.lock().unwrap().push(body);
    if last.contains("overload") {
        return (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"error": "busy"})));
    }
    (StatusCode::OK, Json(json!({"choices": [{"message": {"role": "assistant", "content": "toxic: 1"}}]})))
}

async fn serve() -> (String, Seen) {
    let seen = Seen::default();
    let app = Router::new().route("/v1/chat/completions", post(completions)).with_state(seen.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/v1/"), seen)
}

fn request(text: &str) -> prescribe_llm::ChatRequest {
    build_prompt(
        &TextUnit::new("1", text, "t"),
        PromptKind::Descriptive,
        &TemplateSet::default(),
        &ModelConfig::default(),
        None,
    )
    .unwrap()
}

#[tokio::test]
async fn posts_chat_payload_with_bearer_key() {
    let (base, seen) = serve().await;
    let transport = HttpTransport::new(base, "secret", Duration::from_secs(5));
    let req = request("hello");
    let reply = transport.complete(&req).await.unwrap();
    assert_eq!(reply.text, "toxic: 1");
    assert_eq!(seen.auth.lock().unwrap()[0], "Bearer secret");
    assert_eq!(seen.bodies.lock().unwrap()[0], serde_json::to_value(&req.payload).unwrap());
}

#[tokio::test]
async fn server_errors_are_retryable() {
    let (base, _) = serve().await;
    let transport = HttpTransport::new(base, "k", Duration::from_secs(5));
    let err = transport.complete(&request("overload")).await.unwrap_err();
    assert!(matches!(err, TransportError::Status { status: 503, .. }));
    assert!(err.is_retryable());
}

#[tokio::test]
async fn unreachable_endpoint_is_a_network_error() {
    let transport = HttpTransport::new("http://127.0.0.1:9", "k", Duration::from_millis(500));
    let err = transport.complete(&request("x")).await.unwrap_err();
    assert!(matches!(err, TransportError::Network(_)), "{err}");
}
