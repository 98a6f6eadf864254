//! HTTP backend tests against a local chat-completions mock server.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use latindet_llm::{
    BackendError, Capabilities, ChatBackend, ChatRequest, EndpointConfig, GenerationParams,
    HttpChatBackend, RetryPolicy,
};

#[derive(Clone, Default)]
struct ServerState {
    hits: Arc<AtomicU32>,
    fail_first: Arc<AtomicU32>,
    last_body: Arc<Mutex<Option<Value>>>,
}

async fn completions(
    State(state): State<ServerState>,
    Json(body): Json<Value>,
) -> (axum::http::StatusCode, Json<Value>) {
    state.hits.fetch_add(1, Ordering::SeqCst);
    *state.last_body.lock().unwrap() = Some(body);
    let failing = state
        .fail_first
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok();
    if failing {
        return (
            axum::http::StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({"error": "warming up"})),
        );
    }
    (
        axum::http::StatusCode::OK,
        Json(json!({
            "choices": [{"message": {"role": "assistant", "content": "[\"lex scripta\"]"}}],
            "usage": {"prompt_tokens": 17, "completion_tokens": 5}
        })),
    )
}

async fn start_server(fail_first: u32) -> (SocketAddr, ServerState) {
    let state = ServerState::default();
    state.fail_first.store(fail_first, Ordering::SeqCst);
    let app = Router::new()
        .route("/v1/chat/completions", post(completions))
        .with_state(state.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    (addr, state)
}

fn config(addr: SocketAddr) -> EndpointConfig {
    EndpointConfig {
        base_url: format!("http://{addr}/v1"),
        model: "test-model".to_string(),
        credential_env: None,
        capabilities: Capabilities {
            vision: false,
            reasoning: true,
        },
        timeout_secs: 5,
    }
}

#[tokio::test]
async fn completes_and_reads_usage() {
    let (addr, state) = start_server(0).await;
    let backend = HttpChatBackend::new(config(addr)).unwrap();
    let response = backend
        .complete(&ChatRequest::user("salve", GenerationParams::default()))
        .await
        .unwrap();
    assert_eq!(response.content, "[\"lex scripta\"]");
    assert_eq!(response.prompt_tokens, Some(17));
    assert_eq!(response.completion_tokens, Some(5));

    let body = state.last_body.lock().unwrap().clone().unwrap();
    assert_eq!(body["model"], json!("test-model"));
    assert_eq!(body["temperature"], json!(0.0));
    assert_eq!(body["seed"], json!(42));
    assert_eq!(body["max_tokens"], json!(20000));
    // reasoning capability declared → budget forwarded
    assert_eq!(body["thinking_budget"], json!(15000));
    assert_eq!(body["messages"][0]["content"], json!("salve"));
}

#[tokio::test]
async fn server_errors_surface_as_transient() {
    let (addr, _state) = start_server(99).await;
    let backend = HttpChatBackend::new(config(addr)).unwrap();
    let err = backend
        .complete(&ChatRequest::user("salve", GenerationParams::default()))
        .await
        .unwrap_err();
    assert!(err.is_transient(), "{err}");
}

#[tokio::test]
async fn batch_retry_recovers_from_transient_server_failure() {
    use latindet_core::corpus::{Corpus, GtSegment, Page};
    use latindet_llm::{run_batch, BatchOptions, PromptMode, PromptVariant};

    let (addr, state) = start_server(1).await;
    let backend = HttpChatBackend::new(config(addr)).unwrap();
    let corpus = Corpus::new(vec![Page {
        page_id: "p1".to_string(),
        book_id: "b".to_string(),
        image_ref: None,
        ocr_text: "lex scripta manet".to_string(),
        corrected_text: None,
        gt_segments: vec![GtSegment::new("lex scripta")],
        gt_has_latin: true,
        excluded: false,
    }])
    .unwrap();
    let records = run_batch(
        &backend,
        &corpus,
        PromptMode::TextOnly,
        PromptVariant::Minimal,
        GenerationParams::default(),
        &BatchOptions {
            concurrency: 1,
            retry: RetryPolicy {
                max_attempts: 3,
                initial_backoff_ms: 1,
                backoff_multiplier: 2.0,
            },
        },
    )
    .await
    .unwrap();
    assert_eq!(records[0].retries, 1);
    assert_eq!(
        records[0].parsed.segments().unwrap(),
        &vec!["lex scripta".to_string()]
    );
    assert_eq!(state.hits.load(Ordering::SeqCst), 2);
}

#[tokio::test]
async fn missing_credential_is_an_auth_error() {
    let (addr, _state) = start_server(0).await;
    let mut cfg = config(addr);
    cfg.credential_env = Some("LATINDET_HTTP_TEST_NO_SUCH_VAR".to_string());
    let backend = HttpChatBackend::new(cfg).unwrap();
    let err = backend
        .complete(&ChatRequest::user("salve", GenerationParams::default()))
        .await
        .unwrap_err();
    assert!(matches!(err, BackendError::Auth(_)));
}
