use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use emoprofile_core::backend::ScriptedBackend;
use emoprofile_core::reference::{build_reference, BuildOptions, CorpusPost};
use emoprofile_core::{
    BackendConfig, Classifier, Polarity, ReferenceProfile, Registry, ScreeningOptions, SessionStore,
};
use emoprofile_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const GLOOM: [&str; 4] = [
    "I feel so sad and lonely tonight.",
    "Everything is hopeless and I am alone.",
    "I was crying again, so sad and isolated.",
    "So miserable and lonely. Totally heartbroken and sad.",
];
const CHEER: [&str; 4] = [
    "What a joyful and happy day!",
    "I am so grateful and thankful for my friends.",
    "Happy and delighted, thanks to all of you.",
    "Such joy. I appreciate everyone, I am thankful.",
];

fn mock_registry(classifier: &Classifier) -> Registry {
    let corpus = |texts: &[&str]| -> Vec<CorpusPost> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| CorpusPost::new(i.to_string(), *t))
            .collect()
    };
    let opts = BuildOptions::default();
    let gloom = build_reference("suicide", Polarity::Positive, &corpus(&GLOOM), classifier, &opts).unwrap();
    let cheer = build_reference("normal", Polarity::Negative, &corpus(&CHEER), classifier, &opts).unwrap();
    Registry::new(vec![gloom.reference, cheer.reference, ReferenceProfile::uniform()]).unwrap()
}

fn mock_app(seed: u64) -> (AppState, Router) {
    let classifier = BackendConfig::mock(seed).connect().unwrap();
    let registry = mock_registry(&classifier);
    let state = AppState::new(SessionStore::new(), classifier, registry, ScreeningOptions::default());
    (state.clone(), router(state))
}

fn scripted_app(backend: Arc<ScriptedBackend>) -> Router {
    let mock = BackendConfig::mock(0).connect().unwrap();
    let registry = mock_registry(&mock);
    let classifier = Classifier::new(backend, BackendConfig::default()).unwrap();
    router(AppState::new(
        SessionStore::new(),
        classifier,
        registry,
        ScreeningOptions::default(),
    ))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, _, body) = call_raw(app, method, uri, body.map(|b| b.to_string()), None).await;
    (status, serde_json::from_slice(&body).unwrap_or(Value::Null))
}

async fn call_raw(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<String>,
    if_match: Option<&str>,
) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let mut request = Request::builder().method(method).uri(uri);
    if let Some(tag) = if_match {
        request = request.header(header::IF_MATCH, tag);
    }
    let request = match body {
        Some(b) => request
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(b)),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let headers = response.headers().clone();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, bytes)
}

async fn new_session(app: &Router) -> String {
    let (status, body) = call(app, Method::POST, "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    body["session_id"].as_str().unwrap().to_string()
}

fn concert_backend() -> Arc<ScriptedBackend> {
    let backend = Arc::new(ScriptedBackend::new());
    backend.push_emotions(&[("excited", 3), ("anticipating", 7)]);
    backend.push(["What concert was it?"]);
    backend.push_emotions(&[("excited", 8), ("joyful", 1), ("anticipating", 1)]);
    backend.push(["That must have been amazing!"]);
    backend
}

#[tokio::test]
async fn concert_fixture_over_http() {
    let backend = concert_backend();
    backend.push_outage("backend went away");
    let app = scripted_app(backend);
    let id = new_session(&app).await;
    let turns = format!("/sessions/{id}/turns");

    let (status, first) = call(
        &app,
        Method::POST,
        &turns,
        Some(json!({"text": "I couldn't wait to go to the concert."})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{first}");
    assert_eq!(first["predicted_emotion"], "anticipating");
    assert_eq!(first["reply"], "What concert was it?");
    assert_eq!(first["turn_index"], 0);
    assert_eq!(first["emotion_samples"].as_array().unwrap().len(), 10);

    let (_, second) = call(&app, Method::POST, &turns, Some(json!({"text": "The U2 concert."}))).await;
    assert_eq!(second["predicted_emotion"], "excited");
    let profile = second["profile"].as_array().unwrap();
    assert_eq!(profile.len(), 32);
    assert!(second["screening"]["combined_label"].is_string());

    let (_, before) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    let (status, err) = call(&app, Method::POST, &turns, Some(json!({"text": "It was great."}))).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(err["error"], "backend_unavailable");
    let (_, after) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(before, after);
    assert_eq!(after["turns"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn request_errors() {
    let (_, app) = mock_app(1);
    let (status, body) = call(&app, Method::POST, "/sessions/nope/turns", Some(json!({"text": "hi"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_session");
    assert_eq!(
        call(&app, Method::GET, "/sessions/nope", None).await.0,
        StatusCode::NOT_FOUND
    );

    let id = new_session(&app).await;
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/turns"),
        Some(json!({"text": "  "})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "empty_text");
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/turns"),
        Some(json!({"words": "x"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = call(&app, Method::GET, &format!("/sessions/{id}/profile"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "empty_session");
    assert_eq!(
        call(&app, Method::GET, &format!("/sessions/{id}/screening"), None)
            .await
            .0,
        StatusCode::CONFLICT
    );

    let (_, session) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(session["turns"], json!([]));
    assert_ne!(new_session(&app).await, id);
}

#[tokio::test]
async fn profile_and_screening_projections() {
    let (_, app) = mock_app(2);
    let id = new_session(&app).await;
    call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/turns"),
        Some(json!({"text": "I am so sad and lonely."})),
    )
    .await;
    let (status, profile) = call(&app, Method::GET, &format!("/sessions/{id}/profile"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(profile["prompt_count"], 1);
    let total: f64 = profile["distribution"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
    let (status, screening) = call(&app, Method::GET, &format!("/sessions/{id}/screening"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(screening["combined_label"], "positive");
    assert_eq!(screening["per_metric"]["js"]["nearest"], "suicide");
}

#[tokio::test]
async fn stateless_screening() {
    let (_, app) = mock_app(3);
    let (status, body) = call(
        &app,
        Method::POST,
        "/screen",
        Some(json!({"text": "I am sad. Lonely and miserable, always alone."})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["screening"]["combined_label"], "positive");
    assert!(body["disclaimer"].as_str().unwrap().contains("Not a diagnostic tool"));
    let (_, body) = call(
        &app,
        Method::POST,
        "/screen",
        Some(json!({"text": "So happy and grateful. Thanks, what joy!"})),
    )
    .await;
    assert_eq!(body["screening"]["combined_label"], "negative");
    let (status, _) = call(&app, Method::POST, "/screen", Some(json!({"text": ""}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn registry_swaps() {
    let (state, app) = mock_app(4);
    let (status, headers, body) = call_raw(&app, Method::GET, "/references", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers[header::ETAG], "\"1\"");
    let document = String::from_utf8(body).unwrap();
    let held = state.registry();

    let mut tampered: Value = serde_json::from_str(&document).unwrap();
    tampered["references"][1]["distribution"][0] = json!(7.0);
    let (status, _, body) = call_raw(&app, Method::PUT, "/references", Some(tampered.to_string()), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let err: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(err["error"], "schema_violation");
    assert_eq!(err["path"], "references[1].distribution");

    let (status, _, _) = call_raw(&app, Method::PUT, "/references", Some(document.clone()), Some("\"9\"")).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let mut smaller: Value = serde_json::from_str(&document).unwrap();
    smaller["references"].as_array_mut().unwrap().pop();
    let (status, headers, body) = call_raw(
        &app,
        Method::PUT,
        "/references",
        Some(smaller.to_string()),
        Some("\"1\""),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers[header::ETAG], "\"2\"");
    let swap: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(swap["references"], 2);

    // a snapshot taken before the swap is unaffected by it
    assert_eq!(held.version, 1);
    assert_eq!(held.registry.len(), 3);
    assert_eq!(state.registry().registry.len(), 2);

    let (_, _, body) = call_raw(
        &app,
        Method::PUT,
        "/references",
        Some(json!({"schema_version": 1}).to_string()),
        None,
    )
    .await;
    let err: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(err["error"], "schema_violation");
}

#[tokio::test]
async fn registry_swap_persists_to_the_configured_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("registry.json");
    let classifier = BackendConfig::mock(0).connect().unwrap();
    mock_registry(&classifier).save(&path).unwrap();
    let config = emoprofile_service::ServiceConfig {
        registry: Some(path.clone()),
        session_dir: Some(dir.path().join("sessions")),
        ..Default::default()
    };
    let state = AppState::from_config(&config).unwrap();
    let app = router(state);
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    doc["references"].as_array_mut().unwrap().pop();
    let (status, _, _) = call_raw(&app, Method::PUT, "/references", Some(doc.to_string()), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(Registry::load(&path).unwrap().len(), 2);

    let id = new_session(&app).await;
    call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/turns"),
        Some(json!({"text": "I am sad."})),
    )
    .await;
    let reopened = router(AppState::from_config(&config).unwrap());
    let (_, session) = call(&reopened, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(session["turns"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn mock_responses_are_reproducible() {
    async fn run(seed: u64) -> Vec<Value> {
        let (_, app) = mock_app(seed);
        let id = new_session(&app).await;
        let mut out = Vec::new();
        for text in [
            "I couldn't wait to go to the concert.",
            "It was thrilling!!!",
            "So excited.",
        ] {
            out.push(
                call(
                    &app,
                    Method::POST,
                    &format!("/sessions/{id}/turns"),
                    Some(json!({ "text": text })),
                )
                .await
                .1,
            );
        }
        out
    }
    assert_eq!(run(9).await, run(9).await);
}

#[tokio::test]
async fn vocabulary_partition() {
    let (_, app) = mock_app(0);
    let (_, body) = call(&app, Method::GET, "/vocabulary", None).await;
    assert_eq!(body["labels"].as_array().unwrap().len(), 32);
    assert_eq!(body["pleasant"].as_array().unwrap().len(), 16);
}
