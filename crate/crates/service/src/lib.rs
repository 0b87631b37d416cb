//! JSON-over-HTTP access to live conversation sessions, single-post
//! screening, and the reference registry.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | | `{session_id}` |
//! | GET | `/sessions/{id}` | | session export |
//! | POST | `/sessions/{id}/turns` | `{text}` | turn response |
//! | GET | `/sessions/{id}/profile` | | emotional profile |
//! | GET | `/sessions/{id}/screening` | | screening result |
//! | GET | `/references` | | registry document, `ETag` = version |
//! | PUT | `/references` | registry document | `{version, references, warnings}` |
//! | POST | `/screen` | `{text}` | `{profile, screening}` |
//! | GET | `/vocabulary` | | `{labels, pleasant}` |
//!
//! Screening output is a research signal and not a diagnostic tool.

mod config;
mod error;

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use emoprofile_core::reference::{post_embedding, CorpusPost};
use emoprofile_core::{
    screen, Classifier, Emotion, EmotionalProfile, Registry, ScreeningOptions, ScreeningResult, SessionExport,
    SessionStore, TurnResponse, DISCLAIMER,
};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

pub use config::{ConfigError, ServiceConfig, PORT_ENV, REGISTRY_ENV, SESSION_DIR_ENV};
pub use error::{ApiError, ErrorBody};

/// A registry together with the version handed out as its `ETag`.
#[derive(Debug)]
pub struct RegistrySnapshot {
    pub version: u64,
    pub registry: Registry,
}

struct Inner {
    store: SessionStore,
    classifier: Classifier,
    screening: ScreeningOptions,
    registry: RwLock<Arc<RegistrySnapshot>>,
    swap: Mutex<()>,
    registry_path: Option<PathBuf>,
}

/// Shared handler state; cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(store: SessionStore, classifier: Classifier, registry: Registry, screening: ScreeningOptions) -> Self {
        Self(Arc::new(Inner {
            store,
            classifier,
            screening,
            registry: RwLock::new(Arc::new(RegistrySnapshot { version: 1, registry })),
            swap: Mutex::new(()),
            registry_path: None,
        }))
    }

    /// Builds the state a config describes: backend, registry file and session log.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, emoprofile_core::Error> {
        let classifier = config.backend.connect()?;
        let registry = match &config.registry {
            Some(path) => Registry::load_or_default(path)?,
            None => Registry::default(),
        };
        for w in registry.warnings() {
            log::warn!("{w}");
        }
        let store = match &config.session_dir {
            Some(dir) => SessionStore::open(dir)?,
            None => SessionStore::new(),
        };
        let mut state = Self::new(store, classifier, registry, config.screening);
        Arc::get_mut(&mut state.0)
            .expect("state is not shared yet")
            .registry_path = config.registry.clone();
        Ok(state)
    }

    /// The registry in force right now. Holders keep their snapshot even if it is swapped.
    pub fn registry(&self) -> Arc<RegistrySnapshot> {
        self.0.registry.read().clone()
    }

    pub fn store(&self) -> &SessionStore {
        &self.0.store
    }
}

#[derive(Debug, Deserialize)]
struct TextRequest {
    text: String,
}

#[derive(Debug, Serialize)]
struct Created {
    session_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScreenResponse {
    pub disclaimer: String,
    pub profile: EmotionalProfile,
    pub screening: ScreeningResult,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SwapResponse {
    pub version: u64,
    pub references: usize,
    pub warnings: Vec<String>,
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::unprocessable(format!("invalid JSON body: {e}")))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, emoprofile_core::Error> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn create_session(State(state): State<AppState>) -> Result<(StatusCode, Json<Created>), ApiError> {
    let session_id = state.0.store.create()?;
    Ok((StatusCode::CREATED, Json(Created { session_id })))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionExport>, ApiError> {
    Ok(Json(state.0.store.get(&id)?.export()))
}

async fn post_turn(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<TurnResponse>, ApiError> {
    let request: TextRequest = parse_json(&body)?;
    let registry = state.registry();
    let response = blocking(move || {
        let inner = &state.0;
        inner.store.run_turn(
            &id,
            &request.text,
            &inner.classifier,
            &registry.registry,
            &inner.screening,
        )
    })
    .await?;
    Ok(Json(response))
}

async fn get_profile(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<EmotionalProfile>, ApiError> {
    Ok(Json(state.0.store.get(&id)?.profile()?))
}

async fn get_screening(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ScreeningResult>, ApiError> {
    let session = state.0.store.get(&id)?;
    let profile = session.profile()?;
    let registry = state.registry();
    Ok(Json(screen(
        &profile.distribution,
        &registry.registry,
        &state.0.screening,
    )?))
}

fn etag(version: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{version}\"")).expect("digits are a valid header value")
}

async fn get_references(State(state): State<AppState>) -> Result<impl IntoResponse, ApiError> {
    let snapshot = state.registry();
    let body = snapshot.registry.to_json()?;
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/json")),
            (header::ETAG, etag(snapshot.version)),
        ],
        body,
    ))
}

async fn put_references(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::unprocessable("body is not UTF-8"))?;
    let registry = Registry::from_json(text)?;
    let Some(_guard) = state.0.swap.try_lock() else {
        return Err(ApiError::conflict("another registry swap is in progress"));
    };
    let current = state.registry();
    if let Some(expected) = headers.get(header::IF_MATCH) {
        if expected != etag(current.version) && expected != "*" {
            return Err(ApiError::conflict(format!(
                "registry is at version {}, not {}",
                current.version,
                expected.to_str().unwrap_or("?")
            )));
        }
    }
    if let Some(path) = &state.0.registry_path {
        registry.save(path)?;
    }
    let warnings = registry.warnings();
    let version = current.version + 1;
    let references = registry.len();
    *state.0.registry.write() = Arc::new(RegistrySnapshot { version, registry });
    Ok((
        [(header::ETAG, etag(version))],
        Json(SwapResponse {
            version,
            references,
            warnings,
        }),
    ))
}

async fn post_screen(State(state): State<AppState>, body: Bytes) -> Result<Json<ScreenResponse>, ApiError> {
    let request: TextRequest = parse_json(&body)?;
    let registry = state.registry();
    let response = blocking(move || {
        let post = CorpusPost::new("request", request.text);
        let profile = post_embedding(&post, &state.0.classifier)?;
        let screening = screen(&profile.distribution, &registry.registry, &state.0.screening)?;
        Ok(ScreenResponse {
            disclaimer: DISCLAIMER.to_string(),
            profile,
            screening,
        })
    })
    .await?;
    Ok(Json(response))
}

#[derive(Serialize)]
struct VocabularyResponse {
    labels: Vec<&'static str>,
    pleasant: Vec<&'static str>,
}

async fn vocabulary() -> Json<VocabularyResponse> {
    Json(VocabularyResponse {
        labels: Emotion::all().map(Emotion::label).collect(),
        pleasant: Emotion::all().filter(|e| e.is_pleasant()).map(Emotion::label).collect(),
    })
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/turns", post(post_turn))
        .route("/sessions/{id}/profile", get(get_profile))
        .route("/sessions/{id}/screening", get(get_screening))
        .route("/references", get(get_references).put(put_references))
        .route("/screen", post(post_screen))
        .route("/vocabulary", get(vocabulary))
        .with_state(state)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Setup(#[from] emoprofile_core::Error),
    #[error("cannot serve on {addr}: {source}")]
    Io {
        addr: std::net::SocketAddr,
        source: std::io::Error,
    },
}

/// Serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let state = AppState::from_config(&config)?;
    let io = |source| ServeError::Io {
        addr: config.bind,
        source,
    };
    let listener = tokio::net::TcpListener::bind(config.bind).await.map_err(io)?;
    log::info!("listening on {}", listener.local_addr().map_err(io)?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(io)
}
