use std::path::PathBuf;
use std::sync::MutexGuard;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use evcoref_core::scorers::ScorerSpec;
use evcoref_core::{Decision, DecisionKind, Mention, ScorerKind, TopicLevel};
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::session::{CorpusInput, Session, SessionConfig, SessionError};
use crate::AppState;

pub fn router(state: AppState) -> Router {
    let origin = match &state.config().cors_origin {
        Some(o) => match HeaderValue::from_str(o) {
            Ok(v) => AllowOrigin::exact(v),
            Err(_) => {
                log::warn!("ignoring unusable CORS origin `{o}`");
                AllowOrigin::any()
            }
        },
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(summary))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/decision", post(decision))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/metrics", get(metrics))
        .layer(cors)
        .with_state(state)
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::Conflict(_) => StatusCode::CONFLICT,
            SessionError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Storage(_) | SessionError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            log::error!("{e}");
        }
        ApiError(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::UNPROCESSABLE_ENTITY, msg.into())
}

fn lock(session: &std::sync::Mutex<Session>) -> MutexGuard<'_, Session> {
    // A panic mid-request leaves the in-memory state suspect, but the log
    // on disk is still authoritative for the next restart.
    session.lock().unwrap_or_else(|p| p.into_inner())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    corpus_path: Option<PathBuf>,
    corpus: Option<Vec<Mention>>,
    scorer: Option<ScorerKind>,
    k: Option<f64>,
    lambda: Option<f64>,
    seed: Option<u64>,
    matrix: Option<PathBuf>,
    context_matrix: Option<PathBuf>,
    default_score: Option<f64>,
    topic_level: Option<TopicLevel>,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let body: CreateBody = if body.iter().all(u8::is_ascii_whitespace) {
        serde_json::from_str("{}").expect("empty object parses")
    } else {
        serde_json::from_slice(&body).map_err(|e| invalid(format!("invalid body: {e}")))?
    };
    let defaults = &state.config().defaults;
    let corpus = match (body.corpus_path, body.corpus) {
        (Some(_), Some(_)) => return Err(invalid("give either corpus_path or corpus, not both")),
        (Some(path), None) => CorpusInput::Path(path),
        (None, Some(mentions)) => CorpusInput::Inline(mentions),
        (None, None) => match &defaults.corpus_path {
            Some(path) => CorpusInput::Path(path.clone()),
            None => return Err(invalid("no corpus given and the server has no default corpus")),
        },
    };
    // Scorer fields only inherit server defaults when the scorer kind does.
    let scorer = match body.scorer {
        Some(kind) if kind != defaults.scorer.kind => ScorerSpec {
            kind,
            lambda: body.lambda.unwrap_or(evcoref_core::scorers::DEFAULT_LAMBDA),
            matrix: body.matrix,
            context_matrix: body.context_matrix,
            default_score: body.default_score,
        },
        _ => ScorerSpec {
            kind: defaults.scorer.kind,
            lambda: body.lambda.unwrap_or(defaults.scorer.lambda),
            matrix: body.matrix.or_else(|| defaults.scorer.matrix.clone()),
            context_matrix: body.context_matrix.or_else(|| defaults.scorer.context_matrix.clone()),
            default_score: body.default_score.or(defaults.scorer.default_score),
        },
    };
    let config = SessionConfig {
        scorer,
        k: body.k.unwrap_or(defaults.k),
        seed: body.seed.unwrap_or(defaults.seed),
        topic_level: body.topic_level.unwrap_or(defaults.topic_level),
    };
    let creating = state.clone();
    let session = tokio::task::spawn_blocking(move || creating.create_session(corpus, config))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let s = lock(&session);
    Ok((
        StatusCode::CREATED,
        Json(json!({ "session_id": s.id(), "total": s.manifest().mentions })),
    )
        .into_response())
}

async fn summary(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let s = lock(&session);
    Ok(Json(s.summary()).into_response())
}

async fn next(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let mut s = lock(&session);
    Ok(match s.next()? {
        Some(view) => Json(view).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionBody {
    target_id: String,
    kind: String,
    cluster_id: Option<String>,
    reviewed_count: usize,
}

fn parse_decision(body: &[u8]) -> Result<Decision, ApiError> {
    let body: DecisionBody =
        serde_json::from_slice(body).map_err(|e| invalid(format!("invalid body: {e}")))?;
    let kind = match (body.kind.as_str(), body.cluster_id) {
        ("accept", Some(cluster_id)) => DecisionKind::Accept { cluster_id },
        ("accept", None) => return Err(invalid("accept needs a cluster_id")),
        ("new_cluster", None) => DecisionKind::NewCluster,
        ("new_cluster", Some(_)) => return Err(invalid("new_cluster takes no cluster_id")),
        (other, _) => {
            return Err(invalid(format!(
                "kind must be `accept` or `new_cluster`, got `{other}`"
            )))
        }
    };
    Ok(Decision {
        target_id: body.target_id,
        kind,
        reviewed_count: body.reviewed_count,
    })
}

async fn decision(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let decision = parse_decision(&body)?;
    let mut s = lock(&session);
    let outcome = s.submit(decision)?;
    Ok(Json(outcome).into_response())
}

async fn export(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let s = lock(&session);
    Ok(Json(s.export()).into_response())
}

async fn metrics(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let s = lock(&session);
    Ok(Json(s.metrics()).into_response())
}
