//! HTTP routes for sessions.
//!
//! | method | path                    | body            |
//! |--------|-------------------------|-----------------|
//! | POST   | `/sessions`             | create request  |
//! | POST   | `/sessions/{id}/actions`| action request  |
//! | GET    | `/sessions/{id}`        |                 |
//! | POST   | `/sessions/{id}/finish` |                 |

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::Value;

use super::wire::{self, ActionRequest, CreateRequest};
use super::{baselines, SessionError, SessionStore};

pub struct ApiError(pub SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

fn status_of(e: &SessionError) -> StatusCode {
    match e {
        SessionError::UnknownWorldSpec(_)
        | SessionError::InvalidConfig(_)
        | SessionError::BadRequest(_)
        | SessionError::ActionOutOfRange { .. } => StatusCode::BAD_REQUEST,
        SessionError::SessionNotFound(_) => StatusCode::NOT_FOUND,
        SessionError::SessionFinished | SessionError::StepConflict { .. } => StatusCode::CONFLICT,
        SessionError::WorldFailure(_) | SessionError::Journal(_) => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (status_of(&self.0), Json(wire::error_json(&self.0))).into_response()
    }
}

type ApiResult = Result<(StatusCode, Json<Value>), ApiError>;

fn parse_body(body: &Bytes) -> Result<Value, SessionError> {
    if body.is_empty() {
        return Ok(Value::Object(Default::default()));
    }
    serde_json::from_slice(body).map_err(|e| SessionError::BadRequest(format!("invalid JSON: {e}")))
}

async fn create(State(store): State<Arc<SessionStore>>, body: Bytes) -> ApiResult {
    let request = CreateRequest::from_json(&parse_body(&body)?)?;
    let session = store.create(request)?;
    let s = session.lock().unwrap();
    Ok((StatusCode::CREATED, Json(wire::summary_json(&s))))
}

async fn act(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult {
    let session = store.get(&id)?;
    let request = ActionRequest::from_json(&parse_body(&body)?)?;
    let mut s = session.lock().unwrap();
    let applied = s.act(request.action, request.step)?;
    Ok((StatusCode::OK, Json(wire::step_json(&s, &applied))))
}

async fn state(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult {
    let session = store.get(&id)?;
    let s = session.lock().unwrap();
    Ok((StatusCode::OK, Json(wire::state_json(&s))))
}

async fn finish(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult {
    let session = store.get(&id)?;
    let request = {
        let mut s = session.lock().unwrap();
        s.finish()?;
        s.request.clone()
    };
    // Baselines replay a whole life; run them off the async workers and
    // without holding the session lock.
    let store2 = store.clone();
    let base = tokio::task::spawn_blocking(move || baselines(&request, store2.suite()))
        .await
        .map_err(|e| SessionError::WorldFailure(e.to_string()))??;
    let s = session.lock().unwrap();
    Ok((StatusCode::OK, Json(wire::finish_json(&s, &base))))
}

async fn not_found() -> (StatusCode, Json<Value>) {
    (
        StatusCode::NOT_FOUND,
        Json(serde_json::json!({
            "schema": wire::SCHEMA,
            "code": "route_not_found",
            "message": "no such route",
        })),
    )
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(state))
        .route("/sessions/{id}/actions", post(act))
        .route("/sessions/{id}/finish", post(finish))
        .fallback(not_found)
        .with_state(store)
}

/// Serves until the process is stopped.
pub async fn serve(store: Arc<SessionStore>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}
