//! HTTP API over the session store.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use montage_core::dialog::Turn;
use montage_core::graph::Clip;
use montage_core::session::AssistantResponse;
use montage_core::story::StoryState;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::store::{SessionStore, StoreError};

pub type AppState = Arc<SessionStore>;

pub fn router(store: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/story", get(get_story))
        .route("/sessions/{id}/history", get(get_history))
        .route("/clips/{id}", get(get_clip))
        .with_state(store)
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownSession(id) => {
                ApiError(StatusCode::NOT_FOUND, format!("unknown session {id}"))
            }
            StoreError::UnknownGraph(id) => {
                ApiError(StatusCode::NOT_FOUND, format!("unknown graph {id}"))
            }
            StoreError::Core(e) if e.is_validation() => {
                ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
            }
            StoreError::Core(e) => ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        }
    }
}

/// Refuses to hand out a snapshot that breaks the story invariants.
fn checked(story: &StoryState) -> Result<(), ApiError> {
    story
        .validate()
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

#[derive(Debug, Default, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub graph_id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub graph_id: String,
    pub created_at: u64,
    pub config_digest: String,
}

async fn create_session(
    State(store): State<AppState>,
    body: Option<Json<CreateSession>>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let s = store.create(req.graph_id.as_deref())?;
    Ok((
        StatusCode::CREATED,
        Json(Created {
            session_id: s.session_id,
            graph_id: s.graph.graph_id.clone(),
            created_at: s.created_at,
            config_digest: s.config_digest,
        }),
    ))
}

#[derive(Debug, Deserialize)]
pub struct Message {
    pub text: String,
}

async fn post_message(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Json(msg): Json<Message>,
) -> Result<Json<AssistantResponse>, ApiError> {
    let response = store.message(&id, &msg.text).await?;
    checked(&response.story_snapshot)?;
    Ok(Json(response))
}

async fn get_story(
    State(store): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<StoryState>, ApiError> {
    let story = store.with_session(&id, |s| s.story.clone()).await?;
    checked(&story)?;
    Ok(Json(story))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct History {
    pub session_id: String,
    pub graph_id: String,
    pub turns: Vec<Turn>,
}

async fn get_history(
    State(store): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<History>, ApiError> {
    let history = store
        .with_session(&id, |s| History {
            session_id: s.session_id.clone(),
            graph_id: s.graph.graph_id.clone(),
            turns: s.history.clone(),
        })
        .await?;
    Ok(Json(history))
}

#[derive(Debug, Default, Deserialize)]
pub struct ClipQuery {
    pub graph_id: Option<String>,
}

async fn get_clip(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ClipQuery>,
) -> Result<Json<Clip>, ApiError> {
    let g = store.grounding(q.graph_id.as_deref())?;
    g.graph.clip(&id).cloned().map(Json).ok_or_else(|| {
        ApiError(
            StatusCode::NOT_FOUND,
            format!("unknown clip {id} in graph {}", g.graph.graph_id),
        )
    })
}

async fn delete_session(
    State(store): State<AppState>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    store.delete(&id).await?;
    Ok(StatusCode::NO_CONTENT)
}
