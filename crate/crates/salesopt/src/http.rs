//! HTTP/JSON API.
//!
//! | method | path                        | body / response                  |
//! |--------|-----------------------------|----------------------------------|
//! | GET    | `/reps/{id}/recommendations` | recommendations in rRank order |
//! | POST   | `/feedback`                 | feedback event → ack             |
//! | POST   | `/runs`                     | serves the next day → run info   |
//! | GET    | `/metrics`                  | metrics snapshot                 |
//! | GET    | `/runs/{id}`                | run info                         |
//!
//! Errors are `{"error": "..."}` with a 400, 404, 409, 415, 422 or 500
//! status.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use salesopt_core::domain::{AccountId, ActionType, Day, FeedbackEvent, FeedbackKind, RepId};

use crate::engine::EngineError;
use crate::service::{Service, ServiceError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackBody {
    pub rep_id: RepId,
    pub account_id: AccountId,
    pub action: ActionType,
    pub feedback: FeedbackKind,
    /// Optional; must agree with `feedback` when present.
    #[serde(default)]
    pub reward: Option<i8>,
    /// Day the recommendation was served.
    pub t: Day,
}

impl FeedbackBody {
    pub fn into_event(self) -> FeedbackEvent {
        let mut e = FeedbackEvent::new(self.rep_id, self.account_id, self.action, self.feedback, self.t);
        if let Some(r) = self.reward {
            e.reward = r;
        }
        e
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

pub enum ApiError {
    Service(ServiceError),
    /// Body or path that does not parse.
    Request(StatusCode, String),
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError::Service(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::Request(e.status(), e.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(e: PathRejection) -> Self {
        ApiError::Request(e.status(), e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = match self {
            ApiError::Service(e) => e,
            ApiError::Request(status, error) => return (status, Json(ErrorBody { error })).into_response(),
        };
        let status = match &e {
            ServiceError::Engine(e) => match e {
                EngineError::UnknownRep(_) | EngineError::UnknownRun(_) => StatusCode::NOT_FOUND,
                EngineError::NoCompletedRun => StatusCode::CONFLICT,
                EngineError::UnknownRecommendation { .. }
                | EngineError::ActionMismatch { .. }
                | EngineError::RewardMismatch { .. } => StatusCode::UNPROCESSABLE_ENTITY,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            },
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{e}");
        }
        (status, Json(ErrorBody { error: e.to_string() })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/reps/{id}/recommendations", get(recommendations))
        .route("/feedback", post(feedback))
        .route("/runs", post(start_run))
        .route("/runs/{id}", get(run_info))
        .route("/metrics", get(metrics))
        .with_state(service)
}

async fn recommendations(State(s): State<Arc<Service>>, id: Result<Path<u32>, PathRejection>) -> ApiResult<Vec<salesopt_core::domain::Recommendation>> {
    let Path(id) = id?;
    Ok(Json(s.serve_recommendations(RepId(id))?))
}

async fn feedback(State(s): State<Arc<Service>>, body: Result<Json<FeedbackBody>, JsonRejection>) -> ApiResult<crate::engine::FeedbackAck> {
    let Json(body) = body?;
    Ok(Json(s.ingest_feedback(body.into_event())?))
}

async fn start_run(State(s): State<Arc<Service>>) -> Result<(StatusCode, Json<crate::engine::RunInfo>), ApiError> {
    let info = tokio::task::spawn_blocking(move || s.run_pipeline())
        .await
        .map_err(|_| ApiError::Service(ServiceError::Poisoned))??;
    Ok((StatusCode::CREATED, Json(info)))
}

async fn run_info(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<crate::engine::RunInfo> {
    Ok(Json(s.run_info(&id)?))
}

async fn metrics(State(s): State<Arc<Service>>) -> ApiResult<crate::engine::MetricsSnapshot> {
    Ok(Json(s.metrics_snapshot()?))
}

/// Serves until Ctrl-C.
pub async fn serve(service: Arc<Service>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
