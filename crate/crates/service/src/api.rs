use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use dp_planner::release::{
    BudgetMutation, BudgetUpdate, Finalized, ReleaseDocument, RiskSummary, SessionView, WhatIfPayload, WhatIfRequest,
};
use dp_planner::SCHEMA_VERSION;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::store::{CreateSession, DatasetRecord, Store, StoreError};

type ApiResult<T> = Result<T, ApiError>;
type Body<T> = Result<Json<T>, JsonRejection>;

/// Request body for `POST /datasets`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestRequest {
    pub csv: String,
    /// Column name → `{type, is_phi, is_identifier}`.
    pub schema: serde_json::Value,
    #[serde(default = "default_source")]
    pub source: String,
}

fn default_source() -> String {
    "upload".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub schema_version: u32,
    pub status: String,
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/datasets", post(ingest))
        .route("/datasets/{id}", get(dataset))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session))
        .route("/sessions/{id}/whatif", post(whatif))
        .route("/sessions/{id}/budget", patch(budget))
        .route("/sessions/{id}/release", post(finalize).get(release))
        .route("/sessions/{id}/risk-curve", get(risk_curve))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(store)
}

/// Run CPU-heavy store work off the async executor.
async fn blocking<T, F>(store: Arc<Store>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Store) -> Result<T, StoreError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn health() -> Json<Health> {
    Json(Health {
        schema_version: SCHEMA_VERSION,
        status: "ok".into(),
    })
}

async fn ingest(State(store): State<Arc<Store>>, body: Body<IngestRequest>) -> ApiResult<(StatusCode, Json<DatasetRecord>)> {
    let Json(req) = body?;
    let schema = req.schema.to_string();
    let record = blocking(store, move |s| s.ingest(req.csv.as_bytes(), &schema, &req.source)).await?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn dataset(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Json<DatasetRecord>> {
    Ok(Json(store.dataset_record(&id)?))
}

async fn create_session(
    State(store): State<Arc<Store>>,
    body: Body<CreateSession>,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let Json(req) = body?;
    let view = blocking(store, move |s| s.create_session(req)).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn session(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    Ok(Json(store.view(&id)?))
}

async fn whatif(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Body<WhatIfRequest>,
) -> ApiResult<Json<WhatIfPayload>> {
    let Json(req) = body?;
    Ok(Json(blocking(store, move |s| s.whatif(&id, &req)).await?))
}

async fn budget(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Body<BudgetMutation>,
) -> ApiResult<Json<BudgetUpdate>> {
    let Json(m) = body?;
    Ok(Json(blocking(store, move |s| s.update_budget(&id, &m)).await?))
}

async fn finalize(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<(StatusCode, Json<Finalized>)> {
    let out = blocking(store, move |s| s.finalize(&id)).await?;
    let status = if out.idempotent_replay { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(out)))
}

async fn release(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Json<ReleaseDocument>> {
    Ok(Json(store.release(&id)?))
}

async fn risk_curve(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Json<RiskSummary>> {
    Ok(Json(store.risk(&id)?))
}
