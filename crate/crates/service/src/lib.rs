//! HTTP front end for curator sessions.
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | POST | `/datasets` | `IngestRequest` | `DatasetRecord` |
//! | GET | `/datasets/{id}` | | `DatasetRecord` |
//! | POST | `/sessions` | `CreateSession` | `SessionView` |
//! | GET | `/sessions/{id}` | | `SessionView` |
//! | POST | `/sessions/{id}/whatif` | `WhatIfRequest` | `WhatIfPayload` |
//! | PATCH | `/sessions/{id}/budget` | `BudgetMutation` | `BudgetUpdate` |
//! | POST | `/sessions/{id}/release` | | `Finalized` |
//! | GET | `/sessions/{id}/release` | | `ReleaseDocument` |
//! | GET | `/sessions/{id}/risk-curve` | | `RiskSummary` |
//!
//! Errors carry `{code, message, field_path?}`.
//!
//! What-if requests are free: they never debit the budget. A curator who
//! sweeps many ε values before finalizing leaks more than the final ε
//! suggests, and the service leaves that judgement to them.

pub mod api;
pub mod error;
pub mod store;

use std::sync::Arc;

pub use api::router;
pub use error::{ApiError, ErrorBody};
pub use store::{CreateSession, DatasetRecord, Store, StoreError};

/// Serve the API on an already-bound listener until the task is dropped.
pub async fn serve(listener: tokio::net::TcpListener, store: Arc<Store>) -> std::io::Result<()> {
    axum::serve(listener, router(store)).await
}
