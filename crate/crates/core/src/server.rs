// SPDX-License-Identifier: Apache-2.0

//! JSON-over-HTTP access to a running scenario session.
//!
//! | route | |
//! |---|---|
//! | `GET /state` | progress plus the current report |
//! | `GET /graph/{replica}` | wire form and DOT rendering |
//! | `GET /conflicts` | pending conflict groups |
//! | `POST /plan` | submit a merge plan, 422 when rejected |
//! | `POST /step` | execute the next scenario event |
//! | `POST /sync?from=a&to=b` | ad hoc sync |

use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::error::Error;
use crate::sim::Session;
use crate::sync::MergePlan;

pub type Shared = Arc<Mutex<Session>>;

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::IllegalPlan(_)
            | Error::ForeignPremise(_)
            | Error::NotInBasis { .. }
            | Error::MissingValue(_)
            | Error::WrongValueType(_)
            | Error::MissingTimestamp
            | Error::UnknownRegister(_)
            | Error::EmptyOperation => StatusCode::UNPROCESSABLE_ENTITY,
            Error::NoPendingConflict(_) => StatusCode::CONFLICT,
            Error::Script(_) | Error::InvalidOpId(_) | Error::UnknownOperation(_) => {
                StatusCode::NOT_FOUND
            }
            Error::Parse(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({"error": self.0.to_string()}))).into_response()
    }
}

type ApiResult = Result<Json<serde_json::Value>, ApiError>;

#[derive(Debug, Deserialize)]
pub struct PlanRequest {
    #[serde(default)]
    pub replica: Option<String>,
    #[serde(flatten)]
    pub plan: MergePlan,
}

#[derive(Debug, Deserialize)]
pub struct SyncQuery {
    pub from: String,
    pub to: String,
}

fn lock(s: &Shared) -> std::sync::MutexGuard<'_, Session> {
    s.lock().unwrap_or_else(|e| e.into_inner())
}

async fn state(State(s): State<Shared>) -> ApiResult {
    let s = lock(&s);
    Ok(Json(json!({
        "cursor": s.cursor(),
        "events": s.scenario().events.len(),
        "done": s.is_done(),
        "replicas": s.replica_names(),
        "registers": s.register_names(),
        "report": s.report()?,
    })))
}

async fn graph(State(s): State<Shared>, Path(replica): Path<String>) -> ApiResult {
    let s = lock(&s);
    let g = s.replica(&replica)?.graph();
    Ok(Json(json!({
        "replica": replica,
        "graph": crate::wire::to_value(g),
        "dot": crate::dot::to_dot(g, &replica),
    })))
}

async fn conflicts(State(s): State<Shared>) -> ApiResult {
    let s = lock(&s);
    Ok(Json(
        serde_json::to_value(s.conflicts()?).expect("conflicts serialize"),
    ))
}

async fn plan(State(s): State<Shared>, body: axum::body::Bytes) -> ApiResult {
    let req: PlanRequest =
        serde_json::from_slice(&body).map_err(|e| Error::Parse(e.to_string()))?;
    let mut s = lock(&s);
    let done = s.submit_plan(req.replica.as_deref(), req.plan)?;
    Ok(Json(json!({
        "resolutions": done,
        "states": s.states()?,
        "conflicts": s.conflicts()?,
    })))
}

async fn step(State(s): State<Shared>) -> ApiResult {
    let mut s = lock(&s);
    let outcome = s.step()?;
    Ok(Json(json!({"outcome": outcome, "done": s.is_done()})))
}

async fn sync(State(s): State<Shared>, Query(q): Query<SyncQuery>) -> ApiResult {
    let mut s = lock(&s);
    let report = s.sync_now(&q.from, &q.to)?;
    Ok(Json(
        json!({"delivered": report.is_some(), "report": report}),
    ))
}

pub fn router(session: Shared) -> Router {
    Router::new()
        .route("/state", get(state))
        .route("/graph/{replica}", get(graph))
        .route("/conflicts", get(conflicts))
        .route("/plan", post(plan))
        .route("/step", post(step))
        .route("/sync", post(sync))
        .with_state(session)
}
