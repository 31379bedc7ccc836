//! HTTP routes.
//!
//! | method | path                          | success                         |
//! |--------|-------------------------------|---------------------------------|
//! | POST   | `/api/sessions`               | 201 `{session_id, state, cohort}` |
//! | POST   | `/api/sessions/{id}/run`      | 202 `{session_id, state}`       |
//! | GET    | `/api/sessions/{id}/results`  | 200 result document, or 202 status while running |
//! | GET    | `/api/cohorts`                | 200 `{cohorts: [...]}`          |
//! | GET    | `/api/schema/report`          | 200 the published JSON schema   |
//!
//! Every error body is `{"error": {"kind", "message", ...details}}`.

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fts_core::cohort::{parse_cohort, CohortError, Provenance};
use fts_core::engine::{run_simulation_with, RunOptions};
use fts_core::svm::TrainConfig;
use fts_core::{Cohort, LabelingPolicy, SessionConfig, TestDirectionConfig, WeightVector};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use tokio::sync::{OwnedSemaphorePermit, Semaphore};

use crate::catalog::Catalog;
use crate::session::{Progress, RunFailure, RunTicket, SessionStore, Snapshot, StoreError, DEFAULT_TTL};

/// The published result schema, served by `GET /api/schema/report`.
pub const REPORT_SCHEMA_JSON: &str = include_str!("../../../docs/simulation_result.schema.json");

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub session_ttl: Duration,
    /// Simulations allowed to run at once.
    pub workers: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            session_ttl: DEFAULT_TTL,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    catalog: Arc<Catalog>,
    sessions: Arc<SessionStore>,
    workers: Arc<Semaphore>,
    worker_count: usize,
}

impl AppState {
    pub fn new(catalog: Catalog, config: &ServiceConfig) -> Self {
        Self {
            catalog: Arc::new(catalog),
            sessions: Arc::new(SessionStore::new(config.session_ttl)),
            workers: Arc::new(Semaphore::new(config.workers.max(1))),
            worker_count: config.workers.max(1),
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    /// Takes every worker slot. Submitted runs stay queued (and their
    /// sessions stay running) until the returned permit is dropped.
    pub async fn hold_workers(&self) -> OwnedSemaphorePermit {
        self.workers
            .clone()
            .acquire_many_owned(self.worker_count as u32)
            .await
            .expect("worker pool is never closed")
    }

    /// Waits until no session is running or `timeout` passes. Returns
    /// whether the store went idle.
    pub async fn drain(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        while self.sessions.running_count() > 0 {
            if Instant::now() >= deadline {
                return false;
            }
            tokio::time::sleep(Duration::from_millis(25)).await;
        }
        true
    }

    /// Evicts expired sessions once a minute until the runtime shuts down.
    pub fn spawn_sweeper(&self) {
        let sessions = self.sessions.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(Duration::from_secs(60));
            loop {
                tick.tick().await;
                let evicted = sessions.evict_expired(Instant::now());
                if evicted > 0 {
                    tracing::debug!(evicted, "expired sessions evicted");
                }
            }
        });
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/run", post(submit_and_run))
        .route("/api/sessions/{id}/results", get(get_results))
        .route("/api/cohorts", get(list_cohorts))
        .route("/api/schema/report", get(report_schema))
        .with_state(state)
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown cohort {0:?}")]
    UnknownCohort(String),
    #[error("invalid cohort: {0}")]
    InvalidCohort(#[from] CohortError),
    #[error("invalid {field}: {message}")]
    InvalidWeights { field: &'static str, message: String },
    #[error("invalid {field}: {message}")]
    InvalidConfig { field: &'static str, message: String },
    #[error("{0}")]
    Conflict(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::UnknownSession(_) | ApiError::UnknownCohort(_) => StatusCode::NOT_FOUND,
            ApiError::InvalidCohort(_) | ApiError::InvalidWeights { .. } | ApiError::InvalidConfig { .. } => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ApiError::Conflict(_) => StatusCode::CONFLICT,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::BadRequest(_) => "BadRequest",
            ApiError::UnknownSession(_) => "UnknownSession",
            ApiError::UnknownCohort(_) => "UnknownCohort",
            ApiError::InvalidCohort(e) => cohort_error_kind(e),
            ApiError::InvalidWeights { .. } => "InvalidWeights",
            ApiError::InvalidConfig { .. } => "InvalidConfig",
            ApiError::Conflict(_) => "Conflict",
        }
    }

    pub fn body(&self) -> Value {
        let mut error = Map::new();
        error.insert("kind".into(), self.kind().into());
        error.insert("message".into(), self.to_string().into());
        match self {
            ApiError::InvalidCohort(e) => {
                for (k, v) in cohort_error_details(e) {
                    error.insert(k.into(), v);
                }
            }
            ApiError::InvalidWeights { field, .. } | ApiError::InvalidConfig { field, .. } => {
                error.insert("field".into(), (*field).into());
            }
            ApiError::UnknownSession(id) => {
                error.insert("session_id".into(), id.clone().into());
            }
            ApiError::UnknownCohort(name) => {
                error.insert("cohort".into(), name.clone().into());
            }
            _ => {}
        }
        json!({ "error": error })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownSession(id) => ApiError::UnknownSession(id),
            StoreError::Conflict { .. } => ApiError::Conflict(e.to_string()),
        }
    }
}

pub fn cohort_error_kind(e: &CohortError) -> &'static str {
    match e {
        CohortError::Io { .. } => "Io",
        CohortError::MissingColumn(_) => "MissingColumn",
        CohortError::UnexpectedColumn(_) => "UnexpectedColumn",
        CohortError::Malformed { .. } => "Malformed",
        CohortError::Csv { .. } => "Csv",
        CohortError::NonFiniteScore { .. } => "NonFiniteScore",
        CohortError::DuplicateCandidateId(_) => "DuplicateCandidateId",
        CohortError::EmptyCohort => "EmptyCohort",
        CohortError::TooFewRecords(_) => "TooFewRecords",
        CohortError::UnknownTest(_) => "UnknownTest",
        CohortError::UnknownTrait(_) => "UnknownTrait",
        CohortError::DirectionConfig(_) => "DirectionConfig",
        CohortError::InvalidSpec(_) => "InvalidSpec",
    }
}

fn cohort_error_details(e: &CohortError) -> Vec<(&'static str, Value)> {
    match e {
        CohortError::MissingColumn(c) | CohortError::UnexpectedColumn(c) => vec![("column", c.clone().into())],
        CohortError::Malformed { line, column, value } => vec![
            ("line", (*line).into()),
            ("column", column.clone().into()),
            ("value", value.clone().into()),
        ],
        CohortError::Csv { line, .. } => vec![("line", (*line).into())],
        CohortError::NonFiniteScore { candidate_id, test } => vec![
            ("candidate_id", candidate_id.clone().into()),
            ("column", test.name().into()),
        ],
        CohortError::DuplicateCandidateId(id) => vec![("candidate_id", id.clone().into())],
        _ => Vec::new(),
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    cohort: Option<String>,
    cohort_csv: Option<String>,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: CreateRequest = parse_body(&body)?;
    let (label, cohort): (String, Arc<Cohort>) = match (request.cohort, request.cohort_csv) {
        (Some(name), None) => {
            let entry = state.catalog.get(&name).ok_or(ApiError::UnknownCohort(name))?;
            (entry.name.clone(), entry.cohort.clone())
        }
        (None, Some(csv)) => {
            let provenance = Provenance::Inline { label: "upload".into() };
            let cohort = parse_cohort(&csv, &TestDirectionConfig::default(), provenance)?;
            ("upload".to_string(), Arc::new(cohort))
        }
        _ => {
            return Err(ApiError::BadRequest(
                "give exactly one of \"cohort\" (a built-in name) or \"cohort_csv\" (file contents)".into(),
            ))
        }
    };
    let info = json!({
        "name": label,
        "size": cohort.len(),
        "fingerprint": cohort.fingerprint(),
    });
    let id = state.sessions.create(cohort);
    tracing::info!(session = %id, cohort = %label, "session created");
    Ok((
        StatusCode::CREATED,
        Json(json!({ "session_id": id, "state": "new", "cohort": info })),
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunRequest {
    weights_a: Value,
    weights_b: Value,
    master_seed: u64,
    #[serde(default)]
    policy: Option<Value>,
    #[serde(default)]
    train: Option<Value>,
}

fn weights(field: &'static str, value: Value) -> Result<WeightVector, ApiError> {
    serde_json::from_value(value).map_err(|e| ApiError::InvalidWeights {
        field,
        message: e.to_string(),
    })
}

fn overrides<T: DeserializeOwned + Default>(field: &'static str, value: Option<Value>) -> Result<T, ApiError> {
    match value {
        None | Some(Value::Null) => Ok(T::default()),
        Some(v) => serde_json::from_value(v).map_err(|e| ApiError::InvalidConfig {
            field,
            message: e.to_string(),
        }),
    }
}

/// Validates a run request body into a session config.
pub fn parse_run_request(body: &[u8]) -> Result<SessionConfig, ApiError> {
    let request: RunRequest = serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let config = SessionConfig {
        weights_a: weights("weights_a", request.weights_a)?,
        weights_b: weights("weights_b", request.weights_b)?,
        policy: overrides::<LabelingPolicy>("policy", request.policy)?,
        train: overrides::<TrainConfig>("train", request.train)?,
        master_seed: request.master_seed,
    };
    config.policy.validate().map_err(|e| ApiError::InvalidConfig {
        field: "policy",
        message: e.to_string(),
    })?;
    config.train.validate().map_err(|e| ApiError::InvalidConfig {
        field: "train",
        message: e.to_string(),
    })?;
    Ok(config)
}

async fn submit_and_run(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    state.sessions.cohort(&id)?;
    let config = parse_run_request(&body)?;
    let ticket = state.sessions.begin_run(&id, config)?;
    tracing::info!(session = %id, "run accepted");
    spawn_run(&state, ticket);
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "session_id": id, "state": "running" })),
    )
        .into_response())
}

fn spawn_run(state: &AppState, ticket: RunTicket) {
    let sessions = state.sessions.clone();
    let workers = state.workers.clone();
    tokio::spawn(async move {
        let permit = workers.acquire_owned().await.expect("worker pool is never closed");
        let job_sessions = sessions.clone();
        let job_ticket = ticket.clone();
        let joined = tokio::task::spawn_blocking(move || {
            let _permit = permit;
            let progress = |model, stage| job_sessions.set_progress(&job_ticket, Progress { model, stage });
            let options = RunOptions {
                concurrent: true,
                progress: Some(&progress),
            };
            run_simulation_with(&job_ticket.cohort, &job_ticket.config, options)
                .map(|r| r.to_json())
                .map_err(|e| RunFailure::from(&e))
        })
        .await;
        let outcome = joined.unwrap_or_else(|e| {
            Err(RunFailure {
                kind: "Internal".into(),
                message: format!("simulation task failed: {e}"),
                model: None,
                stage: None,
            })
        });
        match &outcome {
            Ok(_) => tracing::info!(session = %ticket.session_id, "run finished"),
            Err(f) => tracing::warn!(session = %ticket.session_id, error = %f.message, "run failed"),
        }
        sessions.finish(&ticket, outcome);
    });
}

async fn get_results(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let response = match state.sessions.snapshot(&id)? {
        Snapshot::Done(json) => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, "application/json")],
            json.as_str().to_owned(),
        )
            .into_response(),
        Snapshot::Running(progress) => (
            StatusCode::ACCEPTED,
            Json(json!({ "session_id": id, "state": "running", "progress": progress })),
        )
            .into_response(),
        Snapshot::Configured => (
            StatusCode::ACCEPTED,
            Json(json!({ "session_id": id, "state": "configured", "progress": null })),
        )
            .into_response(),
        Snapshot::Failed(failure) => (
            StatusCode::UNPROCESSABLE_ENTITY,
            Json(json!({ "session_id": id, "state": "failed", "error": failure })),
        )
            .into_response(),
        Snapshot::New => {
            return Err(ApiError::Conflict(format!("session {id} has no submitted run")));
        }
    };
    Ok(response)
}

async fn list_cohorts(State(state): State<AppState>) -> Json<Value> {
    Json(json!({ "cohorts": state.catalog.list() }))
}

async fn report_schema() -> Response {
    ([(header::CONTENT_TYPE, "application/schema+json")], REPORT_SCHEMA_JSON).into_response()
}
