//! HTTP+JSON front of [`assistant`](crate::assistant).
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/sessions` | `{"policy_id": "..."}` |
//! | POST | `/sessions/{id}/step` | `{"measurements": [{"node": 0, "mw": 0.01}]}` |
//! | POST | `/sessions/{id}/end` | `{"measurements": [...]}` |
//! | GET | `/sessions/{id}` | |
//! | GET | `/policies` | |
//! | GET | `/policies/{id}/thresholds` | |
//!
//! Measurements take either `mw` or `dbm`. Policy ids are the first
//! [`POLICY_ID_LEN`] hex digits of the policy fingerprint.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::assistant::{EndReport, MeasurementInput, SessionView, StepOutcome, WalkSession};
use crate::channel::PowerLevelSet;
use crate::config::Objective;
use crate::error::Error;
use crate::policy::Policy;
use crate::store::{fingerprint_of, threshold_tables, ThresholdTables};

pub const POLICY_ID_LEN: usize = 12;

#[derive(Debug)]
pub struct LoadedPolicy {
    pub id: String,
    pub fingerprint: String,
    pub policy: Policy,
    pub levels: PowerLevelSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub id: String,
    pub fingerprint: String,
    pub label: String,
    pub objective: Objective,
    pub memory_n: u32,
    pub xi: f64,
    pub theta: f64,
    pub r_max_steps: u32,
    pub j0_mw: f64,
    pub levels_mw: Vec<f64>,
}

#[derive(Default)]
pub struct AppState {
    policies: RwLock<Vec<Arc<LoadedPolicy>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<WalkSession>>>>,
    next_session: AtomicU64,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `policy` (solved on `levels`) and returns its id.
    pub fn add_policy(&self, policy: Policy, levels: PowerLevelSet) -> crate::Result<String> {
        let fingerprint = fingerprint_of(&policy)?;
        let id = fingerprint[..POLICY_ID_LEN].to_string();
        let mut ps = self.policies.write().expect("policy lock");
        if !ps.iter().any(|p| p.id == id) {
            ps.push(Arc::new(LoadedPolicy {
                id: id.clone(),
                fingerprint,
                policy,
                levels,
            }));
        }
        Ok(id)
    }

    fn policy(&self, id: &str) -> Result<Arc<LoadedPolicy>, ApiError> {
        self.policies
            .read()
            .expect("policy lock")
            .iter()
            .find(|p| p.id == id || p.fingerprint == id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("unknown policy `{id}`")))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<WalkSession>>, ApiError> {
        self.sessions
            .read()
            .expect("session lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("unknown session `{id}`")))
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Conflict(String),
    Unprocessable(String),
    Internal(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Session(_) => ApiError::Conflict(e.to_string()),
            Error::Domain(_) | Error::OutOfRange { .. } => ApiError::Unprocessable(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": msg }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub policy_id: String,
}

#[derive(Debug, Deserialize)]
pub struct Measurements {
    pub measurements: Vec<MeasurementInput>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/end", post(end))
        .route("/policies", get(list_policies))
        .route("/policies/{id}/thresholds", get(thresholds))
        .with_state(state)
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let policy = app.policy(&req.policy_id)?;
    let n = app.next_session.fetch_add(1, Ordering::Relaxed) + 1;
    let id = format!("s{n}");
    let session = WalkSession::new(&id, &policy.id, &policy.fingerprint);
    let view = session.view();
    app.sessions
        .write()
        .expect("session lock")
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let s = app.session(&id)?;
    let view = s.lock().expect("session mutex").view();
    Ok(Json(view))
}

async fn step(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<Measurements>,
) -> Result<Json<StepOutcome>, ApiError> {
    let s = app.session(&id)?;
    let mut s = s.lock().expect("session mutex");
    let policy = app.policy(&s.policy_id)?;
    Ok(Json(s.step(&policy.policy, &policy.levels, &req.measurements)?))
}

async fn end(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<Measurements>,
) -> Result<Json<EndReport>, ApiError> {
    let s = app.session(&id)?;
    let mut s = s.lock().expect("session mutex");
    let policy = app.policy(&s.policy_id)?;
    Ok(Json(s.end(&policy.policy, &policy.levels, &req.measurements)?))
}

async fn list_policies(State(app): State<Arc<AppState>>) -> Json<Vec<PolicySummary>> {
    let ps = app.policies.read().expect("policy lock");
    Json(
        ps.iter()
            .map(|p| {
                let c = p.policy.config();
                PolicySummary {
                    id: p.id.clone(),
                    fingerprint: p.fingerprint.clone(),
                    label: p.policy.label(),
                    objective: c.objective,
                    memory_n: c.memory_n,
                    xi: c.xi,
                    theta: c.theta,
                    r_max_steps: c.r_max_steps,
                    j0_mw: p.policy.j0(),
                    levels_mw: p.levels.levels().to_vec(),
                }
            })
            .collect(),
    )
}

async fn thresholds(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<ThresholdTables>, ApiError> {
    let p = app.policy(&id)?;
    Ok(Json(threshold_tables(&p.policy)))
}

/// Serves `state` on `addr` until the process is stopped.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
