//! HTTP service for 5-point naturalness listening tests: participant
//! sessions, randomised presentation, durable rating collection and
//! aggregated results.

mod config;
mod samples;
mod session;
mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use laughtts::eval::{
    boxplot_summary, mos_stats, participant_table, AgeRange, BoxplotSummary, Gender, MethodStats, ParticipantTable,
    RatingRecord, QUARTILE_METHOD, STD_KIND,
};
use serde::{Deserialize, Serialize};

pub use config::{ServiceConfig, DEFAULT_NATURALNESS};
pub use samples::{Sample, SampleSet};
pub use session::{session_permutation, sha256_hex, Session, SessionRecord};
pub use store::{JsonlLog, RatingStore};

pub const RATINGS_FILE: &str = "ratings.jsonl";
pub const SESSIONS_FILE: &str = "sessions.jsonl";
pub const ADMIN_HEADER: &str = "x-admin-token";

/// Likert labels, score 1 first.
pub const SCALE_LABELS: [&str; 5] = ["very unnatural", "unnatural", "fairly natural", "natural", "very natural"];

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("configuration: {0}")]
    Config(String),
    #[error("corrupt store: {0}")]
    Corrupt(String),
    #[error("invalid record: {0}")]
    Invalid(String),
}

#[derive(Debug)]
struct Inner {
    ratings: RatingStore,
    sessions_log: JsonlLog,
    sessions: HashMap<String, Session>,
}

#[derive(Debug)]
pub struct AppState {
    config: ServiceConfig,
    samples: SampleSet,
    inner: Mutex<Inner>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl AppState {
    /// Opens the stores under `config.store_dir` and replays them: each
    /// session resumes after its last stored rating.
    pub fn open(config: ServiceConfig, samples: SampleSet) -> Result<Arc<Self>, ServiceError> {
        config.validate()?;
        std::fs::create_dir_all(&config.store_dir).map_err(|e| ServiceError::Io(config.store_dir.display().to_string(), e))?;
        let ratings = RatingStore::open(&config.store_dir.join(RATINGS_FILE), config.fsync)?;
        let sessions_path = config.store_dir.join(SESSIONS_FILE);
        let (sessions_log, text) = JsonlLog::open(&sessions_path, config.fsync)?;
        let mut sessions = HashMap::new();
        for record in store::parse_lines::<SessionRecord>(&sessions_path, &text)? {
            let order =
                session_permutation(&record.token_hash, config.server_seed, samples.len(), config.max_samples_per_session);
            sessions.insert(record.token_hash.clone(), Session { record, order, cursor: 0 });
        }
        let by_participant: HashMap<String, String> =
            sessions.values().map(|s| (s.record.participant_id(), s.record.token_hash.clone())).collect();
        for r in ratings.records() {
            let Some(s) = by_participant.get(&r.participant).and_then(|h| sessions.get_mut(h)) else {
                log::warn!("rating from unknown participant {}", r.participant);
                continue;
            };
            if s.current().map(|i| samples.samples[i].id.as_str()) == Some(r.sample.as_str()) {
                s.cursor += 1;
            } else {
                log::warn!("rating for {} out of presentation order for {}", r.sample, r.participant);
            }
        }
        log::info!("replayed {} sessions and {} ratings", sessions.len(), ratings.len());
        Ok(Arc::new(AppState { config, samples, inner: Mutex::new(Inner { ratings, sessions_log, sessions }) }))
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        // A panic while holding the lock cannot leave a half-written record
        // in memory: appends update memory only after the write succeeds.
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn ratings(&self) -> Vec<RatingRecord> {
        self.lock().ratings.records().to_vec()
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Invalid(String),
    Unauthorized,
    Conflict(NextResponse),
    Internal(String),
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        log::error!("{e}");
        ApiError::Internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, serde_json::json!({ "error": m })),
            ApiError::Invalid(m) => (StatusCode::UNPROCESSABLE_ENTITY, serde_json::json!({ "error": m })),
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, serde_json::json!({ "error": "admin token required" })),
            ApiError::Conflict(current) => (
                StatusCode::CONFLICT,
                serde_json::json!({ "error": "sample does not match the current assignment", "current": current }),
            ),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, serde_json::json!({ "error": m })),
        };
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub gender: Gender,
    pub age_range: AgeRange,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreatedSession {
    pub token: String,
    pub n_samples: usize,
}

/// Participant-facing assignment. Carries no method information.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextResponse {
    Sample { sample_id: String, audio_url: String, index: usize, total: usize, replay_allowed: bool },
    Done { done: bool, total: usize },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitRating {
    pub sample_id: String,
    pub score: i64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RatingAck {
    pub ok: bool,
    pub duplicate: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScaleLabel {
    pub score: u8,
    pub label: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Instructions {
    pub scale: Vec<ScaleLabel>,
    pub naturalness: String,
    pub replay_allowed: bool,
    pub may_stop_anytime: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResultsResponse {
    pub n_ratings: usize,
    pub stats: Vec<MethodStats>,
    pub boxplots: Vec<BoxplotSummary>,
    pub participants: ParticipantTable,
    pub std_kind: String,
    pub quartile_method: String,
}

fn next_for(state: &AppState, s: &Session) -> NextResponse {
    let total = s.order.len();
    match s.current() {
        Some(i) => {
            let sample = &state.samples.samples[i];
            NextResponse::Sample {
                sample_id: sample.public_id.clone(),
                audio_url: format!("/audio/{}", sample.public_id),
                index: s.cursor,
                total,
                replay_allowed: true,
            }
        }
        None => NextResponse::Done { done: true, total },
    }
}

fn token_key(token: &str) -> String {
    sha256_hex(token.as_bytes())
}

async fn create_session(State(state): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> Result<Json<CreatedSession>, ApiError> {
    let token = uuid::Uuid::new_v4().simple().to_string();
    let record = SessionRecord { token_hash: token_key(&token), gender: req.gender, age_range: req.age_range, created_ms: now_ms() };
    let order = session_permutation(
        &record.token_hash,
        state.config.server_seed,
        state.samples.len(),
        state.config.max_samples_per_session,
    );
    let n_samples = order.len();
    let mut inner = state.lock();
    inner.sessions_log.append(&record)?;
    inner.sessions.insert(record.token_hash.clone(), Session { record, order, cursor: 0 });
    Ok(Json(CreatedSession { token, n_samples }))
}

async fn next_sample(State(state): State<Arc<AppState>>, Path(token): Path<String>) -> Result<Json<NextResponse>, ApiError> {
    let inner = state.lock();
    let s = inner.sessions.get(&token_key(&token)).ok_or_else(|| ApiError::NotFound("unknown session".into()))?;
    Ok(Json(next_for(&state, s)))
}

async fn submit_rating(
    State(state): State<Arc<AppState>>,
    Path(token): Path<String>,
    Json(req): Json<SubmitRating>,
) -> Result<Json<RatingAck>, ApiError> {
    if !(1..=5).contains(&req.score) {
        return Err(ApiError::Invalid(format!("score {} outside 1..=5", req.score)));
    }
    let mut guard = state.lock();
    let inner = &mut *guard;
    let s = inner.sessions.get_mut(&token_key(&token)).ok_or_else(|| ApiError::NotFound("unknown session".into()))?;
    let participant = s.record.participant_id();
    let Some(sample) = state.samples.by_public_id(&req.sample_id) else {
        return Err(ApiError::Conflict(next_for(&state, s)));
    };
    if inner.ratings.contains(&participant, &sample.id) {
        return Ok(Json(RatingAck { ok: true, duplicate: true }));
    }
    if s.current().map(|i| state.samples.samples[i].public_id.as_str()) != Some(req.sample_id.as_str()) {
        return Err(ApiError::Conflict(next_for(&state, s)));
    }
    let rec = RatingRecord {
        participant: participant.clone(),
        session: participant,
        sample: sample.id.clone(),
        method: sample.method,
        score: req.score as u8,
        timestamp_ms: now_ms(),
    };
    inner.ratings.append(rec)?;
    s.cursor += 1;
    Ok(Json(RatingAck { ok: true, duplicate: false }))
}

async fn instructions(State(state): State<Arc<AppState>>) -> Json<Instructions> {
    Json(Instructions {
        scale: SCALE_LABELS.iter().enumerate().map(|(i, l)| ScaleLabel { score: i as u8 + 1, label: l.to_string() }).collect(),
        naturalness: state.config.naturalness_explanation.clone(),
        replay_allowed: true,
        may_stop_anytime: true,
    })
}

/// Aggregates over the stored ratings and all registered participants.
pub fn compute_results(records: &[RatingRecord], participants: &[SessionRecord]) -> Result<ResultsResponse, ApiError> {
    let stats = mos_stats(records).map_err(|e| ApiError::Internal(e.to_string()))?;
    let boxplots = stats
        .iter()
        .map(|s| boxplot_summary(records, s.method))
        .collect::<Result<_, _>>()
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    let infos: Vec<_> = participants.iter().map(SessionRecord::participant_info).collect();
    Ok(ResultsResponse {
        n_ratings: records.len(),
        stats,
        boxplots,
        participants: participant_table(&infos),
        std_kind: STD_KIND.into(),
        quartile_method: QUARTILE_METHOD.into(),
    })
}

async fn results(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Result<Json<ResultsResponse>, ApiError> {
    let supplied = headers.get(ADMIN_HEADER).and_then(|v| v.to_str().ok());
    if supplied != Some(state.config.admin_token.as_str()) {
        return Err(ApiError::Unauthorized);
    }
    let (records, mut sessions) = {
        let inner = state.lock();
        (inner.ratings.records().to_vec(), inner.sessions.values().map(|s| s.record.clone()).collect::<Vec<_>>())
    };
    sessions.sort_by_key(|s| s.created_ms);
    Ok(Json(compute_results(&records, &sessions)?))
}

async fn audio(State(state): State<Arc<AppState>>, Path(sample_id): Path<String>) -> Result<Response, ApiError> {
    let sample = state.samples.by_public_id(&sample_id).ok_or_else(|| ApiError::NotFound("unknown sample".into()))?;
    let bytes = tokio::fs::read(&sample.path).await.map_err(|e| {
        log::error!("{}: {e}", sample.path.display());
        ApiError::Internal("audio unavailable".into())
    })?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{token}/next", get(next_sample))
        .route("/api/session/{token}/rating", post(submit_rating))
        .route("/api/instructions", get(instructions))
        .route("/api/results", get(results))
        .route("/audio/{sample_id}", get(audio))
        .with_state(state)
}

/// Loads the sample manifest, replays the stores and serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let samples = SampleSet::from_manifest(&config.samples, config.server_seed)?;
    let addr: SocketAddr = format!("{}:{}", config.bind, config.port)
        .parse()
        .map_err(|e| ServiceError::Config(format!("bind address: {e}")))?;
    let state = AppState::open(config, samples)?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| ServiceError::Io(addr.to_string(), e))?;
    log::info!("listening on {addr}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::Io(addr.to_string(), e))
}
