//! HTTP service for interactive sessions.
//!
//! | method | path | body / query | returns |
//! |---|---|---|---|
//! | POST | `/sessions` | config document (JSON) | `{id, seed, profile, config}` |
//! | POST | `/sessions/{id}/flips` | `?count=k` (default 1) | `{records, stats}` |
//! | POST | `/sessions/{id}/stop` | optional `{reason}` | final report |
//! | GET | `/sessions/{id}/stats` | | stats snapshot |
//! | GET | `/sessions/{id}/summary.csv` | | CSV header and summary row |
//! | GET | `/sessions/{id}/stream` | | server-sent events |
//!
//! Each stream event is `{record, stats}` in flip order. When the session
//! stops the stream sends one `report` event and ends. A subscriber that
//! falls more than [`EVENT_BUFFER`] events behind gets a `lagged` event
//! carrying the number of skipped flips.

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use qcoin_core::report::{summary_row, SUMMARY_HEADER};
use qcoin_core::rng::entropy_seed;
use qcoin_core::{ConfigDocument, FinalReport, FlipRecord, Session, SessionConfig, SessionStats};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

pub const EVENT_BUFFER: usize = 1024;

/// Largest `count` accepted by one flips request.
pub const MAX_BATCH: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipEvent {
    pub record: FlipRecord,
    pub stats: SessionStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub id: u64,
    pub seed: u64,
    pub profile: String,
    pub config: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipBatch {
    pub records: Vec<FlipRecord>,
    pub stats: SessionStats,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct StopRequest {
    pub reason: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct FlipQuery {
    pub count: Option<u64>,
}

#[derive(Debug, Clone)]
enum Feed {
    Flip(Arc<str>),
    Report(Arc<str>),
}

struct Entry {
    session: Mutex<Session>,
    feed: broadcast::Sender<Feed>,
}

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<u64, Arc<Entry>>>,
    next_id: AtomicU64,
    report_dir: Option<PathBuf>,
}

impl AppState {
    /// Final reports are written as `session-<id>.json` under `report_dir`.
    pub fn new(report_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(AppState {
            report_dir,
            ..AppState::default()
        })
    }

    fn get(&self, id: u64) -> Result<Arc<Entry>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(&id)
            .cloned()
            .ok_or(ApiError::UnknownSession(id))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown session {0}")]
    UnknownSession(u64),
    #[error("session closed")]
    Closed,
    #[error("config: {0}")]
    Config(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ApiError::Closed => StatusCode::CONFLICT,
            ApiError::Config(_) | ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (
            status,
            Json(serde_json::json!({ "error": self.to_string() })),
        )
            .into_response()
    }
}

impl From<qcoin_core::Error> for ApiError {
    fn from(e: qcoin_core::Error) -> Self {
        match e {
            qcoin_core::Error::SessionClosed => ApiError::Closed,
            qcoin_core::Error::AttemptLimit(_) => ApiError::Internal(e.to_string()),
            other => ApiError::Config(other.to_string()),
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/flips", post(flips))
        .route("/sessions/{id}/stop", post(stop))
        .route("/sessions/{id}/stats", get(stats))
        .route("/sessions/{id}/summary.csv", get(summary))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn create(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Json<Created>, ApiError> {
    let mut doc: ConfigDocument =
        serde_json::from_slice(&body).map_err(|e| ApiError::Config(e.to_string()))?;
    if doc.seed.is_none() {
        doc.seed = Some(entropy_seed());
    }
    let config = SessionConfig::from_document(doc)?;
    let created = Created {
        id: state.next_id.fetch_add(1, Ordering::Relaxed),
        seed: config.seed,
        profile: config.profile.label(),
        config: config.canonical_text(),
    };
    let entry = Entry {
        session: Mutex::new(Session::new(config)?),
        feed: broadcast::channel(EVENT_BUFFER).0,
    };
    state
        .sessions
        .write()
        .unwrap()
        .insert(created.id, Arc::new(entry));
    Ok(Json(created))
}

fn to_json<T: Serialize>(v: &T) -> Arc<str> {
    serde_json::to_string(v).expect("serializable").into()
}

async fn flips(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Query(q): Query<FlipQuery>,
) -> Result<Json<FlipBatch>, ApiError> {
    let count = q.count.unwrap_or(1);
    if count == 0 || count > MAX_BATCH {
        return Err(ApiError::BadRequest(format!(
            "count must be in 1..={MAX_BATCH}"
        )));
    }
    let entry = state.get(id)?;
    let batch = tokio::task::spawn_blocking(move || -> Result<FlipBatch, ApiError> {
        let mut session = entry.session.lock().unwrap();
        if session.is_closed() {
            return Err(ApiError::Closed);
        }
        let mut records = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let (record, stats) = session.flip()?;
            if entry.feed.receiver_count() > 0 {
                let _ = entry.feed.send(Feed::Flip(to_json(&FlipEvent {
                    record: record.clone(),
                    stats,
                })));
            }
            records.push(record);
        }
        Ok(FlipBatch {
            records,
            stats: session.stats(),
        })
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(batch))
}

async fn stop(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
    body: Bytes,
) -> Result<Json<FinalReport>, ApiError> {
    let req: StopRequest = if body.iter().all(u8::is_ascii_whitespace) {
        StopRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?
    };
    let entry = state.get(id)?;
    let mut session = entry.session.lock().unwrap();
    let first = !session.is_closed();
    let report = session.stop(req.reason.as_deref().unwrap_or("stopped by client"));
    if first {
        if let Some(dir) = &state.report_dir {
            let path = dir.join(format!("session-{id}.json"));
            let text = serde_json::to_string_pretty(&report).expect("serializable");
            std::fs::write(&path, text)
                .map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
        }
        let _ = entry.feed.send(Feed::Report(to_json(&report)));
    }
    Ok(Json(report))
}

async fn stats(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
) -> Result<Json<SessionStats>, ApiError> {
    let entry = state.get(id)?;
    let stats = entry.session.lock().unwrap().stats();
    Ok(Json(stats))
}

async fn summary(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
) -> Result<Response, ApiError> {
    let entry = state.get(id)?;
    let session = entry.session.lock().unwrap();
    let body = format!(
        "{SUMMARY_HEADER}\n{}\n",
        summary_row(session.config(), &session.stats())
    );
    Ok(([(header::CONTENT_TYPE, "text/csv")], body).into_response())
}

async fn stream(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let entry = state.get(id)?;
    // Subscribe under the session lock so no flip falls between the closed
    // check and the subscription.
    let (rx, closed) = {
        let session = entry.session.lock().unwrap();
        (entry.feed.subscribe(), session.is_closed())
    };
    let events = futures::stream::unfold((rx, closed), |(mut rx, done)| async move {
        if done {
            return None;
        }
        match rx.recv().await {
            Ok(Feed::Flip(json)) => {
                Some((Ok(Event::default().event("flip").data(&*json)), (rx, false)))
            }
            Ok(Feed::Report(json)) => Some((
                Ok(Event::default().event("report").data(&*json)),
                (rx, true),
            )),
            Err(broadcast::error::RecvError::Lagged(n)) => Some((
                Ok(Event::default().event("lagged").data(n.to_string())),
                (rx, false),
            )),
            Err(broadcast::error::RecvError::Closed) => None,
        }
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}
