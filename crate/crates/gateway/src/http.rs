//! HTTP API. Bodies are JSON both ways; errors are `{"error": "..."}`.

use std::collections::HashMap;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use sipsense_core::engine::PrefsUpdate;
use sipsense_core::eventlog::Granularity;

use crate::service::{EngineHandle, FeedEvent, PrefsError, Unavailable};

pub const DEFAULT_POLL_TIMEOUT_MS: u64 = 25_000;
pub const MAX_POLL_TIMEOUT_MS: u64 = 60_000;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<Unavailable> for ApiError {
    fn from(e: Unavailable) -> Self {
        ApiError {
            status: StatusCode::SERVICE_UNAVAILABLE,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type Params = Query<HashMap<String, String>>;

fn granularity(raw: Option<&str>) -> Result<Granularity, ApiError> {
    let raw = raw.ok_or_else(|| ApiError::bad_request("granularity is required (week, day or sips)"))?;
    raw.parse()
        .map_err(|_| ApiError::bad_request(format!("unknown granularity {raw:?}; expected week, day or sips")))
}

fn json_body<'a, T: Deserialize<'a>>(body: &'a [u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

async fn state(State(h): State<EngineHandle>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(h.state().await?))
}

async fn history(State(h): State<EngineHandle>, Query(q): Params) -> Result<impl IntoResponse, ApiError> {
    let g = granularity(q.get("granularity").map(String::as_str))?;
    Ok(Json(h.history(g).await?))
}

#[derive(Serialize)]
struct EventsBody {
    events: Vec<FeedEvent>,
    /// Pass back as `since` to continue the feed.
    cursor: Option<u64>,
}

fn param<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    q.get(key)
        .map(|v| v.parse().map_err(|_| ApiError::bad_request(format!("{key}: cannot parse {v:?}"))))
        .transpose()
}

/// Long-poll: answers at once when events newer than `since` exist,
/// otherwise waits up to `timeout_ms` for one.
async fn events(State(h): State<EngineHandle>, Query(q): Params) -> Result<impl IntoResponse, ApiError> {
    let since: Option<u64> = param(&q, "since")?;
    let timeout_ms = param(&q, "timeout_ms")?.unwrap_or(DEFAULT_POLL_TIMEOUT_MS).min(MAX_POLL_TIMEOUT_MS);
    let deadline = tokio::time::Instant::now() + Duration::from_millis(timeout_ms);
    let mut seq = h.last_seq();
    loop {
        seq.borrow_and_update();
        let events = h.events_since(since).await?;
        if !events.is_empty() {
            let cursor = events.last().map(|e| e.event.seq);
            return Ok(Json(EventsBody { events, cursor }));
        }
        match tokio::time::timeout_at(deadline, seq.changed()).await {
            Err(_) => return Ok(Json(EventsBody { events, cursor: since })),
            Ok(Err(_)) => return Err(Unavailable.into()),
            Ok(Ok(())) => {}
        }
    }
}

async fn prefs(State(h): State<EngineHandle>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let update: PrefsUpdate = json_body(&body)?;
    match h.set_prefs(update).await {
        Ok((event, prefs)) => Ok(Json(serde_json::json!({ "event": event, "prefs": prefs }))),
        Err(PrefsError::Invalid(msg)) => Err(ApiError::bad_request(msg)),
        Err(PrefsError::Unavailable(e)) => Err(e.into()),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HistoricalBody {
    granularity: String,
}

async fn historical(State(h): State<EngineHandle>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let body: HistoricalBody = json_body(&body)?;
    let g = granularity(Some(&body.granularity))?;
    Ok(Json(h.record_historical_view(g).await?))
}

async fn not_found() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        message: "no such endpoint".into(),
    }
}

pub fn router(handle: EngineHandle) -> Router {
    Router::new()
        .route("/state", get(state))
        .route("/history", get(history))
        .route("/events", get(events))
        .route("/prefs", post(prefs))
        .route("/interactions/historical", post(historical))
        .fallback(not_found)
        .with_state(handle)
}
