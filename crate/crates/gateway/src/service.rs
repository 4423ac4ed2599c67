//! The engine loop and the handle API handlers use to talk to it.
//!
//! The [`Engine`] lives on one dedicated thread. Samples, clock advances and
//! API requests all arrive as [`Request`] messages on a single channel, so
//! every mutation is serialized and every reply reflects a consistent state.

use std::io::BufRead;
use std::thread::JoinHandle;

use serde::Serialize;
use sipsense_core::engine::{ApiState, Engine, EngineError, PrefsUpdate};
use sipsense_core::eventlog::{Granularity, HistorySeries, LogError, LoggedEvent, Payload};
use sipsense_core::sensing::{parse_sample, WeightSample};
use sipsense_core::time::Millis;
use thiserror::Error;
use tokio::sync::{mpsc, oneshot, watch};

const QUEUE_DEPTH: usize = 1024;

/// One entry of the `/events` feed: the logged record, plus the message text
/// for notifications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedEvent {
    #[serde(flatten)]
    pub event: LoggedEvent,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prefs {
    pub daily_goal_ml: f64,
    pub preferred_interval_min: u32,
    pub active_start: String,
    pub active_end: String,
}

#[derive(Debug)]
pub enum Request {
    Sample(WeightSample),
    Advance(Millis),
    State(oneshot::Sender<ApiState>),
    History(Granularity, oneshot::Sender<HistorySeries>),
    Events(Option<u64>, oneshot::Sender<Vec<FeedEvent>>),
    SetPrefs(PrefsUpdate, oneshot::Sender<Result<(LoggedEvent, Prefs), String>>),
    Historical(Granularity, oneshot::Sender<LoggedEvent>),
    Shutdown,
}

/// The loop is gone (stopped, or failed on storage).
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("engine loop unavailable")]
pub struct Unavailable;

#[derive(Debug, Error)]
pub enum PrefsError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Unavailable(#[from] Unavailable),
}

#[derive(Debug, Clone)]
pub struct EngineHandle {
    tx: mpsc::Sender<Request>,
    last_seq: watch::Receiver<Option<u64>>,
}

fn prefs_of(engine: &Engine) -> Prefs {
    let cfg = engine.config();
    Prefs {
        daily_goal_ml: cfg.hydration.daily_goal_ml,
        preferred_interval_min: cfg.scheduler.preferred_interval_min,
        active_start: cfg.hydration.active_start.format("%H:%M").to_string(),
        active_end: cfg.hydration.active_end.format("%H:%M").to_string(),
    }
}

fn feed_event(engine: &Engine, e: &LoggedEvent) -> FeedEvent {
    let message = match e.payload {
        Payload::Notification { message_index, .. } => engine.config().scheduler.message(message_index).map(str::to_owned),
        _ => None,
    };
    FeedEvent {
        event: e.clone(),
        message,
    }
}

fn serve(mut engine: Engine, mut rx: mpsc::Receiver<Request>, seq: watch::Sender<Option<u64>>) -> Result<Engine, LogError> {
    while let Some(req) = rx.blocking_recv() {
        match req {
            Request::Sample(s) => {
                engine.ingest(s)?;
            }
            Request::Advance(now) => {
                engine.advance_to(now)?;
            }
            Request::State(reply) => {
                let _ = reply.send(engine.state());
            }
            Request::History(g, reply) => {
                let _ = reply.send(engine.history(g));
            }
            Request::Events(since, reply) => {
                let events = engine.events_since(since).iter().map(|e| feed_event(&engine, e)).collect();
                let _ = reply.send(events);
            }
            Request::SetPrefs(update, reply) => match engine.set_prefs(&update) {
                Ok(ev) => {
                    let _ = reply.send(Ok((ev, prefs_of(&engine))));
                }
                Err(EngineError::Log(e)) => return Err(e),
                Err(e) => {
                    let _ = reply.send(Err(e.to_string()));
                }
            },
            Request::Historical(g, reply) => {
                let ev = engine.record_historical_view(g)?;
                let _ = reply.send(ev);
            }
            Request::Shutdown => break,
        }
        seq.send_if_modified(|cur| {
            let last = engine.log().last_seq();
            let changed = *cur != last;
            *cur = last;
            changed
        });
    }
    Ok(engine)
}

impl EngineHandle {
    /// Moves `engine` onto its own thread. The thread ends on
    /// [`EngineHandle::shutdown`], when every handle is dropped, or on a
    /// storage failure, and returns the engine (or the failure).
    pub fn spawn(engine: Engine) -> (EngineHandle, JoinHandle<Result<Engine, LogError>>) {
        let (tx, rx) = mpsc::channel(QUEUE_DEPTH);
        let (seq_tx, seq_rx) = watch::channel(engine.log().last_seq());
        let thread = std::thread::Builder::new()
            .name("engine".into())
            .spawn(move || serve(engine, rx, seq_tx))
            .expect("spawn engine thread");
        (EngineHandle { tx, last_seq: seq_rx }, thread)
    }

    async fn ask<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Request) -> Result<T, Unavailable> {
        let (reply, rx) = oneshot::channel();
        self.tx.send(make(reply)).await.map_err(|_| Unavailable)?;
        rx.await.map_err(|_| Unavailable)
    }

    pub async fn state(&self) -> Result<ApiState, Unavailable> {
        self.ask(Request::State).await
    }

    pub async fn history(&self, g: Granularity) -> Result<HistorySeries, Unavailable> {
        self.ask(|r| Request::History(g, r)).await
    }

    pub async fn events_since(&self, since: Option<u64>) -> Result<Vec<FeedEvent>, Unavailable> {
        self.ask(|r| Request::Events(since, r)).await
    }

    pub async fn set_prefs(&self, update: PrefsUpdate) -> Result<(LoggedEvent, Prefs), PrefsError> {
        self.ask(|r| Request::SetPrefs(update, r)).await?.map_err(PrefsError::Invalid)
    }

    pub async fn record_historical_view(&self, g: Granularity) -> Result<LoggedEvent, Unavailable> {
        self.ask(|r| Request::Historical(g, r)).await
    }

    pub async fn ingest(&self, sample: WeightSample) -> Result<(), Unavailable> {
        self.tx.send(Request::Sample(sample)).await.map_err(|_| Unavailable)
    }

    pub async fn advance_to(&self, now: Millis) -> Result<(), Unavailable> {
        self.tx.send(Request::Advance(now)).await.map_err(|_| Unavailable)
    }

    pub async fn shutdown(&self) {
        let _ = self.tx.send(Request::Shutdown).await;
    }

    /// Watches the seq of the newest logged event.
    pub fn last_seq(&self) -> watch::Receiver<Option<u64>> {
        self.last_seq.clone()
    }

    /// Blocking sample feed for reader threads; fails once the loop is gone.
    pub fn blocking_ingest(&self, sample: WeightSample) -> Result<(), Unavailable> {
        self.tx.blocking_send(Request::Sample(sample)).map_err(|_| Unavailable)
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct FeedStats {
    pub samples: usize,
    pub malformed: usize,
}

/// Reads wire-format lines from `reader` into the loop until EOF or until
/// the loop stops. Malformed lines are counted and skipped.
pub fn feed_lines(reader: impl BufRead, handle: &EngineHandle) -> std::io::Result<FeedStats> {
    let mut stats = FeedStats::default();
    for line in reader.split(b'\n') {
        let line = line?;
        match parse_sample(&line) {
            Ok(sample) => {
                if handle.blocking_ingest(sample).is_err() {
                    break;
                }
                stats.samples += 1;
            }
            Err(e) => {
                if !line.iter().all(u8::is_ascii_whitespace) {
                    log::warn!("skipping malformed sample: {e}");
                    stats.malformed += 1;
                }
            }
        }
    }
    Ok(stats)
}
