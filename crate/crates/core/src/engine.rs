//! The daemon's single owner of mutable state: detector, sip history,
//! scheduler and event log. Every input (a sample, a clock advance, a user
//! interaction) goes through one `&mut self` method, and everything that
//! happens as a result is appended to the log in generation order.

use chrono::NaiveTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::{EventLog, Granularity, HistorySeries, KindTag, LogError, LoggedEvent, Payload};
use crate::hydration::{snapshot, HydrationConfig, HydrationSnapshot, InvalidHydrationConfig, Sip};
use crate::scheduler::{tick, InvalidSchedulerConfig, SchedulerConfig, SchedulerState};
use crate::sensing::{Detector, DetectorConfig, InvalidDetectorConfig, SensorEventKind, WeightSample};
use crate::time::{Millis, MINUTE_MS};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EngineConfig {
    pub detector: DetectorConfig,
    pub hydration: HydrationConfig,
    pub scheduler: SchedulerConfig,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        self.detector.validate()?;
        self.hydration.validate()?;
        self.scheduler.validate()?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Detector(#[from] InvalidDetectorConfig),
    #[error(transparent)]
    Hydration(#[from] InvalidHydrationConfig),
    #[error(transparent)]
    Scheduler(#[from] InvalidSchedulerConfig),
    #[error("no preference fields given")]
    EmptyUpdate,
    #[error(transparent)]
    Log(#[from] LogError),
}

/// Runtime preference update; absent fields are left unchanged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefsUpdate {
    pub daily_goal_ml: Option<f64>,
    pub preferred_interval_min: Option<u32>,
    /// "HH:MM"
    pub active_start: Option<String>,
    pub active_end: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoalCompletion {
    pub consumed_ml: f64,
    pub goal_ml: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PendingNotification {
    pub seq: u64,
    pub ts: Millis,
    pub level_pct: f64,
    pub message_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiState {
    pub snapshot: HydrationSnapshot,
    pub goal_completion: GoalCompletion,
    pub last_sip_ts: Option<Millis>,
    /// Latest notification not yet followed by a sip.
    pub pending_notification: Option<PendingNotification>,
}

#[derive(Debug)]
pub struct Engine {
    cfg: EngineConfig,
    detector: Detector,
    log: EventLog,
    sips: Vec<Sip>,
    scheduler: Option<SchedulerState>,
    next_tick: Millis,
    clock: Option<Millis>,
}

impl Engine {
    /// Builds an engine over an existing (possibly non-empty) log; sips
    /// already in the log count towards today's intake.
    pub fn new(cfg: EngineConfig, log: EventLog) -> Result<Self, EngineError> {
        cfg.validate()?;
        let sips = log.sips();
        let clock = log.events().last().map(|e| e.ts);
        Ok(Engine {
            detector: Detector::new(cfg.detector),
            cfg,
            log,
            sips,
            scheduler: None,
            next_tick: 0,
            clock,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    pub fn clock(&self) -> Option<Millis> {
        self.clock
    }

    fn now(&self) -> Millis {
        self.clock.unwrap_or(0)
    }

    fn record(&mut self, ts: Millis, payload: Payload) -> Result<LoggedEvent, LogError> {
        let ev = self.log.append(ts, payload, None)?;
        if let Some(sip) = ev.as_sip() {
            self.sips.push(sip);
        }
        Ok(ev)
    }

    /// Feeds one sample, logging any sip or refill, then advances the clock
    /// to the sample time.
    pub fn ingest(&mut self, sample: WeightSample) -> Result<Vec<LoggedEvent>, LogError> {
        let mut out = Vec::new();
        for e in self.detector.push(sample) {
            match e.kind {
                SensorEventKind::Sip { .. } | SensorEventKind::Refill { .. } => {
                    out.push(self.record(e.ts, e.kind.into())?);
                }
                SensorEventKind::BottleOff | SensorEventKind::BottleOn => {}
            }
        }
        out.extend(self.advance_to(sample.ts)?);
        Ok(out)
    }

    /// Runs a scheduler tick on every minute boundary up to `now`.
    pub fn advance_to(&mut self, now: Millis) -> Result<Vec<LoggedEvent>, LogError> {
        if self.scheduler.is_none() {
            let snap = snapshot(now, &self.sips, &self.cfg.hydration);
            self.scheduler = Some(SchedulerState::new(now, snap.tier));
            self.next_tick = now.div_euclid(MINUTE_MS) * MINUTE_MS + MINUTE_MS;
        }
        if self.clock.is_none_or(|c| now > c) {
            self.clock = Some(now);
        }
        let mut out = Vec::new();
        while self.next_tick <= now {
            let t = self.next_tick;
            out.extend(self.tick_at(t)?);
            self.next_tick += MINUTE_MS;
        }
        Ok(out)
    }

    fn tick_at(&mut self, now: Millis) -> Result<Vec<LoggedEvent>, LogError> {
        let snap = snapshot(now, &self.sips, &self.cfg.hydration);
        let state = self.scheduler.as_ref().expect("scheduler initialised");
        let (next, events) = tick(now, &snap, state, &self.cfg.scheduler, &self.cfg.hydration);
        self.scheduler = Some(next);
        events
            .into_iter()
            .map(|e| self.record(e.ts, e.kind.into()))
            .collect()
    }

    pub fn snapshot(&self) -> HydrationSnapshot {
        snapshot(self.now(), &self.sips, &self.cfg.hydration)
    }

    pub fn state(&self) -> ApiState {
        let snap = self.snapshot();
        let last_sip_ts = self.sips.last().map(|s| s.ts);
        let pending_notification = self
            .log
            .events()
            .iter()
            .rev()
            .find(|e| e.kind() == KindTag::Notification)
            .filter(|n| last_sip_ts.is_none_or(|s| s <= n.ts))
            .and_then(|n| match n.payload {
                Payload::Notification { level_pct, message_index } => Some(PendingNotification {
                    seq: n.seq,
                    ts: n.ts,
                    level_pct,
                    message_index,
                    message: self.cfg.scheduler.message(message_index).unwrap_or_default().to_string(),
                }),
                _ => None,
            });
        ApiState {
            goal_completion: GoalCompletion {
                consumed_ml: snap.consumed_ml,
                goal_ml: snap.goal_ml,
            },
            snapshot: snap,
            last_sip_ts,
            pending_notification,
        }
    }

    pub fn history(&self, granularity: Granularity) -> HistorySeries {
        self.log.history_series(granularity, self.now(), self.cfg.hydration.zone)
    }

    pub fn events_since(&self, cursor: Option<u64>) -> &[LoggedEvent] {
        self.log.since(cursor)
    }

    pub fn record_historical_view(&mut self, granularity: Granularity) -> Result<LoggedEvent, LogError> {
        self.record(self.now(), Payload::HistoricalView { granularity })
    }

    /// Applies and logs a preference change. Nothing changes unless the
    /// resulting configuration is valid.
    pub fn set_prefs(&mut self, update: &PrefsUpdate) -> Result<LoggedEvent, EngineError> {
        let mut cfg = self.cfg.clone();
        let mut changes = Vec::new();
        if let Some(goal) = update.daily_goal_ml {
            cfg.hydration.daily_goal_ml = goal;
            changes.push(("daily_goal_ml".to_string(), goal.to_string()));
        }
        if let Some(interval) = update.preferred_interval_min {
            cfg.scheduler.preferred_interval_min = interval;
            changes.push(("preferred_interval_min".to_string(), interval.to_string()));
        }
        for (key, raw, slot) in [
            ("active_start", &update.active_start, &mut cfg.hydration.active_start),
            ("active_end", &update.active_end, &mut cfg.hydration.active_end),
        ] {
            if let Some(raw) = raw {
                *slot = crate::time::parse_time_of_day(raw)
                    .ok_or(InvalidHydrationConfig("active hours must be HH:MM"))?;
                changes.push((key.to_string(), slot.format("%H:%M").to_string()));
            }
        }
        if changes.is_empty() {
            return Err(EngineError::EmptyUpdate);
        }
        cfg.validate()?;
        self.cfg = cfg;
        if let Some(s) = self.scheduler.as_mut() {
            s.rearm();
        }
        Ok(self.record(self.now(), Payload::ConfigChange { changes })?)
    }
}

/// Convenience for tests and tools: the time-of-day `h:m` as a `NaiveTime`.
pub fn hm(h: u32, m: u32) -> NaiveTime {
    NaiveTime::from_hms_opt(h, m, 0).expect("valid time of day")
}
