//! Append-only event log.
//!
//! Every sip, refill, intervention and user interaction becomes one line:
//!
//! ```text
//! seq=<int> ts=<int> kind=<KIND> k1=v1 k2=v2 ...
//! ```
//!
//! Fields are separated by single spaces and each record ends in `\n`.
//! Values are percent-encoded (see [`crate::kv`]). A record written without
//! its terminator (a crash mid-append) is reported as a partial tail and
//! dropped when the log is reopened for writing.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::Duration;
use serde::Serialize;
use thiserror::Error;

use crate::hydration::{FeedbackTier, Sip};
use crate::kv::{decode_value, encode_value};
use crate::scheduler::{InterventionEvent, InterventionKind};
use crate::sensing::{SensorEvent, SensorEventKind};
use crate::time::{LocalZone, Millis, DAY_MS, HOUR_MS};

/// Number of raw sips returned by the SIPS history view.
pub const RECENT_SIPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KindTag {
    Sip,
    Refill,
    Notification,
    TierChange,
    HistoricalView,
    ConfigChange,
    BottleOff,
    BottleOn,
}

impl KindTag {
    pub const ALL: [KindTag; 8] = [
        KindTag::Sip,
        KindTag::Refill,
        KindTag::Notification,
        KindTag::TierChange,
        KindTag::HistoricalView,
        KindTag::ConfigChange,
        KindTag::BottleOff,
        KindTag::BottleOn,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            KindTag::Sip => "SIP",
            KindTag::Refill => "REFILL",
            KindTag::Notification => "NOTIFICATION",
            KindTag::TierChange => "TIER_CHANGE",
            KindTag::HistoricalView => "HISTORICAL_VIEW",
            KindTag::ConfigChange => "CONFIG_CHANGE",
            KindTag::BottleOff => "BOTTLE_OFF",
            KindTag::BottleOn => "BOTTLE_ON",
        }
    }
}

impl fmt::Display for KindTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KindTag {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        KindTag::ALL.into_iter().find(|k| k.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Week,
    Day,
    Sips,
}

impl Granularity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Granularity::Week => "week",
            Granularity::Day => "day",
            Granularity::Sips => "sips",
        }
    }
}

impl FromStr for Granularity {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "week" => Ok(Granularity::Week),
            "day" => Ok(Granularity::Day),
            "sips" => Ok(Granularity::Sips),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Payload {
    Sip { volume_ml: f64 },
    Refill { volume_ml: f64 },
    Notification { level_pct: f64, message_index: usize },
    TierChange { old: FeedbackTier, new: FeedbackTier },
    HistoricalView { granularity: Granularity },
    /// Runtime preference change; pairs of (setting, new value).
    ConfigChange { changes: Vec<(String, String)> },
    BottleOff,
    BottleOn,
}

impl Payload {
    pub fn tag(&self) -> KindTag {
        match self {
            Payload::Sip { .. } => KindTag::Sip,
            Payload::Refill { .. } => KindTag::Refill,
            Payload::Notification { .. } => KindTag::Notification,
            Payload::TierChange { .. } => KindTag::TierChange,
            Payload::HistoricalView { .. } => KindTag::HistoricalView,
            Payload::ConfigChange { .. } => KindTag::ConfigChange,
            Payload::BottleOff => KindTag::BottleOff,
            Payload::BottleOn => KindTag::BottleOn,
        }
    }
}

impl From<SensorEventKind> for Payload {
    fn from(kind: SensorEventKind) -> Self {
        match kind {
            SensorEventKind::Sip { volume_ml } => Payload::Sip { volume_ml },
            SensorEventKind::Refill { volume_ml } => Payload::Refill { volume_ml },
            SensorEventKind::BottleOff => Payload::BottleOff,
            SensorEventKind::BottleOn => Payload::BottleOn,
        }
    }
}

impl From<InterventionKind> for Payload {
    fn from(kind: InterventionKind) -> Self {
        match kind {
            InterventionKind::Notification { level_pct, message_index } => {
                Payload::Notification { level_pct, message_index }
            }
            InterventionKind::TierChange { old_tier, new_tier } => Payload::TierChange {
                old: old_tier,
                new: new_tier,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoggedEvent {
    pub seq: u64,
    pub ts: Millis,
    #[serde(flatten)]
    pub payload: Payload,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    /// Original timestamp when the event arrived late and was clamped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamped_from: Option<Millis>,
}

impl LoggedEvent {
    pub fn kind(&self) -> KindTag {
        self.payload.tag()
    }

    pub fn as_sip(&self) -> Option<Sip> {
        match self.payload {
            Payload::Sip { volume_ml } => Some(Sip { ts: self.ts, volume_ml }),
            _ => None,
        }
    }

    pub fn from_sensor(seq: u64, e: &SensorEvent) -> Self {
        LoggedEvent {
            seq,
            ts: e.ts,
            payload: e.kind.into(),
            user: None,
            clamped_from: None,
        }
    }

    pub fn from_intervention(seq: u64, e: &InterventionEvent) -> Self {
        LoggedEvent {
            seq,
            ts: e.ts,
            payload: e.kind.into(),
            user: None,
            clamped_from: None,
        }
    }
}

/// Encodes one record including its `\n` terminator.
pub fn encode_event(e: &LoggedEvent) -> String {
    let mut line = format!("seq={} ts={} kind={}", e.seq, e.ts, e.kind());
    match &e.payload {
        Payload::Sip { volume_ml } | Payload::Refill { volume_ml } => {
            line.push_str(&format!(" volume_ml={volume_ml}"));
        }
        Payload::Notification { level_pct, message_index } => {
            line.push_str(&format!(" level_pct={level_pct} message_index={message_index}"));
        }
        Payload::TierChange { old, new } => {
            line.push_str(&format!(" old={} new={}", old.value(), new.value()));
        }
        Payload::HistoricalView { granularity } => {
            line.push_str(&format!(" granularity={}", granularity.as_str()));
        }
        Payload::ConfigChange { changes } => {
            for (k, v) in changes {
                line.push_str(&format!(" {}={}", encode_value(k), encode_value(v)));
            }
        }
        Payload::BottleOff | Payload::BottleOn => {}
    }
    if let Some(user) = &e.user {
        line.push_str(&format!(" user={}", encode_value(user)));
    }
    if let Some(orig) = e.clamped_from {
        line.push_str(&format!(" clamped_from={orig}"));
    }
    line.push('\n');
    line
}

pub fn encode_log(events: &[LoggedEvent]) -> String {
    events.iter().map(encode_event).collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {reason}")]
pub struct LogParseError {
    pub line: usize,
    pub reason: String,
}

fn field<'a>(fields: &mut Vec<(&'a str, &'a str)>, key: &str) -> Result<&'a str, String> {
    let pos = fields
        .iter()
        .position(|(k, _)| *k == key)
        .ok_or_else(|| format!("missing field `{key}`"))?;
    Ok(fields.remove(pos).1)
}

fn num<T: FromStr>(key: &str, raw: &str) -> Result<T, String> {
    raw.parse().map_err(|_| format!("field `{key}`: bad value {raw:?}"))
}

fn volume(raw: &str) -> Result<f64, String> {
    let v: f64 = num("volume_ml", raw)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("volume_ml must be positive, got {raw}"));
    }
    Ok(v)
}

fn tier(key: &str, raw: &str) -> Result<FeedbackTier, String> {
    FeedbackTier::new(num(key, raw)?).ok_or_else(|| format!("field `{key}`: tier out of range"))
}

/// Decodes one record (without its terminator).
pub fn decode_event(line: &str) -> Result<LoggedEvent, String> {
    let mut fields = Vec::new();
    for tok in line.split(' ') {
        let (k, v) = tok.split_once('=').ok_or_else(|| format!("token {tok:?} is not key=value"))?;
        fields.push((k, v));
    }
    let head: Vec<&str> = fields.iter().take(3).map(|(k, _)| *k).collect();
    if head != ["seq", "ts", "kind"] {
        return Err("record must start with seq, ts, kind".into());
    }
    let mut rest = fields.split_off(3);
    let seq: u64 = num("seq", fields[0].1)?;
    let ts: Millis = num("ts", fields[1].1)?;
    let kind: KindTag = fields[2].1.parse().map_err(|_| format!("unknown kind {:?}", fields[2].1))?;

    let user = match rest.iter().position(|(k, _)| *k == "user") {
        Some(_) => Some(decode_value(field(&mut rest, "user")?).map_err(|e| e.to_string())?),
        None => None,
    };
    let clamped_from = match rest.iter().position(|(k, _)| *k == "clamped_from") {
        Some(_) => Some(num("clamped_from", field(&mut rest, "clamped_from")?)?),
        None => None,
    };

    let payload = match kind {
        KindTag::Sip => Payload::Sip { volume_ml: volume(field(&mut rest, "volume_ml")?)? },
        KindTag::Refill => Payload::Refill { volume_ml: volume(field(&mut rest, "volume_ml")?)? },
        KindTag::Notification => {
            let level_pct: f64 = num("level_pct", field(&mut rest, "level_pct")?)?;
            if !(0.0..=100.0).contains(&level_pct) {
                return Err("level_pct out of range".into());
            }
            let message_index: usize = num("message_index", field(&mut rest, "message_index")?)?;
            Payload::Notification { level_pct, message_index }
        }
        KindTag::TierChange => {
            let old = tier("old", field(&mut rest, "old")?)?;
            let new = tier("new", field(&mut rest, "new")?)?;
            if old == new {
                return Err("TIER_CHANGE with old == new".into());
            }
            Payload::TierChange { old, new }
        }
        KindTag::HistoricalView => {
            let raw = field(&mut rest, "granularity")?;
            Payload::HistoricalView {
                granularity: raw.parse().map_err(|_| format!("unknown granularity {raw:?}"))?,
            }
        }
        KindTag::ConfigChange => {
            let changes = rest
                .drain(..)
                .map(|(k, v)| Ok((decode_value(k)?, decode_value(v)?)))
                .collect::<Result<Vec<_>, crate::kv::KvError>>()
                .map_err(|e| e.to_string())?;
            Payload::ConfigChange { changes }
        }
        KindTag::BottleOff => Payload::BottleOff,
        KindTag::BottleOn => Payload::BottleOn,
    };
    if let Some((k, _)) = rest.first() {
        return Err(format!("unexpected field `{k}` for {kind}"));
    }
    Ok(LoggedEvent { seq, ts, payload, user, clamped_from })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLog {
    pub events: Vec<LoggedEvent>,
    /// Bytes after the last `\n`, if any: a record cut short mid-write.
    pub partial_tail: Option<String>,
}

/// Parses a whole log. Complete records must be well-formed and ordered
/// (seq strictly increasing, ts non-decreasing); a trailing unterminated
/// record is returned separately, never parsed.
pub fn parse_log(text: &str) -> Result<ParsedLog, LogParseError> {
    let (complete, tail) = match text.rfind('\n') {
        Some(i) => (&text[..=i], &text[i + 1..]),
        None => ("", text),
    };
    let mut events: Vec<LoggedEvent> = Vec::new();
    for (i, line) in complete.split_terminator('\n').enumerate() {
        let lineno = i + 1;
        let err = |reason: String| LogParseError { line: lineno, reason };
        if line.is_empty() {
            return Err(err("empty record".into()));
        }
        let ev = decode_event(line).map_err(err)?;
        if let Some(prev) = events.last() {
            if ev.seq <= prev.seq {
                return Err(err(format!("seq {} does not follow {}", ev.seq, prev.seq)));
            }
            if ev.ts < prev.ts {
                return Err(err(format!("ts {} precedes {}", ev.ts, prev.ts)));
            }
        }
        events.push(ev);
    }
    Ok(ParsedLog {
        events,
        partial_tail: (!tail.is_empty()).then(|| tail.to_string()),
    })
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("storage failure on {path}: {source}")]
    Storage { path: PathBuf, source: io::Error },
    #[error("unparseable log {path}: {source}")]
    Parse { path: PathBuf, source: LogParseError },
}

/// What [`EventLog::open`] found on disk.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OpenReport {
    pub recovered: usize,
    /// Partial record discarded from the end of the file.
    pub dropped_tail: Option<String>,
}

/// The log as seen by its single writer. Reads are served from memory.
#[derive(Debug, Default)]
pub struct EventLog {
    events: Vec<LoggedEvent>,
    sink: Option<(PathBuf, File)>,
}

impl EventLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn from_events(events: Vec<LoggedEvent>) -> Self {
        EventLog { events, sink: None }
    }

    /// Opens (or creates) the log at `path` for appending. A partial tail is
    /// truncated away so the next record starts on a clean line.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, OpenReport), LogError> {
        let path = path.as_ref().to_path_buf();
        let storage = |source| LogError::Storage { path: path.clone(), source };
        let text = match std::fs::read(&path) {
            Ok(bytes) => String::from_utf8(bytes)
                .map_err(|_| storage(io::Error::new(io::ErrorKind::InvalidData, "log is not UTF-8")))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(storage(e)),
        };
        let parsed = parse_log(&text).map_err(|source| LogError::Parse { path: path.clone(), source })?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(storage)?;
        if let Some(tail) = &parsed.partial_tail {
            let keep = (text.len() - tail.len()) as u64;
            file.set_len(keep).map_err(storage)?;
            file.sync_all().map_err(storage)?;
        }
        let report = OpenReport {
            recovered: parsed.events.len(),
            dropped_tail: parsed.partial_tail,
        };
        Ok((
            EventLog {
                events: parsed.events,
                sink: Some((path, file)),
            },
            report,
        ))
    }

    pub fn path(&self) -> Option<&Path> {
        self.sink.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn events(&self) -> &[LoggedEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_seq(&self) -> Option<u64> {
        self.events.last().map(|e| e.seq)
    }

    /// Appends with the next seq. Timestamps earlier than the last record are
    /// clamped to it and flagged with `clamped_from`. When file-backed, the
    /// record is synced to disk before returning.
    pub fn append(&mut self, ts: Millis, payload: Payload, user: Option<String>) -> Result<LoggedEvent, LogError> {
        let seq = self.last_seq().map_or(0, |s| s + 1);
        let last_ts = self.events.last().map(|e| e.ts);
        let (ts, clamped_from) = match last_ts {
            Some(last) if ts < last => (last, Some(ts)),
            _ => (ts, None),
        };
        let event = LoggedEvent { seq, ts, payload, user, clamped_from };
        if let Some((path, file)) = &mut self.sink {
            let line = encode_event(&event);
            file.write_all(line.as_bytes())
                .and_then(|_| file.sync_data())
                .map_err(|source| LogError::Storage { path: path.clone(), source })?;
        }
        self.events.push(event.clone());
        Ok(event)
    }

    /// Events with seq greater than `cursor` (all events when `None`).
    pub fn since(&self, cursor: Option<u64>) -> &[LoggedEvent] {
        match cursor {
            None => &self.events,
            Some(c) => {
                let start = self.events.partition_point(|e| e.seq <= c);
                &self.events[start..]
            }
        }
    }

    pub fn query(&self, kinds: &[KindTag], start: Millis, end: Millis) -> Vec<LoggedEvent> {
        query(&self.events, kinds, start, end)
    }

    pub fn sips(&self) -> Vec<Sip> {
        self.events.iter().filter_map(LoggedEvent::as_sip).collect()
    }

    pub fn history_series(&self, granularity: Granularity, now: Millis, zone: LocalZone) -> HistorySeries {
        history_series(&self.events, granularity, now, zone)
    }
}

/// Writes a complete log in one go (simulator output, exports).
pub fn write_log(path: impl AsRef<Path>, events: &[LoggedEvent]) -> Result<(), LogError> {
    let path = path.as_ref();
    std::fs::write(path, encode_log(events)).map_err(|source| LogError::Storage {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_log(path: impl AsRef<Path>) -> Result<ParsedLog, LogError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LogError::Storage {
        path: path.to_path_buf(),
        source,
    })?;
    parse_log(&text).map_err(|source| LogError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// Events whose kind is in `kinds` (every kind when empty) with
/// `start <= ts <= end`, in seq order.
pub fn query(events: &[LoggedEvent], kinds: &[KindTag], start: Millis, end: Millis) -> Vec<LoggedEvent> {
    events
        .iter()
        .filter(|e| e.ts >= start && e.ts <= end)
        .filter(|e| kinds.is_empty() || kinds.contains(&e.kind()))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub label: String,
    /// Bucket start, or the sip time for the SIPS view.
    pub ts: Millis,
    pub total_ml: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistorySeries {
    pub granularity: Granularity,
    pub points: Vec<SeriesPoint>,
}

/// WEEK: 7 daily buckets ending today. DAY: 24 hourly buckets of today.
/// SIPS: the most recent [`RECENT_SIPS`] sips, oldest first. Sips after
/// `now` are ignored.
pub fn history_series(events: &[LoggedEvent], granularity: Granularity, now: Millis, zone: LocalZone) -> HistorySeries {
    let sips = events
        .iter()
        .filter_map(LoggedEvent::as_sip)
        .filter(|s| s.ts <= now);
    let today = zone.date(now);
    let points = match granularity {
        Granularity::Week => {
            let first = today - Duration::days(6);
            let mut points: Vec<SeriesPoint> = (0..7)
                .map(|i| {
                    let d = first + Duration::days(i);
                    SeriesPoint {
                        label: d.format("%Y-%m-%d").to_string(),
                        ts: zone.midnight(d),
                        total_ml: 0.0,
                    }
                })
                .collect();
            let start = zone.midnight(first);
            for s in sips {
                let idx = (s.ts - start).div_euclid(DAY_MS);
                if (0..7).contains(&idx) {
                    points[idx as usize].total_ml += s.volume_ml;
                }
            }
            points
        }
        Granularity::Day => {
            let start = zone.midnight(today);
            let mut points: Vec<SeriesPoint> = (0..24)
                .map(|h| SeriesPoint {
                    label: format!("{h:02}"),
                    ts: start + h * HOUR_MS,
                    total_ml: 0.0,
                })
                .collect();
            for s in sips.filter(|s| zone.date(s.ts) == today) {
                points[zone.hour(s.ts) as usize].total_ml += s.volume_ml;
            }
            points
        }
        Granularity::Sips => {
            let all: Vec<Sip> = sips.collect();
            let skip = all.len().saturating_sub(RECENT_SIPS);
            all[skip..]
                .iter()
                .map(|s| SeriesPoint {
                    label: zone.time_of_day(s.ts).format("%H:%M:%S").to_string(),
                    ts: s.ts,
                    total_ml: s.volume_ml,
                })
                .collect()
        }
    };
    HistorySeries { granularity, points }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydration::consumed_today;
    use chrono::{NaiveDate, NaiveTime};

    fn at(day: u32, h: u32, m: u32) -> Millis {
        LocalZone::utc().at(
            NaiveDate::from_ymd_opt(2024, 5, day).unwrap(),
            NaiveTime::from_hms_opt(h, m, 0).unwrap(),
        )
    }

    fn sip(v: f64) -> Payload {
        Payload::Sip { volume_ml: v }
    }

    #[test]
    fn seq_starts_at_zero_and_increments() {
        let mut log = EventLog::in_memory();
        assert_eq!(log.append(at(6, 10, 0), sip(20.0), None).unwrap().seq, 0);
        assert_eq!(log.append(at(6, 10, 1), sip(20.0), None).unwrap().seq, 1);
    }

    #[test]
    fn late_events_are_clamped_and_flagged() {
        let mut log = EventLog::in_memory();
        log.append(at(6, 10, 0), sip(20.0), None).unwrap();
        let late = log.append(at(6, 9, 0), sip(30.0), None).unwrap();
        assert_eq!(late.ts, at(6, 10, 0));
        assert_eq!(late.clamped_from, Some(at(6, 9, 0)));
        let text = encode_event(&late);
        assert!(text.ends_with(&format!(" clamped_from={}\n", at(6, 9, 0))));
        assert_eq!(decode_event(text.trim_end()).unwrap(), late);
    }

    #[test]
    fn encodes_the_documented_layout() {
        let e = LoggedEvent {
            seq: 3,
            ts: 1_700_000_000_000,
            payload: Payload::Notification { level_pct: 42.5, message_index: 7 },
            user: None,
            clamped_from: None,
        };
        assert_eq!(
            encode_event(&e),
            "seq=3 ts=1700000000000 kind=NOTIFICATION level_pct=42.5 message_index=7\n"
        );
        let e = LoggedEvent {
            payload: Payload::ConfigChange {
                changes: vec![("daily_goal_ml".into(), "1140".into()), ("active_start".into(), "08:30".into())],
            },
            user: Some("P 1".into()),
            ..e
        };
        assert_eq!(
            encode_event(&e),
            "seq=3 ts=1700000000000 kind=CONFIG_CHANGE daily_goal_ml=1140 active_start=08:30 user=P%201\n"
        );
        assert_eq!(decode_event(encode_event(&e).trim_end()).unwrap(), e);
    }

    #[test]
    fn rejects_invalid_records() {
        for bad in [
            "ts=1 seq=0 kind=SIP volume_ml=1",
            "seq=0 ts=1 kind=SIP",
            "seq=0 ts=1 kind=SIP volume_ml=0",
            "seq=0 ts=1 kind=SIP volume_ml=-2",
            "seq=0 ts=1 kind=NOPE",
            "seq=0 ts=1 kind=TIER_CHANGE old=2 new=2",
            "seq=0 ts=1 kind=TIER_CHANGE old=2 new=5",
            "seq=0 ts=1 kind=HISTORICAL_VIEW granularity=year",
            "seq=0 ts=1 kind=BOTTLE_ON extra=1",
            "seq=0 ts=1 kind=SIP volume_ml=1  ",
        ] {
            assert!(decode_event(bad).is_err(), "{bad}");
        }
        let err = parse_log("seq=1 ts=5 kind=BOTTLE_ON\nseq=1 ts=6 kind=BOTTLE_ON\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(parse_log("seq=0 ts=5 kind=BOTTLE_ON\nseq=1 ts=4 kind=BOTTLE_ON\n").is_err());
    }

    #[test]
    fn reload_from_disk_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.log");
        let (mut log, report) = EventLog::open(&path).unwrap();
        assert_eq!(report.recovered, 0);
        let a = log.append(at(6, 10, 0), sip(200.0), Some("P1".into())).unwrap();
        let b = log
            .append(at(6, 10, 5), Payload::HistoricalView { granularity: Granularity::Day }, None)
            .unwrap();
        drop(log);
        let (log, report) = EventLog::open(&path).unwrap();
        assert_eq!(report.recovered, 2);
        assert_eq!(log.events(), &[a, b]);
    }

    #[test]
    fn truncated_tail_is_dropped_on_open() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.log");
        std::fs::write(&path, "seq=0 ts=1 kind=SIP volume_ml=20\nseq=1 ts=2 kind=SIP volu").unwrap();
        let (mut log, report) = EventLog::open(&path).unwrap();
        assert_eq!(report.recovered, 1);
        assert_eq!(report.dropped_tail.as_deref(), Some("seq=1 ts=2 kind=SIP volu"));
        log.append(3, sip(5.0), None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "seq=0 ts=1 kind=SIP volume_ml=20\nseq=1 ts=3 kind=SIP volume_ml=5\n");
    }

    #[test]
    fn open_on_missing_directory_is_a_storage_failure() {
        let dir = tempfile::tempdir().unwrap();
        let err = EventLog::open(dir.path().join("nope/events.log")).unwrap_err();
        assert!(matches!(err, LogError::Storage { .. }));
    }

    #[test]
    fn queries_filter_kind_and_range() {
        let mut log = EventLog::in_memory();
        assert!(log.query(&[], 0, Millis::MAX).is_empty());
        log.append(at(5, 23, 0), sip(50.0), None).unwrap();
        log.append(at(6, 9, 0), sip(100.0), None).unwrap();
        log.append(at(6, 9, 30), Payload::Notification { level_pct: 10.0, message_index: 0 }, None)
            .unwrap();
        log.append(at(6, 11, 0), sip(150.0), None).unwrap();
        log.append(at(6, 12, 0), Payload::Notification { level_pct: 20.0, message_index: 1 }, None)
            .unwrap();
        log.append(at(6, 15, 0), sip(200.0), None).unwrap();
        let day = log.query(&[KindTag::Sip], at(6, 0, 0), at(6, 23, 59));
        assert_eq!(day.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![1, 3, 5]);
        let notes = log.query(&[KindTag::Notification], 0, Millis::MAX);
        assert_eq!(notes.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![2, 4]);
        assert_eq!(log.since(Some(3)).len(), 2);
        assert_eq!(log.since(None).len(), 6);
    }

    #[test]
    fn day_series_buckets_by_hour() {
        let zone = LocalZone::utc();
        let empty = history_series(&[], Granularity::Day, at(6, 12, 0), zone);
        assert_eq!(empty.points.len(), 24);
        assert!(empty.points.iter().all(|p| p.total_ml == 0.0));
        let week = history_series(&[], Granularity::Week, at(6, 12, 0), zone);
        assert_eq!(week.points.len(), 7);
        assert_eq!(week.points[6].label, "2024-05-06");

        let mut log = EventLog::in_memory();
        log.append(at(6, 10, 30), sip(200.0), None).unwrap();
        let day = log.history_series(Granularity::Day, at(6, 12, 0), zone);
        for p in &day.points {
            assert_eq!(p.total_ml, if p.label == "10" { 200.0 } else { 0.0 });
        }
        let total: f64 = day.points.iter().map(|p| p.total_ml).sum();
        assert_eq!(total, consumed_today(&log.sips(), at(6, 12, 0), zone));
    }

    #[test]
    fn sips_view_keeps_the_last_twenty() {
        let mut log = EventLog::in_memory();
        for i in 0..25 {
            log.append(at(6, 9, i), sip(10.0 + i as f64), None).unwrap();
        }
        let s = log.history_series(Granularity::Sips, at(6, 12, 0), LocalZone::utc());
        assert_eq!(s.points.len(), RECENT_SIPS);
        assert_eq!(s.points[0].total_ml, 15.0);
        assert_eq!(s.points[19].total_ml, 34.0);
        assert_eq!(s.points[0].label, "09:05:00");
    }
}
