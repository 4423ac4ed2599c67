//! Timestamps and local-calendar helpers.
//!
//! All timestamps are milliseconds since the Unix epoch (UTC). Local dates and
//! times of day are derived with a fixed UTC offset.

use chrono::{DateTime, Duration, FixedOffset, NaiveDate, NaiveTime, TimeZone, Timelike, Utc};

/// Milliseconds since the Unix epoch, UTC.
pub type Millis = i64;

pub const MINUTE_MS: i64 = 60_000;
pub const HOUR_MS: i64 = 60 * MINUTE_MS;
pub const DAY_MS: i64 = 24 * HOUR_MS;

/// A fixed offset from UTC used for calendar-day and time-of-day questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalZone {
    offset_min: i32,
}

impl Default for LocalZone {
    fn default() -> Self {
        LocalZone::utc()
    }
}

impl LocalZone {
    pub fn utc() -> Self {
        LocalZone { offset_min: 0 }
    }

    /// Returns `None` unless the offset is within +-18 hours.
    pub fn from_offset_minutes(offset_min: i32) -> Option<Self> {
        FixedOffset::east_opt(offset_min * 60).map(|_| LocalZone { offset_min })
    }

    pub fn offset_minutes(&self) -> i32 {
        self.offset_min
    }

    fn offset(&self) -> FixedOffset {
        FixedOffset::east_opt(self.offset_min * 60).expect("validated offset")
    }

    fn local(&self, ts: Millis) -> DateTime<FixedOffset> {
        Utc.timestamp_millis_opt(ts)
            .single()
            .unwrap_or_else(|| Utc.timestamp_millis_opt(0).unwrap())
            .with_timezone(&self.offset())
    }

    pub fn date(&self, ts: Millis) -> NaiveDate {
        self.local(ts).date_naive()
    }

    pub fn time_of_day(&self, ts: Millis) -> NaiveTime {
        self.local(ts).time()
    }

    /// Milliseconds elapsed since local midnight.
    pub fn ms_of_day(&self, ts: Millis) -> i64 {
        let t = self.time_of_day(ts);
        t.num_seconds_from_midnight() as i64 * 1000 + (t.nanosecond() / 1_000_000) as i64
    }

    pub fn hour(&self, ts: Millis) -> u32 {
        self.time_of_day(ts).hour()
    }

    /// Timestamp of `time` on local `date`.
    pub fn at(&self, date: NaiveDate, time: NaiveTime) -> Millis {
        let naive = date.and_time(time);
        self.offset()
            .from_local_datetime(&naive)
            .single()
            .expect("fixed offsets are never ambiguous")
            .timestamp_millis()
    }

    pub fn midnight(&self, date: NaiveDate) -> Millis {
        self.at(date, NaiveTime::MIN)
    }

    /// Timestamp of `time` on the same local date as `ts`.
    pub fn same_day_at(&self, ts: Millis, time: NaiveTime) -> Millis {
        self.at(self.date(ts), time)
    }
}

/// Milliseconds from midnight represented by a time of day.
pub fn ms_since_midnight(t: NaiveTime) -> i64 {
    t.num_seconds_from_midnight() as i64 * 1000 + (t.nanosecond() / 1_000_000) as i64
}

/// Parses "HH:MM" or "HH:MM:SS".
pub fn parse_time_of_day(s: &str) -> Option<NaiveTime> {
    NaiveTime::parse_from_str(s, "%H:%M")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M:%S"))
        .ok()
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

/// The inclusive list of dates from `start` to `end`.
pub fn date_range(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut d = start;
    while d <= end {
        out.push(d);
        d += Duration::days(1);
    }
    out
}
