//! Effectiveness of interventions and study-phase summaries.
//!
//! An intervention is *effective* when at least one sip follows it within
//! the five-minute window `(t, t + 300000]`. Per-kind rates are compared with
//! a Pearson chi-square test on the 2x2 table (no continuity correction).

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use crate::eventlog::{KindTag, LoggedEvent};
use crate::exec::Execution;
use crate::time::{date_range, LocalZone, Millis};

pub const EFFECT_WINDOW_MS: i64 = 300_000;

/// df = 1 critical values for p = 0.05, 0.01, 0.001.
pub const CHI2_CRITICAL_05: f64 = 3.841;
pub const CHI2_CRITICAL_01: f64 = 6.635;
pub const CHI2_CRITICAL_001: f64 = 10.828;

/// The three intervention kinds, in report order.
pub const INTERVENTION_KINDS: [KindTag; 3] = [KindTag::HistoricalView, KindTag::TierChange, KindTag::Notification];

pub fn intervention_label(kind: KindTag) -> &'static str {
    match kind {
        KindTag::HistoricalView => "Historical data",
        KindTag::TierChange => "Implicit feedback",
        KindTag::Notification => "Prompting",
        other => other.as_str(),
    }
}

/// Counts `(effective, total)` for `event_ts` against sorted `sip_ts`.
pub fn effective_count(event_ts: &[Millis], sip_ts: &[Millis], window_ms: i64) -> (usize, usize) {
    effective_count_with(event_ts, sip_ts, window_ms, Execution::default())
}

pub fn effective_count_with(
    event_ts: &[Millis],
    sip_ts: &[Millis],
    window_ms: i64,
    exec: Execution,
) -> (usize, usize) {
    debug_assert!(sip_ts.windows(2).all(|w| w[0] <= w[1]), "sips must be time-ordered");
    let effective = exec.count(event_ts, |&t| {
        let first_after = sip_ts.partition_point(|&s| s <= t);
        sip_ts.get(first_after).is_some_and(|&s| s <= t + window_ms)
    });
    (effective, event_ts.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectivenessRow {
    pub kind: KindTag,
    pub label: &'static str,
    pub total: usize,
    pub effective: usize,
    pub pct: f64,
}

impl EffectivenessRow {
    pub fn new(kind: KindTag, effective: usize, total: usize) -> Self {
        let pct = if total == 0 { 0.0 } else { 100.0 * effective as f64 / total as f64 };
        EffectivenessRow {
            kind,
            label: intervention_label(kind),
            total,
            effective,
            pct,
        }
    }
}

/// Splits a log into per-user groups; events without a user tag form one
/// group of their own.
fn by_user(events: &[LoggedEvent]) -> BTreeMap<Option<&str>, Vec<&LoggedEvent>> {
    let mut groups: BTreeMap<Option<&str>, Vec<&LoggedEvent>> = BTreeMap::new();
    for e in events {
        groups.entry(e.user.as_deref()).or_default().push(e);
    }
    groups
}

/// One row per intervention kind. Windows are evaluated within each user's
/// events and the counts pooled.
pub fn effectiveness_table(events: &[LoggedEvent]) -> Vec<EffectivenessRow> {
    effectiveness_table_with(events, Execution::default())
}

pub fn effectiveness_table_with(events: &[LoggedEvent], exec: Execution) -> Vec<EffectivenessRow> {
    let groups: Vec<(Vec<Millis>, [Vec<Millis>; 3])> = by_user(events)
        .into_values()
        .map(|group| {
            let sips: Vec<Millis> = group.iter().filter(|e| e.kind() == KindTag::Sip).map(|e| e.ts).collect();
            let per_kind = INTERVENTION_KINDS.map(|k| group.iter().filter(|e| e.kind() == k).map(|e| e.ts).collect());
            (sips, per_kind)
        })
        .collect();
    let kinds: Vec<usize> = (0..INTERVENTION_KINDS.len()).collect();
    exec.map(&kinds, |&k| {
        let (effective, total) = groups.iter().fold((0, 0), |(e, t), (sips, per_kind)| {
            let (de, dt) = effective_count_with(&per_kind[k], sips, EFFECT_WINDOW_MS, exec);
            (e + de, t + dt)
        });
        EffectivenessRow::new(INTERVENTION_KINDS[k], effective, total)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum PBucket {
    /// p >= 0.05
    NotSignificant,
    Below05,
    Below01,
    Below001,
}

impl PBucket {
    pub fn from_statistic(statistic: f64) -> Self {
        if statistic >= CHI2_CRITICAL_001 {
            PBucket::Below001
        } else if statistic >= CHI2_CRITICAL_01 {
            PBucket::Below01
        } else if statistic >= CHI2_CRITICAL_05 {
            PBucket::Below05
        } else {
            PBucket::NotSignificant
        }
    }
}

impl fmt::Display for PBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PBucket::NotSignificant => "p >= 0.05",
            PBucket::Below05 => "p < 0.05",
            PBucket::Below01 => "p < 0.01",
            PBucket::Below001 => "p < 0.001",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: u32,
    pub p_bucket: PBucket,
}

impl ChiSquareResult {
    /// Stand-in for a degenerate table: no evidence of association.
    pub fn null() -> Self {
        ChiSquareResult {
            statistic: 0.0,
            df: 1,
            p_bucket: PBucket::NotSignificant,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChiSquareError {
    #[error("a row or column margin of the 2x2 table is zero")]
    DegenerateTable,
    #[error("effective count {effective} exceeds total {total}")]
    InvalidCounts { effective: u64, total: u64 },
}

/// Pearson chi-square on `[[eff1, total1 - eff1], [eff2, total2 - eff2]]`.
pub fn chi_square_2x2(eff1: u64, total1: u64, eff2: u64, total2: u64) -> Result<ChiSquareResult, ChiSquareError> {
    for (effective, total) in [(eff1, total1), (eff2, total2)] {
        if effective > total {
            return Err(ChiSquareError::InvalidCounts { effective, total });
        }
    }
    let a = eff1 as f64;
    let b = (total1 - eff1) as f64;
    let c = eff2 as f64;
    let d = (total2 - eff2) as f64;
    let margins = [a + b, c + d, a + c, b + d];
    if margins.contains(&0.0) {
        return Err(ChiSquareError::DegenerateTable);
    }
    let n = a + b + c + d;
    let cross = a * d - b * c;
    let statistic = n * cross * cross / margins.iter().product::<f64>();
    Ok(ChiSquareResult {
        statistic,
        df: 1,
        p_bucket: PBucket::from_statistic(statistic),
    })
}

/// Chi-square between two effectiveness rows, degenerate tables mapped to
/// [`ChiSquareResult::null`].
pub fn compare_rows(first: &EffectivenessRow, second: &EffectivenessRow) -> ChiSquareResult {
    chi_square_2x2(
        first.effective as u64,
        first.total as u64,
        second.effective as u64,
        second.total as u64,
    )
    .unwrap_or_else(|_| ChiSquareResult::null())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    A1,
    B,
    A2,
}

impl Phase {
    pub const ORDER: [Phase; 3] = [Phase::A1, Phase::B, Phase::A2];

    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::A1 => "A1",
            Phase::B => "B",
            Phase::A2 => "A2",
        }
    }
}

/// Inclusive local date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DateSpan {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateSpan {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        DateSpan { start, end }
    }

    /// `3/15/3`-style split starting at `first`.
    pub fn split(first: NaiveDate, lengths: [u32; 3]) -> [DateSpan; 3] {
        let mut start = first;
        lengths.map(|len| {
            let span = DateSpan::new(start, start + chrono::Duration::days(len as i64 - 1));
            start += chrono::Duration::days(len as i64);
            span
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PhaseError {
    #[error("phase ranges overlap or are out of order")]
    OverlappingPhases,
    #[error("phase {0} ends before it starts")]
    EmptyRange(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSummary {
    pub phase: Phase,
    pub days: usize,
    pub mean_daily_ml: f64,
    pub per_day: Vec<(NaiveDate, f64)>,
}

impl PhaseSummary {
    /// Mean of the per-day totals over `range` (indices into `per_day`).
    pub fn mean_over(&self, range: std::ops::Range<usize>) -> f64 {
        let days = &self.per_day[range];
        if days.is_empty() {
            return 0.0;
        }
        days.iter().map(|(_, v)| v).sum::<f64>() / days.len() as f64
    }
}

/// Per-phase daily SIP totals (all users pooled) for three ordered,
/// non-overlapping date ranges.
pub fn phase_summary(events: &[LoggedEvent], phases: &[DateSpan; 3], zone: LocalZone) -> Result<Vec<PhaseSummary>, PhaseError> {
    for (p, span) in Phase::ORDER.iter().zip(phases) {
        if span.end < span.start {
            return Err(PhaseError::EmptyRange(p.as_str()));
        }
    }
    if phases.windows(2).any(|w| w[1].start <= w[0].end) {
        return Err(PhaseError::OverlappingPhases);
    }
    let mut daily: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for s in events.iter().filter_map(LoggedEvent::as_sip) {
        *daily.entry(zone.date(s.ts)).or_default() += s.volume_ml;
    }
    Ok(Phase::ORDER
        .iter()
        .zip(phases)
        .map(|(&phase, span)| {
            let per_day: Vec<(NaiveDate, f64)> = date_range(span.start, span.end)
                .into_iter()
                .map(|d| (d, daily.get(&d).copied().unwrap_or(0.0)))
                .collect();
            let days = per_day.len();
            let mean_daily_ml = per_day.iter().map(|(_, v)| v).sum::<f64>() / days as f64;
            PhaseSummary { phase, days, mean_daily_ml, per_day }
        })
        .collect())
}
