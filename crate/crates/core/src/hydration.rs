//! Hydration pacing model.
//!
//! Intake is paced linearly against the daily goal over the active hours of
//! the day. The hydration level is the share of the expected-by-now intake
//! that has actually been consumed, clamped to 0..=100. The level then maps to
//! a three-way prompt band (20 / 80 thresholds) and a five-way feedback tier.

use chrono::NaiveTime;
use serde::Serialize;
use thiserror::Error;

use crate::time::{ms_since_midnight, LocalZone, Millis};

#[derive(Debug, Error, PartialEq)]
#[error("invalid hydration config: {0}")]
pub struct InvalidHydrationConfig(pub &'static str);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HydrationConfig {
    pub daily_goal_ml: f64,
    #[serde(serialize_with = "ser_time")]
    pub active_start: NaiveTime,
    #[serde(serialize_with = "ser_time")]
    pub active_end: NaiveTime,
    pub prompt_low_pct: f64,
    pub prompt_high_pct: f64,
    #[serde(serialize_with = "ser_zone")]
    pub zone: LocalZone,
}

fn ser_time<S: serde::Serializer>(t: &NaiveTime, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&t.format("%H:%M").to_string())
}

fn ser_zone<S: serde::Serializer>(z: &LocalZone, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_i32(z.offset_minutes())
}

impl Default for HydrationConfig {
    fn default() -> Self {
        HydrationConfig {
            daily_goal_ml: 2500.0,
            active_start: NaiveTime::from_hms_opt(9, 0, 0).unwrap(),
            active_end: NaiveTime::from_hms_opt(18, 0, 0).unwrap(),
            prompt_low_pct: 20.0,
            prompt_high_pct: 80.0,
            zone: LocalZone::utc(),
        }
    }
}

impl HydrationConfig {
    pub fn validate(&self) -> Result<(), InvalidHydrationConfig> {
        if !(self.active_start < self.active_end) {
            return Err(InvalidHydrationConfig("active_start must precede active_end"));
        }
        if !(0.0 < self.prompt_low_pct
            && self.prompt_low_pct < self.prompt_high_pct
            && self.prompt_high_pct < 100.0)
        {
            return Err(InvalidHydrationConfig("need 0 < prompt_low_pct < prompt_high_pct < 100"));
        }
        if !(self.daily_goal_ml > 0.0 && self.daily_goal_ml.is_finite()) {
            return Err(InvalidHydrationConfig("daily_goal_ml must be positive"));
        }
        Ok(())
    }

    /// Whether `ts` falls inside the active hours, both ends inclusive.
    pub fn is_active(&self, ts: Millis) -> bool {
        let t = self.zone.ms_of_day(ts);
        t >= ms_since_midnight(self.active_start) && t <= ms_since_midnight(self.active_end)
    }

    pub fn active_minutes(&self) -> i64 {
        (ms_since_midnight(self.active_end) - ms_since_midnight(self.active_start)) / 60_000
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PromptBand {
    Low,
    Mid,
    High,
}

impl PromptBand {
    pub fn as_str(&self) -> &'static str {
        match self {
            PromptBand::Low => "LOW",
            PromptBand::Mid => "MID",
            PromptBand::High => "HIGH",
        }
    }
}

/// Implicit-feedback level; 0 is the most hydrated artwork, 4 fully depleted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct FeedbackTier(u8);

impl FeedbackTier {
    pub const MOST_HYDRATED: FeedbackTier = FeedbackTier(0);
    pub const DEPLETED: FeedbackTier = FeedbackTier(4);

    pub fn new(value: u8) -> Option<Self> {
        (value <= 4).then_some(FeedbackTier(value))
    }

    pub fn value(&self) -> u8 {
        self.0
    }
}

/// A sip as the hydration model sees it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sip {
    pub ts: Millis,
    pub volume_ml: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HydrationSnapshot {
    pub ts: Millis,
    pub level_pct: f64,
    pub consumed_ml: f64,
    pub expected_ml: f64,
    pub goal_ml: f64,
    pub band: PromptBand,
    pub tier: FeedbackTier,
}

/// Total volume of the sips on `now`'s local calendar date.
pub fn consumed_today(sips: &[Sip], now: Millis, zone: LocalZone) -> f64 {
    let today = zone.date(now);
    sips.iter()
        .filter(|s| zone.date(s.ts) == today)
        .map(|s| s.volume_ml)
        .sum()
}

/// Intake expected by `now` under linear pacing across the active hours.
pub fn expected_intake(now: Millis, cfg: &HydrationConfig) -> f64 {
    let start = ms_since_midnight(cfg.active_start) as f64;
    let end = ms_since_midnight(cfg.active_end) as f64;
    let t = cfg.zone.ms_of_day(now) as f64;
    let frac = ((t - start) / (end - start)).clamp(0.0, 1.0);
    cfg.daily_goal_ml * frac
}

pub fn hydration_level(consumed_ml: f64, expected_ml: f64) -> f64 {
    if expected_ml <= 0.0 {
        return 100.0;
    }
    (consumed_ml / expected_ml).clamp(0.0, 1.0) * 100.0
}

/// LOW on [0, low), MID on [low, high), HIGH on [high, 100].
pub fn prompt_band(level_pct: f64, cfg: &HydrationConfig) -> PromptBand {
    if level_pct < cfg.prompt_low_pct {
        PromptBand::Low
    } else if level_pct < cfg.prompt_high_pct {
        PromptBand::Mid
    } else {
        PromptBand::High
    }
}

/// Tier boundaries are strict lower bounds: tier 0 is "above 80", tier 4 is
/// anything at or below 20.
pub fn feedback_tier(level_pct: f64) -> FeedbackTier {
    let tier = if level_pct > 80.0 {
        0
    } else if level_pct > 60.0 {
        1
    } else if level_pct > 40.0 {
        2
    } else if level_pct > 20.0 {
        3
    } else {
        4
    };
    FeedbackTier(tier)
}

/// (consumed today, daily goal). Over-completion is reported as is.
pub fn goal_completion(sips: &[Sip], now: Millis, cfg: &HydrationConfig) -> (f64, f64) {
    (consumed_today(sips, now, cfg.zone), cfg.daily_goal_ml)
}

pub fn snapshot(now: Millis, sips: &[Sip], cfg: &HydrationConfig) -> HydrationSnapshot {
    let consumed_ml = consumed_today(sips, now, cfg.zone);
    let expected_ml = expected_intake(now, cfg);
    let level_pct = hydration_level(consumed_ml, expected_ml);
    HydrationSnapshot {
        ts: now,
        level_pct,
        consumed_ml,
        expected_ml,
        goal_ml: cfg.daily_goal_ml,
        band: prompt_band(level_pct, cfg),
        tier: feedback_tier(level_pct),
    }
}
