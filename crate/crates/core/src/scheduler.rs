//! Prompting and implicit-feedback scheduling.
//!
//! Prompts are spaced by the user's preferred interval scaled by a per-band
//! multiplier: low hydration prompts more often, high hydration less often.
//! Each prompt carries the next of ten rotating messages. Tier changes are
//! reported whenever the snapshot's feedback tier differs from the last one
//! seen.

use serde::Serialize;
use thiserror::Error;

use crate::hydration::{FeedbackTier, HydrationConfig, HydrationSnapshot, PromptBand};
use crate::time::{Millis, MINUTE_MS};

pub const MESSAGE_COUNT: usize = 10;

/// Built-in message rotation. The first three come from the original field
/// deployment; the rest are placeholders.
pub const DEFAULT_MESSAGES: [&str; MESSAGE_COUNT] = [
    "water is good",
    "Drinking water helps you feel more energetic",
    "Drinking water can make you more productive",
    // placeholders
    "A glass of water keeps you going",
    "Water keeps your mind clear",
    "Time for a sip",
    "Your body likes water",
    "Stay fresh, drink water",
    "Water helps you focus",
    "Small sips add up",
];

#[derive(Debug, Error, PartialEq)]
pub enum InvalidSchedulerConfig {
    #[error("expected exactly {MESSAGE_COUNT} messages, got {0}")]
    MessageCount(usize),
    #[error("preferred_interval_min must be positive")]
    Interval,
    #[error("band multipliers must be positive with LOW <= MID <= HIGH")]
    Multipliers,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandMultipliers {
    pub low: f64,
    pub mid: f64,
    pub high: f64,
}

impl Default for BandMultipliers {
    fn default() -> Self {
        BandMultipliers { low: 0.5, mid: 1.0, high: 2.0 }
    }
}

impl BandMultipliers {
    pub fn get(&self, band: PromptBand) -> f64 {
        match band {
            PromptBand::Low => self.low,
            PromptBand::Mid => self.mid,
            PromptBand::High => self.high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchedulerConfig {
    pub preferred_interval_min: u32,
    pub band_multiplier: BandMultipliers,
    pub messages: Vec<String>,
    pub quiet_outside_active_hours: bool,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            preferred_interval_min: 60,
            band_multiplier: BandMultipliers::default(),
            messages: DEFAULT_MESSAGES.iter().map(|s| s.to_string()).collect(),
            quiet_outside_active_hours: true,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), InvalidSchedulerConfig> {
        if self.messages.len() != MESSAGE_COUNT {
            return Err(InvalidSchedulerConfig::MessageCount(self.messages.len()));
        }
        if self.preferred_interval_min == 0 {
            return Err(InvalidSchedulerConfig::Interval);
        }
        let m = &self.band_multiplier;
        if !(m.low > 0.0 && m.low <= m.mid && m.mid <= m.high && m.high.is_finite()) {
            return Err(InvalidSchedulerConfig::Multipliers);
        }
        Ok(())
    }

    pub fn message(&self, index: usize) -> Option<&str> {
        self.messages.get(index).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum InterventionKind {
    Notification { level_pct: f64, message_index: usize },
    TierChange { old_tier: FeedbackTier, new_tier: FeedbackTier },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterventionEvent {
    pub ts: Millis,
    pub kind: InterventionKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    pub last_prompt_ts: Millis,
    pub message_cursor: usize,
    pub current_tier: FeedbackTier,
    /// Delay that was in force when the last prompt fired.
    pub armed_delay_ms: Option<i64>,
}

impl SchedulerState {
    pub fn new(start: Millis, tier: FeedbackTier) -> Self {
        SchedulerState {
            last_prompt_ts: start,
            message_cursor: 0,
            current_tier: tier,
            armed_delay_ms: None,
        }
    }

    /// Forgets the delay armed by the previous prompt, so a preference change
    /// applies from the next tick.
    pub fn rearm(&mut self) {
        self.armed_delay_ms = None;
    }
}

pub fn next_prompt_delay(band: PromptBand, cfg: &SchedulerConfig) -> i64 {
    let minutes = cfg.preferred_interval_min as f64 * cfg.band_multiplier.get(band);
    (minutes * MINUTE_MS as f64).round() as i64
}

/// Returns the message index at the cursor and the advanced state.
pub fn pick_message(state: &SchedulerState) -> (usize, SchedulerState) {
    let index = state.message_cursor % MESSAGE_COUNT;
    let next = SchedulerState {
        message_cursor: (index + 1) % MESSAGE_COUNT,
        ..state.clone()
    };
    (index, next)
}

/// One scheduling step at time `now`.
pub fn tick(
    now: Millis,
    snapshot: &HydrationSnapshot,
    state: &SchedulerState,
    cfg: &SchedulerConfig,
    hydration: &HydrationConfig,
) -> (SchedulerState, Vec<InterventionEvent>) {
    let mut next = state.clone();
    let mut events = Vec::new();

    let allowed = !cfg.quiet_outside_active_hours || hydration.is_active(now);
    if allowed {
        let since = if cfg.quiet_outside_active_hours {
            // quiet hours do not accrue towards the next prompt
            state
                .last_prompt_ts
                .max(hydration.zone.same_day_at(now, hydration.active_start))
        } else {
            state.last_prompt_ts
        };
        let delay = next_prompt_delay(snapshot.band, cfg);
        let required = state.armed_delay_ms.map_or(delay, |armed| armed.max(delay));
        if now - since >= required {
            let (message_index, picked) = pick_message(&next);
            next = picked;
            next.last_prompt_ts = now;
            next.armed_delay_ms = Some(delay);
            events.push(InterventionEvent {
                ts: now,
                kind: InterventionKind::Notification {
                    level_pct: snapshot.level_pct,
                    message_index,
                },
            });
        }
    }

    if snapshot.tier != state.current_tier {
        events.push(InterventionEvent {
            ts: now,
            kind: InterventionKind::TierChange {
                old_tier: state.current_tier,
                new_tier: snapshot.tier,
            },
        });
        next.current_tier = snapshot.tier;
    }

    (next, events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydration::feedback_tier;
    use crate::time::LocalZone;
    use chrono::{NaiveDate, NaiveTime};

    fn at(h: u32, m: u32) -> Millis {
        LocalZone::utc().at(
            NaiveDate::from_ymd_opt(2024, 5, 6).unwrap(),
            NaiveTime::from_hms_opt(h, m, 0).unwrap(),
        )
    }

    fn snap(ts: Millis, level: f64, band: PromptBand) -> HydrationSnapshot {
        HydrationSnapshot {
            ts,
            level_pct: level,
            consumed_ml: 0.0,
            expected_ml: 0.0,
            goal_ml: 2500.0,
            band,
            tier: feedback_tier(level),
        }
    }

    #[test]
    fn delays_scale_with_band() {
        let cfg = SchedulerConfig::default();
        assert_eq!(next_prompt_delay(PromptBand::Mid, &cfg), 60 * MINUTE_MS);
        assert_eq!(next_prompt_delay(PromptBand::Low, &cfg), 30 * MINUTE_MS);
        let cfg30 = SchedulerConfig { preferred_interval_min: 30, ..Default::default() };
        assert_eq!(next_prompt_delay(PromptBand::High, &cfg30), 60 * MINUTE_MS);
    }

    #[test]
    fn message_cursor_wraps() {
        let s = SchedulerState::new(0, FeedbackTier::MOST_HYDRATED);
        let (i, s) = pick_message(&s);
        assert_eq!((i, s.message_cursor), (0, 1));
        let s9 = SchedulerState { message_cursor: 9, ..s };
        let (i, s) = pick_message(&s9);
        assert_eq!((i, s.message_cursor), (9, 0));
    }

    #[test]
    fn twenty_picks_cover_each_message_twice() {
        let mut s = SchedulerState::new(0, FeedbackTier::MOST_HYDRATED);
        let mut counts = [0; MESSAGE_COUNT];
        for _ in 0..20 {
            let (i, n) = pick_message(&s);
            counts[i] += 1;
            s = n;
        }
        assert_eq!(counts, [2; MESSAGE_COUNT]);
    }

    #[test]
    fn nothing_happens_before_the_interval() {
        let cfg = SchedulerConfig::default();
        let h = HydrationConfig::default();
        let state = SchedulerState::new(at(10, 0), feedback_tier(50.0));
        let (next, events) = tick(at(10, 30), &snap(at(10, 30), 50.0, PromptBand::Mid), &state, &cfg, &h);
        assert!(events.is_empty());
        assert_eq!(next, state);
    }

    #[test]
    fn tier_drop_is_reported() {
        let cfg = SchedulerConfig::default();
        let h = HydrationConfig::default();
        let state = SchedulerState::new(at(10, 0), FeedbackTier::new(1).unwrap());
        let (next, events) = tick(at(10, 1), &snap(at(10, 1), 50.0, PromptBand::Mid), &state, &cfg, &h);
        assert_eq!(
            events,
            vec![InterventionEvent {
                ts: at(10, 1),
                kind: InterventionKind::TierChange {
                    old_tier: FeedbackTier::new(1).unwrap(),
                    new_tier: FeedbackTier::new(2).unwrap()
                }
            }]
        );
        assert_eq!(next.current_tier.value(), 2);
    }

    #[test]
    fn notification_and_tier_change_on_one_tick() {
        let cfg = SchedulerConfig::default();
        let h = HydrationConfig::default();
        let state = SchedulerState::new(at(10, 0), FeedbackTier::new(1).unwrap());
        let (next, events) = tick(at(11, 0), &snap(at(11, 0), 50.0, PromptBand::Mid), &state, &cfg, &h);
        assert_eq!(events.len(), 2);
        assert!(matches!(events[0].kind, InterventionKind::Notification { message_index: 0, .. }));
        assert_eq!(next.message_cursor, 1);
        assert_eq!(next.last_prompt_ts, at(11, 0));
    }

    #[test]
    fn quiet_hours_suppress_and_do_not_accrue() {
        let cfg = SchedulerConfig::default();
        let h = HydrationConfig::default();
        let state = SchedulerState::new(at(0, 0), feedback_tier(50.0));
        let (s, ev) = tick(at(8, 30), &snap(at(8, 30), 50.0, PromptBand::Mid), &state, &cfg, &h);
        assert!(ev.is_empty());
        let (_, ev) = tick(at(9, 30), &snap(at(9, 30), 50.0, PromptBand::Mid), &s, &cfg, &h);
        assert!(ev.is_empty(), "only 30 active minutes elapsed");
        let (_, ev) = tick(at(10, 0), &snap(at(10, 0), 50.0, PromptBand::Mid), &s, &cfg, &h);
        assert_eq!(ev.len(), 1);

        let loud = SchedulerConfig { quiet_outside_active_hours: false, ..Default::default() };
        let (_, ev) = tick(at(8, 30), &snap(at(8, 30), 50.0, PromptBand::Mid), &state, &loud, &h);
        assert_eq!(ev.len(), 1);
    }

    #[test]
    fn armed_delay_holds_after_band_drop() {
        let cfg = SchedulerConfig::default();
        let h = HydrationConfig::default();
        let state = SchedulerState::new(at(9, 0), feedback_tier(90.0));
        let (s, ev) = tick(at(11, 0), &snap(at(11, 0), 90.0, PromptBand::High), &state, &cfg, &h);
        assert_eq!(ev.len(), 1);
        // band now LOW; the HIGH delay (120 min) armed at 11:00 still applies
        let (_, ev) = tick(at(11, 30), &snap(at(11, 30), 90.0, PromptBand::Low), &s, &cfg, &h);
        assert!(ev.is_empty());
        let mut s2 = s.clone();
        s2.rearm();
        let (_, ev) = tick(at(11, 30), &snap(at(11, 30), 90.0, PromptBand::Low), &s2, &cfg, &h);
        assert_eq!(ev.len(), 1);
    }

    #[test]
    fn config_validation() {
        assert!(SchedulerConfig::default().validate().is_ok());
        let mut c = SchedulerConfig::default();
        c.messages.pop();
        assert_eq!(c.validate(), Err(InvalidSchedulerConfig::MessageCount(9)));
        let c = SchedulerConfig {
            band_multiplier: BandMultipliers { low: 2.0, mid: 1.0, high: 0.5 },
            ..Default::default()
        };
        assert_eq!(c.validate(), Err(InvalidSchedulerConfig::Multipliers));
        let c = SchedulerConfig { preferred_interval_min: 0, ..Default::default() };
        assert_eq!(c.validate(), Err(InvalidSchedulerConfig::Interval));
    }
}
