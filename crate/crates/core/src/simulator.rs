//! Seeded generators for labelled weight traces and synthetic study logs.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64`, so a seed fully
//! determines the output on every platform.

use chrono::{NaiveDate, NaiveTime};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{EFFECT_WINDOW_MS, INTERVENTION_KINDS};
use crate::eventlog::{Granularity, KindTag, LoggedEvent, Payload};
use crate::exec::Execution;
use crate::hydration::FeedbackTier;
use crate::kv::{KvError, KvMap};
use crate::scheduler::MESSAGE_COUNT;
use crate::sensing::{SensorEvent, SensorEventKind, WeightSample};
use crate::time::{ms_since_midnight, parse_date, parse_time_of_day, LocalZone, Millis, DAY_MS};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("scripted volumes take the bottle below {threshold_g} g at action {index}")]
    ScenarioOverflow { index: usize, threshold_g: f64 },
    #[error("bad scenario: {0}")]
    BadScenario(String),
    #[error(transparent)]
    Config(#[from] KvError),
}

fn bad(msg: impl Into<String>) -> SimError {
    SimError::BadScenario(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScriptedAction {
    Sip(f64),
    Refill(f64),
    OffOnNoChange,
}

/// One scripted lift, `at_ms` after the trace start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scripted {
    pub at_ms: i64,
    pub action: ScriptedAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceScenario {
    pub seed: u64,
    pub start_ts: Millis,
    pub duration_ms: i64,
    pub baseline_g: f64,
    /// Uniform noise in `[-a, a]` added to every sample.
    pub noise_amplitude_g: f64,
    pub sample_period_ms: i64,
    /// How long the bottle stays off the scale per action.
    pub off_duration_ms: i64,
    /// Minimum on-scale time after a return (and at the start).
    pub settle_ms: i64,
    pub off_scale_threshold_g: f64,
    pub scripted: Vec<Scripted>,
}

impl Default for TraceScenario {
    fn default() -> Self {
        TraceScenario {
            seed: 0,
            start_ts: 1_700_000_000_000,
            duration_ms: 60_000,
            baseline_g: 500.0,
            noise_amplitude_g: 0.0,
            sample_period_ms: 200,
            off_duration_ms: 3000,
            settle_ms: 2500,
            off_scale_threshold_g: 30.0,
            scripted: Vec::new(),
        }
    }
}

impl TraceScenario {
    /// A random valid scenario: 1..=6 actions of mixed kinds with noise
    /// strictly below `max_noise_g`.
    pub fn random(seed: u64, max_noise_g: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7ace);
        let base = TraceScenario::default();
        let n = rng.random_range(1..=6);
        let mut weight: f64 = rng.random_range(400.0..900.0);
        let baseline_g = (weight * 10.0).round() / 10.0;
        weight = baseline_g;
        let mut at = base.settle_ms + rng.random_range(0..2000);
        let mut scripted = Vec::with_capacity(n);
        for _ in 0..n {
            let roll: f64 = rng.random();
            let action = if roll < 0.6 && weight > 150.0 {
                let v = (rng.random_range(10.0..(weight - 100.0).min(250.0)) * 10.0_f64).round() / 10.0;
                weight -= v;
                ScriptedAction::Sip(v)
            } else if roll < 0.85 {
                let v = (rng.random_range(10.0..400.0) * 10.0_f64).round() / 10.0;
                weight += v;
                ScriptedAction::Refill(v)
            } else {
                ScriptedAction::OffOnNoChange
            };
            scripted.push(Scripted { at_ms: at, action });
            at += base.off_duration_ms + base.settle_ms + rng.random_range(0..5000);
        }
        TraceScenario {
            seed,
            baseline_g,
            noise_amplitude_g: rng.random_range(0.0..max_noise_g),
            duration_ms: at + 1000,
            scripted,
            ..base
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.sample_period_ms <= 0 || self.duration_ms < 0 || self.off_duration_ms <= 0 || self.settle_ms < 0 {
            return Err(bad("periods and durations must be positive"));
        }
        if !(0.0..).contains(&self.noise_amplitude_g) || self.baseline_g.is_nan() || self.baseline_g <= 0.0 {
            return Err(bad("noise must be >= 0 and baseline > 0"));
        }
        let mut earliest = self.settle_ms;
        for (i, s) in self.scripted.iter().enumerate() {
            if s.at_ms < earliest {
                return Err(bad(format!("action {i} at {} ms overlaps the previous one", s.at_ms)));
            }
            if let ScriptedAction::Sip(v) | ScriptedAction::Refill(v) = s.action {
                if v.is_nan() || v <= 0.0 {
                    return Err(bad(format!("action {i} has a non-positive volume")));
                }
            }
            earliest = s.at_ms + self.off_duration_ms + self.settle_ms;
        }
        if self.duration_ms < earliest {
            return Err(bad("trace ends before the last action settles"));
        }
        Ok(())
    }
}

/// Samples plus the events a perfect detector would report, excluding the
/// initial placement. `BottleOn`/`Sip`/`Refill` carry the return time; a
/// detector reports them once the readings have settled, somewhat later.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTrace {
    pub samples: Vec<WeightSample>,
    pub truth: Vec<SensorEvent>,
}

pub fn gen_trace(scenario: &TraceScenario) -> Result<GeneratedTrace, SimError> {
    scenario.validate()?;
    let sc = scenario;

    // weight after each action
    let mut weights = Vec::with_capacity(sc.scripted.len());
    let mut w = sc.baseline_g;
    for (index, s) in sc.scripted.iter().enumerate() {
        match s.action {
            ScriptedAction::Sip(v) => w -= v,
            ScriptedAction::Refill(v) => w += v,
            ScriptedAction::OffOnNoChange => {}
        }
        if w - sc.noise_amplitude_g < sc.off_scale_threshold_g {
            return Err(SimError::ScenarioOverflow {
                index,
                threshold_g: sc.off_scale_threshold_g,
            });
        }
        weights.push(w);
    }
    if sc.baseline_g - sc.noise_amplitude_g < sc.off_scale_threshold_g {
        return Err(SimError::ScenarioOverflow {
            index: 0,
            threshold_g: sc.off_scale_threshold_g,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut samples = Vec::with_capacity((sc.duration_ms / sc.sample_period_ms + 1) as usize);
    let mut action = 0;
    let mut current = sc.baseline_g;
    let mut offset = 0;
    while offset <= sc.duration_ms {
        while action < sc.scripted.len() && offset >= sc.scripted[action].at_ms + sc.off_duration_ms {
            current = weights[action];
            action += 1;
        }
        let lifted = action < sc.scripted.len() && offset >= sc.scripted[action].at_ms;
        let truth_g = if lifted { 0.0 } else { current };
        let noise = if sc.noise_amplitude_g > 0.0 {
            rng.random_range(-sc.noise_amplitude_g..=sc.noise_amplitude_g)
        } else {
            0.0
        };
        samples.push(WeightSample {
            ts: sc.start_ts + offset,
            grams: (truth_g + noise).max(0.0),
        });
        offset += sc.sample_period_ms;
    }

    let first_at = |t: i64| {
        let k = (t + sc.sample_period_ms - 1).div_euclid(sc.sample_period_ms);
        sc.start_ts + k * sc.sample_period_ms
    };
    let mut truth = Vec::new();
    for s in &sc.scripted {
        truth.push(SensorEvent {
            ts: first_at(s.at_ms),
            kind: SensorEventKind::BottleOff,
        });
        let on = first_at(s.at_ms + sc.off_duration_ms);
        truth.push(SensorEvent { ts: on, kind: SensorEventKind::BottleOn });
        match s.action {
            ScriptedAction::Sip(v) => truth.push(SensorEvent {
                ts: on,
                kind: SensorEventKind::Sip { volume_ml: v },
            }),
            ScriptedAction::Refill(v) => truth.push(SensorEvent {
                ts: on,
                kind: SensorEventKind::Refill { volume_ml: v },
            }),
            ScriptedAction::OffOnNoChange => {}
        }
    }
    Ok(GeneratedTrace { samples, truth })
}

pub fn gen_traces(scenarios: &[TraceScenario], exec: Execution) -> Vec<Result<GeneratedTrace, SimError>> {
    exec.map(scenarios, gen_trace)
}

/// Per-kind values in report order: historical view, tier change, notification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerKind<T> {
    pub historical: T,
    pub tier_change: T,
    pub notification: T,
}

impl<T: Copy> PerKind<T> {
    pub fn get(&self, kind: KindTag) -> T {
        match kind {
            KindTag::HistoricalView => self.historical,
            KindTag::TierChange => self.tier_change,
            _ => self.notification,
        }
    }

    fn as_array(&self) -> [T; 3] {
        [self.historical, self.tier_change, self.notification]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyProfile {
    pub seed: u64,
    pub start_date: NaiveDate,
    /// A1 / B / A2 lengths in days; their sum is the study length.
    pub phase_days: [u32; 3],
    pub users: u32,
    pub base_daily_ml: f64,
    /// Relative intake increase at the start of phase B.
    pub novelty_boost: f64,
    pub novelty_duration_days: u32,
    /// Days of linear decay from the boosted level back to base.
    pub novelty_decay_days: u32,
    /// Uniform relative jitter on each user-day's intake target.
    pub daily_jitter: f64,
    pub response_prob: PerKind<f64>,
    /// Total events of each kind over phase B, all users.
    pub event_counts: PerKind<u32>,
    /// When set, exactly this many events of each kind get a response
    /// (chosen uniformly) instead of drawing with `response_prob`.
    pub effective_counts: Option<PerKind<u32>>,
    pub zone: LocalZone,
    pub active_start: NaiveTime,
    pub active_end: NaiveTime,
    pub sip_ml: (f64, f64),
}

impl Default for StudyProfile {
    fn default() -> Self {
        StudyProfile {
            seed: 0,
            start_date: NaiveDate::from_ymd_opt(2024, 1, 8).unwrap(),
            phase_days: [3, 15, 3],
            users: 6,
            base_daily_ml: 1500.0,
            novelty_boost: 0.5,
            novelty_duration_days: 6,
            novelty_decay_days: 2,
            daily_jitter: 0.05,
            response_prob: PerKind {
                historical: 0.304,
                tier_change: 0.1708,
                notification: 0.0716,
            },
            event_counts: PerKind {
                historical: 454,
                tier_change: 638,
                notification: 1383,
            },
            effective_counts: None,
            zone: LocalZone::utc(),
            active_start: NaiveTime::from_hms_opt(9, 0, 0).unwrap(),
            active_end: NaiveTime::from_hms_opt(18, 0, 0).unwrap(),
            sip_ml: (80.0, 250.0),
        }
    }
}

/// Spacing of intervention slots; longer than the effectiveness window so
/// windows of one user never overlap.
const SLOT_MS: i64 = EFFECT_WINDOW_MS + 60_000;
const MIN_SIP_ML: f64 = 5.0;

impl StudyProfile {
    pub fn days(&self) -> u32 {
        self.phase_days.iter().sum()
    }

    fn slots_per_day(&self) -> usize {
        let span = ms_since_midnight(self.active_end) - ms_since_midnight(self.active_start);
        (span / SLOT_MS).max(0) as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.users == 0 || self.phase_days[1] == 0 {
            return Err(bad("need at least one user and one intervention day"));
        }
        if self.active_start >= self.active_end {
            return Err(bad("active_start must precede active_end"));
        }
        if self.response_prob.as_array().iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(bad("response probabilities must lie in [0, 1]"));
        }
        if !(0.0..).contains(&self.base_daily_ml) || !(0.0..).contains(&self.novelty_boost) || !(0.0..1.0).contains(&self.daily_jitter) {
            return Err(bad("intake parameters out of range"));
        }
        if !(MIN_SIP_ML <= self.sip_ml.0 && self.sip_ml.0 < self.sip_ml.1) {
            return Err(bad("sip volume range must be increasing and at least 5 mL"));
        }
        if let Some(eff) = &self.effective_counts {
            let over = eff.as_array().iter().zip(self.event_counts.as_array()).any(|(&e, c)| e > c);
            if over {
                return Err(bad("effective counts exceed event counts"));
            }
        }
        let capacity = self.slots_per_day() as u64 * self.users as u64 * self.phase_days[1] as u64;
        let wanted: u64 = self.event_counts.as_array().iter().map(|&c| c as u64).sum();
        if wanted > capacity {
            return Err(bad(format!("{wanted} events do not fit in {capacity} intervention slots")));
        }
        Ok(())
    }

    /// Intake multiplier for study day `day` (0-based).
    pub fn intake_multiplier(&self, day: u32) -> f64 {
        let [a1, b, _] = self.phase_days;
        if day < a1 || day >= a1 + b {
            return 1.0;
        }
        let i = day - a1;
        if i < self.novelty_duration_days {
            1.0 + self.novelty_boost
        } else {
            let k = (i - self.novelty_duration_days + 1) as f64;
            let decay = self.novelty_decay_days as f64;
            1.0 + self.novelty_boost * (1.0 - k / (decay + 1.0)).max(0.0)
        }
    }

    pub fn phase_spans(&self) -> [crate::analysis::DateSpan; 3] {
        crate::analysis::DateSpan::split(self.start_date, self.phase_days)
    }
}

struct Draft {
    ts: Millis,
    user: u32,
    payload: Payload,
}

/// Generates a complete multi-user study log, seq-numbered and time-ordered.
pub fn gen_study(profile: &StudyProfile) -> Result<Vec<LoggedEvent>, SimError> {
    profile.validate()?;
    let p = profile;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let [a1, b_days, _] = p.phase_days;
    let users = p.users as usize;
    let slots = p.slots_per_day();

    // assign phase-B events to user-days
    let cells = users * b_days as usize;
    let mut plan: Vec<Vec<(usize, Option<bool>)>> = vec![Vec::new(); cells];
    for (k, &count) in p.event_counts.as_array().iter().enumerate() {
        let mut responds: Vec<Option<bool>> = vec![None; count as usize];
        if let Some(eff) = &p.effective_counts {
            responds.fill(Some(false));
            for i in sample_indices(&mut rng, count as usize, eff.as_array()[k] as usize) {
                responds[i] = Some(true);
            }
        }
        for response in responds {
            loop {
                let cell = rng.random_range(0..cells);
                if plan[cell].len() < slots {
                    plan[cell].push((k, response));
                    break;
                }
            }
        }
    }

    let mut drafts: Vec<Draft> = Vec::new();
    let mut cursors = vec![0usize; users];
    let mut tiers = vec![2u8; users];
    let start_ms = ms_since_midnight(p.active_start);
    let end_ms = ms_since_midnight(p.active_end);
    let probs = p.response_prob.as_array();

    for day in 0..p.days() {
        let date = p.start_date + chrono::Duration::days(day as i64);
        let midnight = p.zone.midnight(date);
        let day_start = midnight + start_ms;
        let day_end = midnight + end_ms;
        let mult = p.intake_multiplier(day);
        for user in 0..users {
            let target = p.base_daily_ml * mult * (1.0 + p.daily_jitter * rng.random_range(-1.0..=1.0));
            let mut consumed = 0.0;
            let mut windows: Vec<Millis> = Vec::new();

            let in_b = day >= a1 && day < a1 + b_days;
            if in_b {
                let cell = &mut plan[(day - a1) as usize * users + user];
                // shuffle kinds onto distinct slots
                let chosen = sample_indices(&mut rng, slots, cell.len()).into_vec();
                let mut placed: Vec<(usize, (usize, Option<bool>))> = chosen.into_iter().zip(cell.drain(..)).collect();
                placed.sort_unstable();
                for (slot, (k, response)) in placed {
                    let ts = day_start + slot as i64 * SLOT_MS + rng.random_range(0..60_000);
                    windows.push(ts);
                    let payload = match INTERVENTION_KINDS[k] {
                        KindTag::HistoricalView => Payload::HistoricalView {
                            granularity: [Granularity::Week, Granularity::Day, Granularity::Sips][rng.random_range(0..3)],
                        },
                        KindTag::TierChange => {
                            let old = tiers[user];
                            let new = match old {
                                0 => 1,
                                4 => 3,
                                t if rng.random_bool(0.5) => t + 1,
                                t => t - 1,
                            };
                            tiers[user] = new;
                            Payload::TierChange {
                                old: FeedbackTier::new(old).unwrap(),
                                new: FeedbackTier::new(new).unwrap(),
                            }
                        }
                        _ => {
                            let message_index = cursors[user];
                            cursors[user] = (message_index + 1) % MESSAGE_COUNT;
                            Payload::Notification {
                                level_pct: (rng.random_range(0.0..=100.0_f64) * 100.0).round() / 100.0,
                                message_index,
                            }
                        }
                    };
                    drafts.push(Draft { ts, user: user as u32, payload });
                    if response.unwrap_or_else(|| rng.random_bool(probs[k])) {
                        let sip_ts = ts + rng.random_range(1..=EFFECT_WINDOW_MS);
                        let v = round_ml(rng.random_range(p.sip_ml.0..p.sip_ml.1));
                        consumed += v;
                        drafts.push(Draft {
                            ts: sip_ts,
                            user: user as u32,
                            payload: Payload::Sip { volume_ml: v },
                        });
                    }
                }
            }

            // background sips, thinned out of every intervention window
            let mut attempts = 0;
            while target - consumed >= MIN_SIP_ML && attempts < 10_000 {
                attempts += 1;
                let ts = rng.random_range(day_start..=day_end);
                if windows.iter().any(|&w| ts > w && ts <= w + EFFECT_WINDOW_MS) {
                    continue;
                }
                let v = round_ml(rng.random_range(p.sip_ml.0..p.sip_ml.1).min(target - consumed));
                if v < MIN_SIP_ML {
                    break;
                }
                consumed += v;
                drafts.push(Draft {
                    ts,
                    user: user as u32,
                    payload: Payload::Sip { volume_ml: v },
                });
            }
        }
        debug_assert!(day_end - midnight <= DAY_MS);
    }

    drafts.sort_by_key(|d| (d.ts, d.user));
    Ok(drafts
        .into_iter()
        .enumerate()
        .map(|(seq, d)| LoggedEvent {
            seq: seq as u64,
            ts: d.ts,
            payload: d.payload,
            user: Some(format!("P{}", d.user + 1)),
            clamped_from: None,
        })
        .collect())
}

fn round_ml(v: f64) -> f64 {
    (v * 10.0).floor() / 10.0
}

/// A simulator input file: either a trace scenario or a study profile.
#[derive(Debug, Clone, PartialEq)]
pub enum SimInput {
    Trace(TraceScenario),
    Study(StudyProfile),
}

impl SimInput {
    /// Reads the `kind = trace|study` key and the matching fields.
    pub fn from_kv(map: &KvMap) -> Result<Self, SimError> {
        match map.require("kind")? {
            "trace" => Ok(SimInput::Trace(trace_from_kv(map)?)),
            "study" => Ok(SimInput::Study(study_from_kv(map)?)),
            other => Err(bad(format!("unknown kind {other:?}, expected trace or study"))),
        }
    }
}

fn trace_from_kv(map: &KvMap) -> Result<TraceScenario, SimError> {
    map.reject_unknown(&[
        "kind",
        "seed",
        "start_ts",
        "duration_ms",
        "baseline_g",
        "noise_amplitude_g",
        "sample_period_ms",
        "off_duration_ms",
        "settle_ms",
        "off_scale_threshold_g",
        "action",
    ])?;
    let d = TraceScenario::default();
    let mut scripted = Vec::new();
    for raw in map.get_all("action") {
        let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
        let at_ms: i64 = parts
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("action {raw:?}: bad offset")))?;
        let volume = || -> Result<f64, SimError> {
            parts
                .get(2)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(format!("action {raw:?}: missing volume")))
        };
        let action = match parts.get(1).copied() {
            Some("SIP") => ScriptedAction::Sip(volume()?),
            Some("REFILL") => ScriptedAction::Refill(volume()?),
            Some("OFF_ON_NO_CHANGE") => ScriptedAction::OffOnNoChange,
            _ => return Err(bad(format!("action {raw:?}: unknown action"))),
        };
        scripted.push(Scripted { at_ms, action });
    }
    Ok(TraceScenario {
        seed: map.parse_or("seed", d.seed)?,
        start_ts: map.parse_or("start_ts", d.start_ts)?,
        duration_ms: map.parse_or("duration_ms", d.duration_ms)?,
        baseline_g: map.parse_or("baseline_g", d.baseline_g)?,
        noise_amplitude_g: map.parse_or("noise_amplitude_g", d.noise_amplitude_g)?,
        sample_period_ms: map.parse_or("sample_period_ms", d.sample_period_ms)?,
        off_duration_ms: map.parse_or("off_duration_ms", d.off_duration_ms)?,
        settle_ms: map.parse_or("settle_ms", d.settle_ms)?,
        off_scale_threshold_g: map.parse_or("off_scale_threshold_g", d.off_scale_threshold_g)?,
        scripted,
    })
}

fn study_from_kv(map: &KvMap) -> Result<StudyProfile, SimError> {
    map.reject_unknown(&[
        "kind",
        "seed",
        "start_date",
        "days",
        "phase_days",
        "users",
        "base_daily_ml",
        "novelty_boost",
        "novelty_duration_days",
        "novelty_decay_days",
        "daily_jitter",
        "response_prob.*",
        "count.*",
        "effective.*",
        "utc_offset_min",
        "active_start",
        "active_end",
    ])?;
    let d = StudyProfile::default();
    let phase_days = match map.get("phase_days") {
        None => d.phase_days,
        Some(raw) => {
            let v: Vec<u32> = raw
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|_| bad(format!("phase_days {raw:?}")))?;
            <[u32; 3]>::try_from(v).map_err(|_| bad("phase_days needs three values"))?
        }
    };
    if let Some(days) = map.parse::<u32>("days")? {
        if days != phase_days.iter().sum::<u32>() {
            return Err(bad(format!("days = {days} but phases sum to {}", phase_days.iter().sum::<u32>())));
        }
    }
    let start_date = match map.get("start_date") {
        None => d.start_date,
        Some(s) => parse_date(s).ok_or_else(|| bad(format!("start_date {s:?}")))?,
    };
    let time = |key: &str, default: NaiveTime| -> Result<NaiveTime, SimError> {
        match map.get(key) {
            None => Ok(default),
            Some(s) => parse_time_of_day(s).ok_or_else(|| bad(format!("{key} {s:?}"))),
        }
    };
    let zone = LocalZone::from_offset_minutes(map.parse_or("utc_offset_min", 0)?).ok_or_else(|| bad("utc_offset_min"))?;
    Ok(StudyProfile {
        seed: map.parse_or("seed", d.seed)?,
        start_date,
        phase_days,
        users: map.parse_or("users", d.users)?,
        base_daily_ml: map.parse_or("base_daily_ml", d.base_daily_ml)?,
        novelty_boost: map.parse_or("novelty_boost", d.novelty_boost)?,
        novelty_duration_days: map.parse_or("novelty_duration_days", d.novelty_duration_days)?,
        novelty_decay_days: map.parse_or("novelty_decay_days", d.novelty_decay_days)?,
        daily_jitter: map.parse_or("daily_jitter", d.daily_jitter)?,
        response_prob: PerKind {
            historical: map.parse_or("response_prob.historical", d.response_prob.historical)?,
            tier_change: map.parse_or("response_prob.tier_change", d.response_prob.tier_change)?,
            notification: map.parse_or("response_prob.notification", d.response_prob.notification)?,
        },
        event_counts: PerKind {
            historical: map.parse_or("count.historical", d.event_counts.historical)?,
            tier_change: map.parse_or("count.tier_change", d.event_counts.tier_change)?,
            notification: map.parse_or("count.notification", d.event_counts.notification)?,
        },
        effective_counts: exact_from_kv(map)?,
        zone,
        active_start: time("active_start", d.active_start)?,
        active_end: time("active_end", d.active_end)?,
        sip_ml: d.sip_ml,
    })
}

/// `effective.*` keys: all three or none.
fn exact_from_kv(map: &KvMap) -> Result<Option<PerKind<u32>>, SimError> {
    let keys = ["effective.historical", "effective.tier_change", "effective.notification"];
    let vals: Vec<Option<u32>> = keys.iter().map(|k| map.parse(k)).collect::<Result<_, _>>()?;
    match vals.as_slice() {
        [Some(h), Some(t), Some(n)] => Ok(Some(PerKind {
            historical: *h,
            tier_change: *t,
            notification: *n,
        })),
        [None, None, None] => Ok(None),
        _ => Err(bad("effective.* needs historical, tier_change and notification")),
    }
}
