//! Weight-sample decoding and the bottle state machine.
//!
//! The scale only ever sees the bottle's total weight. Intake is measured
//! across a lift: the bottle leaves the scale, comes back, and once the
//! readings settle the new weight is compared with the weight before the lift.
//! A decrease is a [`SensorEventKind::Sip`], an increase a
//! [`SensorEventKind::Refill`]. Nothing is emitted while the bottle stays put.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::exec::Execution;
use crate::time::Millis;

/// One timestamped scale reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightSample {
    pub ts: Millis,
    pub grams: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MalformedRecord {
    #[error("expected `<ts_ms>,<grams>`, got {0} field(s)")]
    FieldCount(usize),
    #[error("timestamp is not an integer: {0:?}")]
    BadTimestamp(String),
    #[error("weight is not a decimal number: {0:?}")]
    BadWeight(String),
    #[error("negative weight: {0}")]
    NegativeWeight(String),
    #[error("record is not valid UTF-8")]
    NotUtf8,
}

/// Decodes one line of the sensor wire format, `<ts_ms>,<grams>`.
///
/// A trailing `\n` (and `\r`) is tolerated.
pub fn parse_sample(line: &[u8]) -> Result<WeightSample, MalformedRecord> {
    let line = std::str::from_utf8(line).map_err(|_| MalformedRecord::NotUtf8)?;
    let line = line.trim_end_matches(['\n', '\r']);
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 2 {
        return Err(MalformedRecord::FieldCount(fields.len()));
    }
    let (ts_s, g_s) = (fields[0].trim(), fields[1].trim());
    let ts: Millis = ts_s
        .parse()
        .map_err(|_| MalformedRecord::BadTimestamp(ts_s.to_string()))?;
    if !g_s.bytes().all(|b| b.is_ascii_digit() || b == b'.' || b == b'-' || b == b'+') || g_s.is_empty() {
        return Err(MalformedRecord::BadWeight(g_s.to_string()));
    }
    let grams: f64 = g_s
        .parse()
        .map_err(|_| MalformedRecord::BadWeight(g_s.to_string()))?;
    if grams < 0.0 {
        return Err(MalformedRecord::NegativeWeight(g_s.to_string()));
    }
    Ok(WeightSample { ts, grams })
}

/// Encodes a sample in the sensor wire format, including the `\n` terminator.
pub fn format_sample(s: &WeightSample) -> String {
    format!("{},{}\n", s.ts, s.grams)
}

/// Result of decoding a whole sample stream: good samples plus a count of
/// skipped lines.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct ParsedStream {
    pub samples: Vec<WeightSample>,
    pub malformed: usize,
}

/// Decodes every line of `input`, skipping and counting malformed ones.
/// Blank lines are ignored.
pub fn parse_stream(input: &[u8]) -> ParsedStream {
    let mut out = ParsedStream::default();
    for line in input.split(|&b| b == b'\n') {
        if line.iter().all(|b| b.is_ascii_whitespace()) {
            continue;
        }
        match parse_sample(line) {
            Ok(s) => out.samples.push(s),
            Err(_) => out.malformed += 1,
        }
    }
    out
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid detector config: {0}")]
pub struct InvalidDetectorConfig(pub &'static str);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorConfig {
    /// Readings below this mean nothing is on the scale.
    pub off_scale_threshold_g: f64,
    /// How long readings must stay within `stable_band_g` before a return counts.
    pub stable_window_ms: i64,
    /// Maximum spread (max - min) of a settled window.
    pub stable_band_g: f64,
    /// Smallest weight change reported as a sip or refill.
    pub min_sip_g: f64,
    pub density_g_per_ml: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            off_scale_threshold_g: 30.0,
            stable_window_ms: 1500,
            stable_band_g: 3.0,
            min_sip_g: 5.0,
            density_g_per_ml: 1.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), InvalidDetectorConfig> {
        let positive = self.off_scale_threshold_g > 0.0
            && self.stable_window_ms > 0
            && self.stable_band_g > 0.0
            && self.min_sip_g > 0.0
            && self.density_g_per_ml > 0.0;
        if !positive {
            return Err(InvalidDetectorConfig("all fields must be strictly positive"));
        }
        if self.min_sip_g <= self.stable_band_g {
            return Err(InvalidDetectorConfig("min_sip_g must exceed stable_band_g"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BottleState {
    /// Bottle resting on the scale. `baseline_g` is the running mean of the
    /// `samples` readings taken since it settled.
    OnScale { baseline_g: f64, samples: u32 },
    /// Bottle lifted; remembers the weight before the lift.
    OffScale { last_baseline_g: f64 },
    /// Something is on the scale but has not settled yet. `previous` is the
    /// baseline before the lift, absent on a cold start.
    Settling {
        previous: Option<f64>,
        window: VecDeque<WeightSample>,
    },
}

impl Default for BottleState {
    fn default() -> Self {
        BottleState::Settling {
            previous: None,
            window: VecDeque::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SensorEventKind {
    Sip { volume_ml: f64 },
    Refill { volume_ml: f64 },
    BottleOff,
    BottleOn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensorEvent {
    pub ts: Millis,
    pub kind: SensorEventKind,
}

impl SensorEvent {
    pub fn is_volume(&self) -> bool {
        matches!(self.kind, SensorEventKind::Sip { .. } | SensorEventKind::Refill { .. })
    }
}

/// Cap on the effective sample count of the resting baseline, so slow drift
/// (evaporation, temperature) is still followed.
const MAX_BASELINE_SAMPLES: u32 = 100;

fn spread(window: &VecDeque<WeightSample>) -> f64 {
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.grams), hi.max(s.grams)));
    hi - lo
}

fn window_center(window: &VecDeque<WeightSample>) -> f64 {
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.grams), hi.max(s.grams)));
    (lo + hi) / 2.0
}

/// Advances the bottle state machine by one sample.
pub fn step_detect(
    state: BottleState,
    sample: WeightSample,
    cfg: &DetectorConfig,
) -> (BottleState, Vec<SensorEvent>) {
    let on_scale = sample.grams >= cfg.off_scale_threshold_g;
    match state {
        BottleState::OnScale { baseline_g, samples } => {
            if on_scale {
                // readings that agree with the baseline refine it; others
                // (a hand resting on the bottle, a knock) are ignored
                let (baseline_g, samples) = if (sample.grams - baseline_g).abs() <= cfg.stable_band_g {
                    let n = samples.min(MAX_BASELINE_SAMPLES) as f64;
                    ((baseline_g * n + sample.grams) / (n + 1.0), samples.saturating_add(1))
                } else {
                    (baseline_g, samples)
                };
                (BottleState::OnScale { baseline_g, samples }, Vec::new())
            } else {
                let off = SensorEvent {
                    ts: sample.ts,
                    kind: SensorEventKind::BottleOff,
                };
                (BottleState::OffScale { last_baseline_g: baseline_g }, vec![off])
            }
        }
        BottleState::OffScale { last_baseline_g } => {
            if on_scale {
                settle(Some(last_baseline_g), VecDeque::from([sample]), cfg)
            } else {
                (BottleState::OffScale { last_baseline_g }, Vec::new())
            }
        }
        BottleState::Settling { previous, mut window } => {
            if !on_scale {
                // lifted again before settling
                return match previous {
                    Some(b) => (BottleState::OffScale { last_baseline_g: b }, Vec::new()),
                    None => (BottleState::default(), Vec::new()),
                };
            }
            window.push_back(sample);
            while window.len() > 1 && spread(&window) > cfg.stable_band_g {
                window.pop_front();
            }
            settle(previous, window, cfg)
        }
    }
}

fn settle(
    previous: Option<f64>,
    window: VecDeque<WeightSample>,
    cfg: &DetectorConfig,
) -> (BottleState, Vec<SensorEvent>) {
    let (first, last) = match (window.front(), window.back()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return (BottleState::Settling { previous, window }, Vec::new()),
    };
    if last.ts - first.ts < cfg.stable_window_ms {
        return (BottleState::Settling { previous, window }, Vec::new());
    }
    let baseline_g = window_center(&window);
    let mut events = vec![SensorEvent {
        ts: last.ts,
        kind: SensorEventKind::BottleOn,
    }];
    if let Some(old) = previous {
        let delta = baseline_g - old;
        if -delta >= cfg.min_sip_g {
            events.push(SensorEvent {
                ts: last.ts,
                kind: SensorEventKind::Sip {
                    volume_ml: -delta / cfg.density_g_per_ml,
                },
            });
        } else if delta >= cfg.min_sip_g {
            events.push(SensorEvent {
                ts: last.ts,
                kind: SensorEventKind::Refill {
                    volume_ml: delta / cfg.density_g_per_ml,
                },
            });
        }
    }
    let samples = window.len() as u32;
    (BottleState::OnScale { baseline_g, samples }, events)
}

/// Incremental detector owning its state; the streaming counterpart of
/// [`run_detector`].
#[derive(Debug, Clone, Default)]
pub struct Detector {
    cfg: DetectorConfig,
    state: BottleState,
}

impl Detector {
    pub fn new(cfg: DetectorConfig) -> Self {
        Detector {
            cfg,
            state: BottleState::default(),
        }
    }

    pub fn push(&mut self, sample: WeightSample) -> Vec<SensorEvent> {
        let state = std::mem::take(&mut self.state);
        let (next, events) = step_detect(state, sample, &self.cfg);
        self.state = next;
        events
    }

    pub fn state(&self) -> &BottleState {
        &self.state
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }
}

/// Runs the detector over a whole ordered sample sequence from a cold start.
pub fn run_detector(samples: &[WeightSample], cfg: &DetectorConfig) -> Vec<SensorEvent> {
    let mut det = Detector::new(*cfg);
    samples.iter().flat_map(|s| det.push(*s)).collect()
}

/// Runs independent traces through fresh detectors.
pub fn run_detector_batch(
    traces: &[Vec<WeightSample>],
    cfg: &DetectorConfig,
    exec: Execution,
) -> Vec<Vec<SensorEvent>> {
    exec.map(traces, |t| run_detector(t, cfg))
}
