//! Service configuration: a `key = value` file, overridden by CLI flags.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use sipsense_core::engine::EngineConfig;
use sipsense_core::kv::{parse_config, KvError, KvMap};
use sipsense_core::scheduler::MESSAGE_COUNT;
use sipsense_core::time::{parse_time_of_day, LocalZone};
use thiserror::Error;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Syntax { path: PathBuf, source: KvError },
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SensorSource {
    /// A serial device (or any character device / FIFO) streaming samples.
    Serial(PathBuf),
    /// A recorded trace, read to the end.
    Replay(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub source: Option<SensorSource>,
    pub log_path: Option<PathBuf>,
    pub listen: SocketAddr,
    pub engine: EngineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            source: None,
            log_path: None,
            listen: DEFAULT_LISTEN.parse().unwrap(),
            engine: EngineConfig::default(),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "serial",
    "replay",
    "log_path",
    "listen",
    "daily_goal_ml",
    "active_start",
    "active_end",
    "prompt_low_pct",
    "prompt_high_pct",
    "utc_offset_min",
    "preferred_interval_min",
    "band_multiplier.low",
    "band_multiplier.mid",
    "band_multiplier.high",
    "quiet_outside_active_hours",
    "message.*",
    "detector.off_scale_threshold_g",
    "detector.stable_window_ms",
    "detector.stable_band_g",
    "detector.min_sip_g",
    "detector.density_g_per_ml",
];

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let map = parse_config(&text).map_err(|source| ConfigError::Syntax {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_kv(&map)
    }

    /// Builds a configuration from defaults plus the keys in `map`.
    pub fn from_kv(map: &KvMap) -> Result<Self, ConfigError> {
        map.reject_unknown(KNOWN_KEYS)?;
        let mut cfg = ServiceConfig::default();
        cfg.source = match (map.get("serial"), map.get("replay")) {
            (Some(_), Some(_)) => return Err(ConfigError::Invalid("set only one of serial and replay".into())),
            (Some(p), None) => Some(SensorSource::Serial(p.into())),
            (None, Some(p)) => Some(SensorSource::Replay(p.into())),
            (None, None) => None,
        };
        cfg.log_path = map.get("log_path").map(PathBuf::from);
        cfg.listen = map.parse_or("listen", cfg.listen)?;

        let h = &mut cfg.engine.hydration;
        h.daily_goal_ml = map.parse_or("daily_goal_ml", h.daily_goal_ml)?;
        h.prompt_low_pct = map.parse_or("prompt_low_pct", h.prompt_low_pct)?;
        h.prompt_high_pct = map.parse_or("prompt_high_pct", h.prompt_high_pct)?;
        for (key, slot) in [("active_start", &mut h.active_start), ("active_end", &mut h.active_end)] {
            if let Some(raw) = map.get(key) {
                *slot = parse_time_of_day(raw).ok_or_else(|| KvError::BadValue {
                    key: key.into(),
                    value: raw.into(),
                })?;
            }
        }
        if let Some(offset) = map.parse::<i32>("utc_offset_min")? {
            h.zone = LocalZone::from_offset_minutes(offset)
                .ok_or_else(|| ConfigError::Invalid(format!("utc_offset_min {offset} out of range")))?;
        }

        let s = &mut cfg.engine.scheduler;
        s.preferred_interval_min = map.parse_or("preferred_interval_min", s.preferred_interval_min)?;
        s.band_multiplier.low = map.parse_or("band_multiplier.low", s.band_multiplier.low)?;
        s.band_multiplier.mid = map.parse_or("band_multiplier.mid", s.band_multiplier.mid)?;
        s.band_multiplier.high = map.parse_or("band_multiplier.high", s.band_multiplier.high)?;
        s.quiet_outside_active_hours = map.parse_or("quiet_outside_active_hours", s.quiet_outside_active_hours)?;
        for i in 0..MESSAGE_COUNT {
            if let Some(m) = map.get(&format!("message.{i}")) {
                s.messages[i] = m.to_string();
            }
        }
        if let Some((k, _)) = map
            .entries()
            .iter()
            .find(|(k, _)| k.strip_prefix("message.").is_some_and(|i| i.parse::<usize>().map_or(true, |i| i >= MESSAGE_COUNT)))
        {
            return Err(ConfigError::Invalid(format!("{k}: messages are numbered 0 to {}", MESSAGE_COUNT - 1)));
        }

        let d = &mut cfg.engine.detector;
        d.off_scale_threshold_g = map.parse_or("detector.off_scale_threshold_g", d.off_scale_threshold_g)?;
        d.stable_window_ms = map.parse_or("detector.stable_window_ms", d.stable_window_ms)?;
        d.stable_band_g = map.parse_or("detector.stable_band_g", d.stable_band_g)?;
        d.min_sip_g = map.parse_or("detector.min_sip_g", d.min_sip_g)?;
        d.density_g_per_ml = map.parse_or("detector.density_g_per_ml", d.density_g_per_ml)?;

        cfg.engine.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}
