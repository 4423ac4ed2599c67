//! Command-line interface: `run`, `replay`, `analyze` and `simulate`.

use std::fs::File;
use std::future::Future;
use std::io::{BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use sipsense_core::analysis::{effectiveness_table, phase_summary, DateSpan, PhaseError};
use sipsense_core::engine::Engine;
use sipsense_core::eventlog::{encode_event, read_log, write_log, EventLog, LogError, LoggedEvent};
use sipsense_core::kv::{parse_config, KvMap};
use sipsense_core::sensing::{format_sample, parse_stream, run_detector};
use sipsense_core::simulator::{gen_study, gen_trace, SimError, SimInput};
use sipsense_core::time::{parse_date, LocalZone, Millis};
use thiserror::Error;
use tokio::net::TcpListener;

use crate::config::{ConfigError, SensorSource, ServiceConfig};
use crate::http::router;
use crate::report::Report;
use crate::service::{feed_lines, EngineHandle};

pub const DEFAULT_LOG_PATH: &str = "sipsense.log";

#[derive(Debug, Parser)]
#[command(name = "sipsense", version, about = "Smart water bottle hydration service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the ingestion loop and HTTP API.
    Run(RunArgs),
    /// Run the detector over a recorded trace and print its events.
    Replay(ReplayArgs),
    /// Print intervention effectiveness and study-phase summaries.
    Analyze(AnalyzeArgs),
    /// Generate a weight trace or a study log from a scenario file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Service configuration file (key = value lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Read live samples from a serial device.
    #[arg(long, conflicts_with = "replay")]
    pub serial: Option<PathBuf>,
    /// Replay a recorded trace, then exit (unless --linger).
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Event log file; created if missing.
    #[arg(long = "log")]
    pub log_path: Option<PathBuf>,
    #[arg(long)]
    pub listen: Option<SocketAddr>,
    #[arg(long)]
    pub daily_goal_ml: Option<f64>,
    #[arg(long)]
    pub preferred_interval_min: Option<u32>,
    /// HH:MM
    #[arg(long)]
    pub active_start: Option<String>,
    /// HH:MM
    #[arg(long)]
    pub active_end: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub utc_offset_min: Option<i32>,
    /// Keep serving the API after a replay finishes.
    #[arg(long)]
    pub linger: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Trace in the sensor wire format.
    pub trace: PathBuf,
    /// Configuration file; only the detector.* keys are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Event log(s). Untagged records of each file are attributed to one
    /// user named after the file when more than one log is given.
    #[arg(long = "log", required = true)]
    pub logs: Vec<PathBuf>,
    /// Phase ranges as A1,B,A2 with each range FROM:TO (inclusive dates).
    #[arg(long, conflicts_with = "study_start")]
    pub phases: Option<String>,
    /// First study day; phases follow from --phase-days.
    #[arg(long)]
    pub study_start: Option<String>,
    #[arg(long, default_value = "3,15,3")]
    pub phase_days: String,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub utc_offset_min: i32,
    /// Also write effectiveness.csv and phases.csv here.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario or study profile (key = value lines, `kind = trace|study`).
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// For traces: also write the ground-truth events (eventlog encoding).
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("cannot open sensor source {path}: {source}")]
    SensorOpen { path: PathBuf, source: std::io::Error },
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("unparseable log: {0}")]
    UnparseableLog(LogError),
    #[error("bad scenario: {0}")]
    BadScenario(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Bind { .. } => 3,
            CliError::SensorOpen { .. } => 4,
            CliError::Storage(_) => 5,
            CliError::UnparseableLog(_) => 6,
            CliError::BadScenario(_) => 7,
        })
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::BadScenario(e.to_string())
    }
}

fn storage(e: impl std::fmt::Display) -> CliError {
    CliError::Storage(e.to_string())
}

fn load_kv(path: Option<&Path>) -> Result<KvMap, CliError> {
    let Some(path) = path else {
        return Ok(KvMap::new());
    };
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
        .map_err(|source| ConfigError::Syntax {
            path: path.to_path_buf(),
            source,
        })
        .map_err(Into::into)
}

/// Config file values with the command-line flags layered on top.
pub fn service_config(args: &RunArgs) -> Result<ServiceConfig, CliError> {
    let file = load_kv(args.config.as_deref())?;
    let flag_source = args.serial.is_some() || args.replay.is_some();
    let mut map = KvMap::new();
    for (k, v) in file.entries() {
        if !(flag_source && (k == "serial" || k == "replay")) {
            map.push(k.as_str(), v.as_str());
        }
    }
    let mut flag = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            map.push(key, v);
        }
    };
    flag("serial", args.serial.as_ref().map(|p| p.display().to_string()));
    flag("replay", args.replay.as_ref().map(|p| p.display().to_string()));
    flag("log_path", args.log_path.as_ref().map(|p| p.display().to_string()));
    flag("listen", args.listen.map(|a| a.to_string()));
    flag("daily_goal_ml", args.daily_goal_ml.map(|v| v.to_string()));
    flag("preferred_interval_min", args.preferred_interval_min.map(|v| v.to_string()));
    flag("active_start", args.active_start.clone());
    flag("active_end", args.active_end.clone());
    flag("utc_offset_min", args.utc_offset_min.map(|v| v.to_string()));
    Ok(ServiceConfig::from_kv(&map)?)
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = service_config(&args)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Usage(format!("cannot start runtime: {e}")))?;
            rt.block_on(cmd_run(cfg, args.linger, shutdown_signal()))?;
            Ok(())
        }
        Command::Replay(args) => cmd_replay(&args, &mut std::io::stdout().lock()),
        Command::Analyze(args) => {
            let report = cmd_analyze(&args)?;
            print!("{}", report.to_text());
            Ok(())
        }
        Command::Simulate(args) => cmd_simulate(&args),
    }
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
}

fn wall_clock_ms() -> Millis {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as Millis)
}

/// Opens the log, the sensor source and the listener (in that order),
/// then serves until `shutdown` resolves or, for a replay without
/// `linger`, until the trace is consumed. Returns the final engine.
pub async fn cmd_run(cfg: ServiceConfig, linger: bool, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<Engine, CliError> {
    let log_path = cfg.log_path.clone().unwrap_or_else(|| DEFAULT_LOG_PATH.into());
    let (log, report) = EventLog::open(&log_path).map_err(storage)?;
    if report.recovered > 0 {
        log::info!("{}: recovered {} events", log_path.display(), report.recovered);
    }
    if let Some(tail) = report.dropped_tail {
        log::warn!("{}: dropped incomplete last record {tail:?}", log_path.display());
    }
    let engine = Engine::new(cfg.engine.clone(), log).map_err(|e| CliError::Config(ConfigError::Invalid(e.to_string())))?;

    let source = match &cfg.source {
        None => None,
        Some(SensorSource::Serial(p) | SensorSource::Replay(p)) => {
            let file = File::open(p).map_err(|source| CliError::SensorOpen { path: p.clone(), source })?;
            Some((matches!(cfg.source, Some(SensorSource::Replay(_))), file))
        }
    };
    let listener = TcpListener::bind(cfg.listen)
        .await
        .map_err(|source| CliError::Bind { addr: cfg.listen, source })?;
    let addr = listener.local_addr().map_err(|source| CliError::Bind { addr: cfg.listen, source })?;
    log::info!("listening on {addr}");

    let (handle, engine_thread) = EngineHandle::spawn(engine);
    let (done_tx, done_rx) = tokio::sync::oneshot::channel::<()>();
    let mut ticker = None;
    if let Some((is_replay, file)) = source {
        let feeder = handle.clone();
        tokio::task::spawn_blocking(move || {
            match feed_lines(BufReader::new(file), &feeder) {
                Ok(stats) => log::info!("sensor: {} samples, {} malformed", stats.samples, stats.malformed),
                Err(e) => log::error!("sensor read failed: {e}"),
            }
            if is_replay && !linger {
                let _ = done_tx.send(());
            }
        });
        if !is_replay {
            let clock = handle.clone();
            ticker = Some(tokio::spawn(async move {
                let mut every = tokio::time::interval(Duration::from_secs(1));
                loop {
                    every.tick().await;
                    if clock.advance_to(wall_clock_ms()).await.is_err() {
                        break;
                    }
                }
            }));
        }
    }

    let stop = async move {
        tokio::select! {
            _ = shutdown => {}
            Ok(()) = done_rx => {}
        }
    };
    let server = axum::serve(listener, router(handle.clone())).with_graceful_shutdown(stop);
    let served = server.await;
    if let Some(t) = ticker {
        t.abort();
    }
    handle.shutdown().await;
    drop(handle);
    let engine = tokio::task::spawn_blocking(move || engine_thread.join())
        .await
        .map_err(storage)?
        .map_err(|_| CliError::Storage("engine thread panicked".into()))?
        .map_err(storage)?;
    served.map_err(storage)?;
    Ok(engine)
}

pub fn cmd_replay(args: &ReplayArgs, out: &mut impl Write) -> Result<(), CliError> {
    let cfg = ServiceConfig::from_kv(&detector_keys(&load_kv(args.config.as_deref())?))?;
    let bytes = std::fs::read(&args.trace).map_err(|source| CliError::SensorOpen {
        path: args.trace.clone(),
        source,
    })?;
    let stream = parse_stream(&bytes);
    eprintln!("{} malformed records", stream.malformed);
    for (seq, e) in run_detector(&stream.samples, &cfg.engine.detector).iter().enumerate() {
        out.write_all(encode_event(&LoggedEvent::from_sensor(seq as u64, e)).as_bytes())
            .map_err(storage)?;
    }
    Ok(())
}

fn detector_keys(map: &KvMap) -> KvMap {
    let mut out = KvMap::new();
    for (k, v) in map.entries().iter().filter(|(k, _)| k.starts_with("detector.")) {
        out.push(k.as_str(), v.as_str());
    }
    out
}

fn bad_date(raw: &str) -> CliError {
    CliError::Usage(format!("bad date {raw:?}; expected YYYY-MM-DD"))
}

fn date(raw: &str) -> Result<NaiveDate, CliError> {
    parse_date(raw.trim()).ok_or_else(|| bad_date(raw))
}

pub fn phase_spans(args: &AnalyzeArgs) -> Result<Option<[DateSpan; 3]>, CliError> {
    if let Some(raw) = &args.phases {
        let spans: Vec<DateSpan> = raw
            .split(',')
            .map(|r| {
                let (a, b) = r
                    .split_once(':')
                    .ok_or_else(|| CliError::Usage(format!("phase range {r:?}: expected FROM:TO")))?;
                Ok(DateSpan::new(date(a)?, date(b)?))
            })
            .collect::<Result<_, CliError>>()?;
        let spans: [DateSpan; 3] = spans
            .try_into()
            .map_err(|_| CliError::Usage("--phases needs exactly three ranges".into()))?;
        return Ok(Some(spans));
    }
    let Some(start) = &args.study_start else {
        return Ok(None);
    };
    let days: Vec<u32> = args
        .phase_days
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--phase-days {:?}", args.phase_days)))?;
    let days: [u32; 3] = days
        .try_into()
        .map_err(|_| CliError::Usage("--phase-days needs three values".into()))?;
    if days.contains(&0) {
        return Err(CliError::Usage("phase lengths must be positive".into()));
    }
    Ok(Some(DateSpan::split(date(start)?, days)))
}

/// Reads and merges the logs into one time-ordered event list.
pub fn load_logs(paths: &[PathBuf]) -> Result<Vec<LoggedEvent>, CliError> {
    let mut all = Vec::new();
    for path in paths {
        let parsed = read_log(path).map_err(CliError::UnparseableLog)?;
        if let Some(tail) = parsed.partial_tail {
            log::warn!("{}: ignoring incomplete last record {tail:?}", path.display());
        }
        let tag = (paths.len() > 1).then(|| {
            path.file_stem()
                .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
        });
        all.extend(parsed.events.into_iter().map(|mut e| {
            if e.user.is_none() {
                e.user.clone_from(&tag);
            }
            e
        }));
    }
    all.sort_by_key(|e| e.ts);
    Ok(all)
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<Report, CliError> {
    let zone = LocalZone::from_offset_minutes(args.utc_offset_min)
        .ok_or_else(|| CliError::Usage(format!("utc offset {} out of range", args.utc_offset_min)))?;
    let spans = phase_spans(args)?;
    let events = load_logs(&args.logs)?;
    let phases = spans
        .map(|s| phase_summary(&events, &s, zone))
        .transpose()
        .map_err(|e: PhaseError| CliError::Usage(e.to_string()))?;
    let report = Report::new(effectiveness_table(&events), phases);
    if let Some(dir) = &args.csv_dir {
        std::fs::create_dir_all(dir).map_err(storage)?;
        std::fs::write(dir.join("effectiveness.csv"), report.effectiveness_csv()).map_err(storage)?;
        if let Some(csv) = report.phases_csv() {
            std::fs::write(dir.join("phases.csv"), csv).map_err(storage)?;
        }
    }
    Ok(report)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::BadScenario(format!("{}: {e}", args.input.display())))?;
    let map = parse_config(&text).map_err(|e| CliError::BadScenario(format!("{}: {e}", args.input.display())))?;
    match SimInput::from_kv(&map)? {
        SimInput::Trace(scenario) => {
            let trace = gen_trace(&scenario)?;
            let wire: String = trace.samples.iter().map(format_sample).collect();
            std::fs::write(&args.output, wire).map_err(storage)?;
            if let Some(path) = &args.truth {
                let truth: Vec<LoggedEvent> = trace
                    .truth
                    .iter()
                    .enumerate()
                    .map(|(i, e)| LoggedEvent::from_sensor(i as u64, e))
                    .collect();
                write_log(path, &truth).map_err(storage)?;
            }
        }
        SimInput::Study(profile) => {
            if args.truth.is_some() {
                return Err(CliError::Usage("--truth applies to trace scenarios only".into()));
            }
            write_log(&args.output, &gen_study(&profile)?).map_err(storage)?;
        }
    }
    Ok(())
}

