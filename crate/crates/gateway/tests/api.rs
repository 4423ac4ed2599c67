use std::net::SocketAddr;
use std::time::Duration;

use serde_json::Value;
use sipsense::http::router;
use sipsense::service::EngineHandle;
use sipsense_core::engine::{hm, Engine, EngineConfig};
use sipsense_core::eventlog::{read_log, EventLog, KindTag};
use sipsense_core::sensing::WeightSample;
use sipsense_core::time::{LocalZone, Millis};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};

struct Server {
    addr: SocketAddr,
    handle: EngineHandle,
    log_path: std::path::PathBuf,
    _dir: tempfile::TempDir,
}

fn day_start() -> Millis {
    let date = chrono::NaiveDate::from_ymd_opt(2024, 6, 3).unwrap();
    LocalZone::utc().at(date, hm(9, 0))
}

async fn start() -> Server {
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("events.log");
    let (log, _) = EventLog::open(&log_path).unwrap();
    let engine = Engine::new(EngineConfig::default(), log).unwrap();
    let (handle, _thread) = EngineHandle::spawn(engine);
    handle.advance_to(day_start()).await.unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(handle.clone());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Server {
        addr,
        handle,
        log_path,
        _dir: dir,
    }
}

/// Minimal HTTP/1.1 client: one request per connection.
async fn call(addr: SocketAddr, method: &str, path: &str, body: Option<&str>) -> (u16, Value) {
    let mut stream = TcpStream::connect(addr).await.unwrap();
    let body = body.unwrap_or("");
    let req = format!(
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\
         Content-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(req.as_bytes()).await.unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).await.unwrap();
    let text = String::from_utf8(raw).unwrap();
    let status: u16 = text.split(' ').nth(1).unwrap().parse().unwrap();
    let (_, payload) = text.split_once("\r\n\r\n").unwrap();
    let json = if payload.is_empty() {
        Value::Null
    } else {
        serde_json::from_str(payload).unwrap_or(Value::String(payload.to_string()))
    };
    (status, json)
}

fn logged_kinds(s: &Server) -> Vec<KindTag> {
    read_log(&s.log_path).unwrap().events.iter().map(|e| e.kind()).collect()
}

#[tokio::test]
async fn state_is_read_only_and_well_formed() {
    let s = start().await;
    let before = logged_kinds(&s);
    for _ in 0..5 {
        let (status, body) = call(s.addr, "GET", "/state", None).await;
        assert_eq!(status, 200);
        assert_eq!(body["snapshot"]["level_pct"], 100.0);
        assert_eq!(body["snapshot"]["band"], "HIGH");
        assert_eq!(body["goal_completion"]["goal_ml"], 2500.0);
        assert!(body["last_sip_ts"].is_null());
    }
    assert_eq!(logged_kinds(&s), before);
}

#[tokio::test]
async fn historical_view_appends_exactly_one_event() {
    let s = start().await;
    let before = logged_kinds(&s).len();
    let (status, body) = call(s.addr, "POST", "/interactions/historical", Some(r#"{"granularity":"week"}"#)).await;
    assert_eq!(status, 200);
    assert_eq!(body["kind"], "HISTORICAL_VIEW");
    assert_eq!(body["granularity"], "week");
    let after = logged_kinds(&s);
    assert_eq!(after.len(), before + 1);
    assert_eq!(after.last(), Some(&KindTag::HistoricalView));

    for bad in [r#"{"granularity":"year"}"#, "{}", "not json", r#"{"granularity":"day","x":1}"#] {
        let (status, body) = call(s.addr, "POST", "/interactions/historical", Some(bad)).await;
        assert_eq!(status, 400, "{bad}");
        assert!(body["error"].is_string());
    }
    assert_eq!(logged_kinds(&s).len(), before + 1);
}

#[tokio::test]
async fn prefs_update_is_applied_and_logged() {
    let s = start().await;
    let (status, body) = call(s.addr, "POST", "/prefs", Some(r#"{"daily_goal_ml":1140,"active_start":"08:00"}"#)).await;
    assert_eq!(status, 200);
    assert_eq!(body["prefs"]["daily_goal_ml"], 1140.0);
    assert_eq!(body["prefs"]["active_start"], "08:00");
    assert_eq!(body["event"]["kind"], "CONFIG_CHANGE");
    let (_, state) = call(s.addr, "GET", "/state", None).await;
    assert_eq!(state["snapshot"]["goal_ml"], 1140.0);
    assert_eq!(logged_kinds(&s).last(), Some(&KindTag::ConfigChange));

    let n = logged_kinds(&s).len();
    for bad in [
        r#"{"daily_goal_ml":-1}"#,
        r#"{"preferred_interval_min":0}"#,
        r#"{"active_start":"19:00"}"#,
        r#"{"active_end":"noon"}"#,
        r#"{"colour":"blue"}"#,
        "{}",
        "[",
    ] {
        let (status, _) = call(s.addr, "POST", "/prefs", Some(bad)).await;
        assert_eq!(status, 400, "{bad}");
    }
    assert_eq!(logged_kinds(&s).len(), n);
    let (_, state) = call(s.addr, "GET", "/state", None).await;
    assert_eq!(state["snapshot"]["goal_ml"], 1140.0);
}

#[tokio::test]
async fn history_series_and_validation() {
    let s = start().await;
    let (status, body) = call(s.addr, "GET", "/history?granularity=week", None).await;
    assert_eq!(status, 200);
    assert_eq!(body["granularity"], "week");
    assert_eq!(body["points"].as_array().unwrap().len(), 7);
    let (_, body) = call(s.addr, "GET", "/history?granularity=day", None).await;
    assert_eq!(body["points"].as_array().unwrap().len(), 24);
    assert_eq!(call(s.addr, "GET", "/history", None).await.0, 400);
    assert_eq!(call(s.addr, "GET", "/history?granularity=month", None).await.0, 400);
    assert!(logged_kinds(&s).is_empty());
}

#[tokio::test]
async fn unknown_paths_are_404() {
    let s = start().await;
    for path in ["/", "/nope", "/state/extra", "/interactions"] {
        assert_eq!(call(s.addr, "GET", path, None).await.0, 404, "{path}");
    }
}

#[tokio::test]
async fn sips_reach_state_and_feed() {
    let s = start().await;
    let t0 = day_start() + 1000;
    let mut samples = Vec::new();
    let mut t = t0;
    for (grams, n) in [(500.0, 20), (0.0, 10), (460.0, 20)] {
        for _ in 0..n {
            samples.push(WeightSample { ts: t, grams });
            t += 200;
        }
    }
    for sample in samples {
        s.handle.ingest(sample).await.unwrap();
    }
    let (_, state) = call(s.addr, "GET", "/state", None).await;
    assert_eq!(state["snapshot"]["consumed_ml"], 40.0);
    assert!(state["last_sip_ts"].is_i64());
    let (status, feed) = call(s.addr, "GET", "/events?timeout_ms=0", None).await;
    assert_eq!(status, 200);
    let events = feed["events"].as_array().unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["kind"], "SIP");
    assert_eq!(events[0]["volume_ml"], 40.0);
    assert_eq!(feed["cursor"], events[0]["seq"]);
}

#[tokio::test]
async fn long_poll_wakes_on_new_event() {
    let s = start().await;
    let (_, feed) = call(s.addr, "GET", "/events?since=99&timeout_ms=50", None).await;
    assert_eq!(feed["events"].as_array().unwrap().len(), 0);
    assert_eq!(feed["cursor"], 99);

    let addr = s.addr;
    let poll = tokio::spawn(async move { call(addr, "GET", "/events?timeout_ms=5000", None).await });
    tokio::time::sleep(Duration::from_millis(200)).await;
    assert!(!poll.is_finished());
    call(s.addr, "POST", "/interactions/historical", Some(r#"{"granularity":"sips"}"#)).await;
    let (status, feed) = tokio::time::timeout(Duration::from_secs(3), poll).await.unwrap().unwrap();
    assert_eq!(status, 200);
    let events = feed["events"].as_array().unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["kind"], "HISTORICAL_VIEW");

    let cursor = feed["cursor"].as_u64().unwrap();
    let (_, feed) = call(s.addr, "GET", &format!("/events?since={cursor}&timeout_ms=0"), None).await;
    assert!(feed["events"].as_array().unwrap().is_empty());
    assert_eq!(call(s.addr, "GET", "/events?since=abc", None).await.0, 400);
}

#[tokio::test]
async fn notifications_carry_their_message() {
    let s = start().await;
    // three hours without drinking: LOW band, prompts every 30 min
    s.handle.advance_to(day_start() + 3 * 3_600_000).await.unwrap();
    let (_, feed) = call(s.addr, "GET", "/events?timeout_ms=0", None).await;
    let notes: Vec<&Value> = feed["events"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["kind"] == "NOTIFICATION")
        .collect();
    assert!(!notes.is_empty());
    assert_eq!(notes[0]["message"], "water is good");
    let (_, state) = call(s.addr, "GET", "/state", None).await;
    assert_eq!(state["pending_notification"]["seq"], notes.last().unwrap()["seq"]);
}

#[tokio::test]
async fn stopped_loop_gives_503() {
    let s = start().await;
    s.handle.shutdown().await;
    tokio::time::sleep(Duration::from_millis(100)).await;
    assert_eq!(call(s.addr, "GET", "/state", None).await.0, 503);
    assert_eq!(call(s.addr, "POST", "/interactions/historical", Some(r#"{"granularity":"day"}"#)).await.0, 503);
}
