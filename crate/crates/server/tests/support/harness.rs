//! Runs the service on an ephemeral port against a temporary log.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use corec_core::domain::{Role, WorldState};
use corec_core::store::{ContextEvent, EventLog};
use corec_core::travel::Router;
use corec_core::Coordinator;
use corec_server::{seed_participants, AppState, TokenEntry};
use futures::StreamExt;
use serde_json::Value;

pub const DM: &str = "tok-dm";
pub const AFFECTED: &str = "tok-aff";
pub const NEAR: &str = "tok-near";
pub const FAR: &str = "tok-far";

pub fn tokens() -> Vec<TokenEntry> {
    let t = |token: &str, id: &str, role| TokenEntry { token: token.into(), participant_id: id.into(), role, name: id.into() };
    vec![
        t(DM, "dm-1", Role::DecisionMaker),
        t(AFFECTED, "aff-1", Role::Affected),
        t(NEAR, "near", Role::Driver),
        t(FAR, "far", Role::Driver),
        t("tok-new", "unit-003", Role::Driver),
    ]
}

pub struct Server {
    pub base: String,
    pub state: AppState,
    pub initial: WorldState,
    pub log_path: PathBuf,
    pub client: reqwest::Client,
    _dir: tempfile::TempDir,
}

impl Server {
    pub async fn start(world: WorldState) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let log_path = dir.path().join("events.ndjson");
        let mut initial = world;
        let tokens = tokens();
        seed_participants(&mut initial, &tokens);
        let coord =
            Coordinator::new(initial.clone(), EventLog::open(&log_path).unwrap(), Router::offline(), Default::default())
                .unwrap();
        let state = AppState::new(coord, &tokens);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}/api/v1", listener.local_addr().unwrap());
        tokio::spawn(corec_server::serve(listener, state.clone()));
        Self { base, state, initial, log_path, client: reqwest::Client::new(), _dir: dir }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    pub async fn get(&self, token: Option<&str>, path: &str) -> (u16, Value) {
        let mut req = self.client.get(self.url(path));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn post(&self, token: Option<&str>, path: &str, body: Value) -> (u16, Value) {
        let mut req = self.client.post(self.url(path)).json(&body);
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub fn log_len(&self) -> usize {
        self.state.read().log().len()
    }

    pub fn events_on_disk(&self) -> Vec<ContextEvent> {
        EventLog::load(&self.log_path).unwrap()
    }

    /// Polls until `check` holds or `timeout` passes.
    pub async fn wait_for(&self, timeout: Duration, mut check: impl FnMut(&Coordinator) -> bool) -> bool {
        let start = Instant::now();
        while start.elapsed() < timeout {
            if check(&self.state.read()) {
                return true;
            }
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
        false
    }
}

#[derive(Debug, Clone)]
pub struct SseEvent {
    pub id: u64,
    pub kind: String,
    pub data: Value,
}

/// Reads up to `n` stream events, giving up after `timeout`.
pub async fn read_events(
    client: &reqwest::Client,
    url: &str,
    token: &str,
    last_event_id: Option<u64>,
    n: usize,
    timeout: Duration,
) -> Vec<SseEvent> {
    let mut req = client.get(url).bearer_auth(token);
    if let Some(id) = last_event_id {
        req = req.header("Last-Event-ID", id.to_string());
    }
    let resp = req.send().await.unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    let mut body = resp.bytes_stream();
    let mut buf = String::new();
    let mut out = Vec::new();
    let deadline = tokio::time::Instant::now() + timeout;
    while out.len() < n {
        let chunk = match tokio::time::timeout_at(deadline, body.next()).await {
            Ok(Some(Ok(c))) => c,
            _ => break,
        };
        buf.push_str(&String::from_utf8_lossy(&chunk));
        while let Some(end) = buf.find("\n\n") {
            let block: String = buf.drain(..end + 2).collect();
            let (mut id, mut kind, mut data) = (None, String::new(), String::new());
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("id:") {
                    id = v.trim().parse().ok();
                } else if let Some(v) = line.strip_prefix("event:") {
                    kind = v.trim().to_string();
                } else if let Some(v) = line.strip_prefix("data:") {
                    data.push_str(v.trim_start());
                }
            }
            if let Some(id) = id {
                out.push(SseEvent { id, kind, data: serde_json::from_str(&data).unwrap() });
            }
        }
    }
    out
}
