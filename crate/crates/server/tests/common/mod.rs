#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use prewrite_core::llm::{CompletionParams, Dialogue, LlmError, MockProvider, Provider};
use prewrite_core::{CanvasDocument, EngineConfig, SchedulerConfig};
use prewrite_server::{ActorConfig, Running};
use serde_json::{json, Value};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub const T0: u64 = 1_000;

pub struct Failing;

impl Provider for Failing {
    fn complete(&self, _: &Dialogue, _: &CompletionParams) -> Result<String, LlmError> {
        Err(LlmError::Transport("connection refused".into()))
    }
}

pub fn config(tick_seconds: f64, doc_path: Option<PathBuf>) -> ActorConfig {
    let scheduler = SchedulerConfig { tick_seconds, ..SchedulerConfig::default() };
    let mut c = ActorConfig::new(EngineConfig { scheduler, ..EngineConfig::default() }, 7, doc_path);
    c.timer_poll = Duration::from_millis(50);
    c
}

pub async fn start_with(provider: Arc<dyn Provider>, cfg: ActorConfig) -> Running {
    let addr: SocketAddr = "127.0.0.1:0".parse().unwrap();
    prewrite_server::start(CanvasDocument::with_defaults(T0), provider, cfg, addr).await.unwrap()
}

/// A mock-backed service that never ticks on its own.
pub async fn start_quiet() -> Running {
    start_with(Arc::new(MockProvider::new(7)), config(3600.0, None)).await
}

pub async fn connect(addr: SocketAddr) -> Ws {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    ws
}

/// Next JSON message, or `None` when the server closes the socket.
pub async fn recv(ws: &mut Ws) -> Option<Value> {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next()).await.expect("server went quiet")?;
        match msg.ok()? {
            Message::Text(t) => return Some(serde_json::from_str(&t).unwrap()),
            Message::Close(_) => return None,
            _ => continue,
        }
    }
}

pub async fn send(ws: &mut Ws, client_seq: u64, cmd: &str, args: Value) {
    let msg = json!({ "cmd": cmd, "args": args, "client_seq": client_seq });
    ws.send(Message::Text(msg.to_string().into())).await.unwrap();
}

/// Sends a command and collects the events that precede its reply.
pub async fn call(ws: &mut Ws, client_seq: u64, cmd: &str, args: Value) -> (Vec<Value>, Value) {
    send(ws, client_seq, cmd, args).await;
    let mut events = Vec::new();
    loop {
        let m = recv(ws).await.expect("socket closed before reply");
        match m["type"].as_str() {
            Some("reply") if m["client_seq"] == client_seq => return (events, m),
            Some("event") => events.push(m["event"].clone()),
            _ => {}
        }
    }
}

pub fn keyword_task(doc: &CanvasDocument) -> String {
    let t = doc
        .tasks()
        .iter()
        .find(|t| t.input_type == prewrite_core::InputType::Keyword)
        .expect("a keyword task exists");
    t.id.to_string()
}

/// Returns the first event in `seen` matching `pred`, reading more from the
/// socket (and appending to `seen`) until one shows up.
pub async fn wait_for(ws: &mut Ws, seen: &mut Vec<Value>, pred: impl Fn(&Value) -> bool) -> Value {
    let mut checked = 0;
    loop {
        if let Some(e) = seen[checked..].iter().find(|e| pred(e)) {
            return e.clone();
        }
        checked = seen.len();
        let m = recv(ws).await.expect("socket closed");
        if m["type"] == "event" {
            seen.push(m["event"].clone());
        }
    }
}
