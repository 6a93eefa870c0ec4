//! HTTP and WebSocket routes.
//!
//! `GET /health`, `GET /document`, `GET /events?since=N`, `POST /command`
//! and `GET /ws`. A WebSocket session starts with a snapshot, then carries
//! every event in log order plus one reply per command.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use prewrite_core::llm::{Provider, RemoteChatProvider, RemoteConfig, DEFAULT_API_KEY_ENV};
use prewrite_core::CanvasDocument;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::task::JoinHandle;

use crate::actor::{self, ActorConfig, Handle};
use crate::protocol::{Envelope, ServerMessage};
use crate::transport::UreqTransport;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server failed: {0}")]
    Serve(std::io::Error),
    #[error("provider misconfigured: {0}")]
    Provider(String),
    #[error("could not write document: {0}")]
    Flush(String),
}

/// Builds the remote chat provider, failing early on missing settings.
pub fn remote_provider(
    base_url: Option<&str>,
    model: Option<&str>,
    timeout: Duration,
) -> Result<Arc<dyn Provider>, ServiceError> {
    let base_url = base_url.filter(|s| !s.is_empty()).ok_or(ServiceError::Provider("--base-url is required".into()))?;
    let model = model.filter(|s| !s.is_empty()).ok_or(ServiceError::Provider("--model is required".into()))?;
    let config = RemoteConfig::from_env(base_url, model, DEFAULT_API_KEY_ENV);
    if config.api_key.is_none() {
        return Err(ServiceError::Provider(format!("{DEFAULT_API_KEY_ENV} is not set")));
    }
    Ok(Arc::new(RemoteChatProvider::new(UreqTransport::new(timeout), config)))
}

pub struct Running {
    pub addr: SocketAddr,
    pub handle: Handle,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<Result<(), ServiceError>>,
}

impl Running {
    /// Stops accepting connections, writes the document and waits for the
    /// server to finish.
    pub async fn stop(mut self) -> Result<(), ServiceError> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        self.task.await.map_err(|e| ServiceError::Serve(std::io::Error::other(e)))?
    }
}

pub async fn start(
    doc: CanvasDocument,
    provider: Arc<dyn Provider>,
    config: ActorConfig,
    addr: SocketAddr,
) -> Result<Running, ServiceError> {
    let listener = TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind { addr, source })?;
    let addr = listener.local_addr().map_err(ServiceError::Serve)?;
    let (handle, actor_task) = actor::spawn(doc, provider, config);
    let (stop, stopped) = oneshot::channel::<()>();
    let (flushed_tx, flushed_rx) = oneshot::channel();
    let h = handle.clone();
    let app = router(handle.clone());
    let task = tokio::spawn(async move {
        let shutdown = async move {
            let _ = stopped.await;
            let _ = flushed_tx.send(h.shutdown().await);
        };
        axum::serve(listener, app).with_graceful_shutdown(shutdown).await.map_err(ServiceError::Serve)?;
        let _ = actor_task.await;
        flushed_rx.await.unwrap_or(Ok(())).map_err(ServiceError::Flush)
    });
    tracing::info!(%addr, "listening");
    Ok(Running { addr, handle, stop: Some(stop), task })
}

pub fn router(handle: Handle) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/document", get(document))
        .route("/events", get(events))
        .route("/command", post(command))
        .route("/ws", get(ws))
        .with_state(handle)
}

fn unavailable() -> Response {
    (StatusCode::SERVICE_UNAVAILABLE, "service is shutting down").into_response()
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn document(State(handle): State<Handle>) -> Response {
    match handle.document().await {
        Some(text) => ([(header::CONTENT_TYPE, "application/json")], text).into_response(),
        None => unavailable(),
    }
}

#[derive(Deserialize)]
struct Since {
    #[serde(default)]
    since: u64,
}

async fn events(State(handle): State<Handle>, Query(q): Query<Since>) -> Response {
    match handle.events_since(q.since).await {
        Some(events) => Json(events).into_response(),
        None => unavailable(),
    }
}

async fn command(State(handle): State<Handle>, Json(envelope): Json<Envelope>) -> Json<ServerMessage> {
    let reply = handle.command(envelope.command).await;
    Json(ServerMessage::reply(envelope.client_seq, reply))
}

async fn ws(State(handle): State<Handle>, upgrade: WebSocketUpgrade) -> Response {
    upgrade.on_upgrade(move |socket| session(socket, handle))
}

fn client_seq_of(text: &str) -> Option<u64> {
    serde_json::from_str::<Value>(text).ok()?.get("client_seq")?.as_u64()
}

async fn session(socket: WebSocket, handle: Handle) {
    let Some(mut sub) = handle.subscribe().await else { return };
    let (mut sink, mut stream) = socket.split();
    if sink.send(Message::Text(sub.snapshot.to_json().into())).await.is_err() {
        return;
    }
    let (out_tx, mut out_rx) = mpsc::channel::<String>(256);
    let commands = handle.clone();
    // Commands from one client run in order, so its replies arrive in order.
    let reader = tokio::spawn(async move {
        while let Some(Ok(msg)) = stream.next().await {
            let text = match msg {
                Message::Text(t) => t,
                Message::Close(_) => break,
                _ => continue,
            };
            let reply = match serde_json::from_str::<Envelope>(&text) {
                Ok(env) => ServerMessage::reply(env.client_seq, commands.command(env.command).await),
                Err(e) => ServerMessage::reply(client_seq_of(&text), Err(format!("bad command: {e}"))),
            };
            if out_tx.send(reply.to_json()).await.is_err() {
                break;
            }
        }
    });
    loop {
        // Events first: the actor publishes a command's events before it
        // answers, so this keeps every reply behind the events it caused.
        let text: String = tokio::select! {
            biased;
            ev = sub.events.recv() => match ev {
                Ok(text) => text.to_string(),
                Err(broadcast::error::RecvError::Lagged(missed)) => {
                    tracing::warn!(missed, "client fell behind; resending snapshot");
                    match handle.subscribe().await {
                        Some(fresh) => {
                            sub = fresh;
                            sub.snapshot.to_json()
                        }
                        None => break,
                    }
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            out = out_rx.recv() => match out {
                Some(text) => text,
                None => break,
            },
        };
        if sink.send(Message::Text(text.into())).await.is_err() {
            break;
        }
    }
    let _ = sink.send(Message::Close(None)).await;
    reader.abort();
}
