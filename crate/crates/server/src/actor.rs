//! The single writer. One task owns the engine; HTTP handlers, WebSocket
//! sessions and finished LLM calls all reach it through one queue, so every
//! event gets its place in a single total order.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use prewrite_core::llm::{self, execute_dispatch, Dialogue, Feedback, LlmError, Provider};
use prewrite_core::persist;
use prewrite_core::tasks::delegate_task;
use prewrite_core::{
    CanvasDocument, Dispatch, Engine, EngineConfig, EngineError, Event, GenerationResult, LabelOutcome, Millis, NodeId,
    RequestId,
};
use serde_json::{json, Value};
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::task::JoinHandle;
use tokio::time::{interval_at, Instant, MissedTickBehavior};

use crate::protocol::{Command, ServerMessage};

pub type Reply = Result<Value, String>;

const QUEUE: usize = 1024;
const FANOUT: usize = 4096;

#[derive(Debug, Clone)]
pub struct ActorConfig {
    pub engine: EngineConfig,
    pub seed: u64,
    /// Where `save` and shutdown write the document. `None` keeps it in memory.
    pub doc_path: Option<PathBuf>,
    pub timer_poll: Duration,
}

impl ActorConfig {
    pub fn new(engine: EngineConfig, seed: u64, doc_path: Option<PathBuf>) -> Self {
        Self { engine, seed, doc_path, timer_poll: Duration::from_millis(250) }
    }
}

/// A consistent starting point: the snapshot covers exactly the events before
/// the first one the receiver will yield.
pub struct Subscription {
    pub snapshot: ServerMessage,
    pub events: broadcast::Receiver<Arc<str>>,
}

enum Msg {
    Command(Command, oneshot::Sender<Reply>),
    Subscribe(oneshot::Sender<Subscription>),
    EventsSince(u64, oneshot::Sender<Vec<Event>>),
    Document(oneshot::Sender<String>),
    Deliver(RequestId, Result<GenerationResult, String>),
    Regenerated { node: NodeId, feedback: Feedback, request: Dialogue, reply: Result<String, LlmError>, respond: oneshot::Sender<Reply> },
    Explained { node: NodeId, request: Dialogue, reply: Result<String, LlmError>, respond: oneshot::Sender<Reply> },
    Shutdown(oneshot::Sender<Result<(), String>>),
}

#[derive(Clone)]
pub struct Handle {
    tx: mpsc::Sender<Msg>,
}

const STOPPED: &str = "service is shutting down";

impl Handle {
    async fn ask<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Msg) -> Option<T> {
        let (tx, rx) = oneshot::channel();
        self.tx.send(make(tx)).await.ok()?;
        rx.await.ok()
    }

    pub async fn command(&self, command: Command) -> Reply {
        self.ask(|r| Msg::Command(command, r)).await.unwrap_or_else(|| Err(STOPPED.into()))
    }

    pub async fn subscribe(&self) -> Option<Subscription> {
        self.ask(Msg::Subscribe).await
    }

    pub async fn events_since(&self, since: u64) -> Option<Vec<Event>> {
        self.ask(|r| Msg::EventsSince(since, r)).await
    }

    /// The document as canonical JSON.
    pub async fn document(&self) -> Option<String> {
        self.ask(Msg::Document).await
    }

    /// Stops the actor after writing the document. Later calls report an error.
    pub async fn shutdown(&self) -> Result<(), String> {
        self.ask(Msg::Shutdown).await.unwrap_or_else(|| Err(STOPPED.into()))
    }
}

pub fn spawn(doc: CanvasDocument, provider: Arc<dyn Provider>, config: ActorConfig) -> (Handle, JoinHandle<()>) {
    let (tx, rx) = mpsc::channel(QUEUE);
    let (events, _) = broadcast::channel(FANOUT);
    let last = doc.last_seq();
    let clock = doc.event_log().last().map_or(0, |e| e.timestamp_ms);
    let actor = Actor {
        engine: Engine::new(doc, config.engine, config.seed),
        provider,
        config,
        tx: tx.downgrade(),
        events,
        published: last,
        saved: last,
        clock,
        dispatches: Vec::new(),
    };
    (Handle { tx }, tokio::spawn(actor.run(rx)))
}

struct Actor {
    engine: Engine,
    provider: Arc<dyn Provider>,
    config: ActorConfig,
    tx: mpsc::WeakSender<Msg>,
    events: broadcast::Sender<Arc<str>>,
    published: u64,
    saved: u64,
    clock: Millis,
    dispatches: Vec<Dispatch>,
}

impl Actor {
    async fn run(mut self, mut rx: mpsc::Receiver<Msg>) {
        let tick_period = Duration::from_millis(self.engine.config().scheduler.tick_ms().max(1));
        let mut tick = interval_at(Instant::now() + tick_period, tick_period);
        tick.set_missed_tick_behavior(MissedTickBehavior::Delay);
        let mut timers = interval_at(Instant::now() + self.config.timer_poll, self.config.timer_poll);
        timers.set_missed_tick_behavior(MissedTickBehavior::Delay);
        loop {
            let deferred = tokio::select! {
                msg = rx.recv() => match msg {
                    None => break,
                    Some(Msg::Shutdown(respond)) => {
                        let _ = respond.send(self.flush());
                        break;
                    }
                    Some(msg) => self.handle(msg),
                },
                _ = tick.tick() => {
                    let now = self.now();
                    self.dispatches.extend(self.engine.tick(now));
                    if self.engine.doc().last_seq() > self.saved {
                        if let Err(e) = self.flush() {
                            tracing::warn!(error = %e, "autosave failed");
                        }
                    }
                    None
                }
                _ = timers.tick() => {
                    let now = self.now();
                    self.engine.advance_timers(now);
                    None
                }
            };
            self.spawn_dispatches();
            self.publish();
            // Replies go out after their events, so a client always sees the
            // effect of a command before its acknowledgment.
            if let Some((respond, reply)) = deferred {
                let _ = respond.send(reply);
            }
        }
        self.publish();
    }

    /// Wall-clock milliseconds, never earlier than the last logged event.
    fn now(&mut self) -> Millis {
        let wall = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as Millis);
        self.clock = self.clock.max(wall);
        self.clock
    }

    fn publish(&mut self) {
        let log = self.engine.doc().event_log();
        let start = log.partition_point(|e| e.seq <= self.published);
        for event in &log[start..] {
            let text: Arc<str> = ServerMessage::Event { event: event.clone() }.to_json().into();
            // No receivers is fine; the log keeps everything.
            let _ = self.events.send(text);
        }
        self.published = self.engine.doc().last_seq();
    }

    fn flush(&mut self) -> Result<(), String> {
        let Some(path) = &self.config.doc_path else { return Ok(()) };
        persist::save(self.engine.doc(), path).map_err(|e| e.to_string())?;
        self.saved = self.engine.doc().last_seq();
        tracing::info!(path = %path.display(), seq = self.saved, "document saved");
        Ok(())
    }

    fn snapshot(&self) -> ServerMessage {
        ServerMessage::Snapshot {
            seq: self.engine.doc().last_seq(),
            document: serde_json::to_value(self.engine.doc()).expect("document serializes"),
            config: serde_json::to_value(self.engine.config()).expect("config serializes"),
        }
    }

    fn handle(&mut self, msg: Msg) -> Option<(oneshot::Sender<Reply>, Reply)> {
        match msg {
            Msg::Command(command, respond) => self.command(command, respond),
            Msg::Subscribe(respond) => {
                let _ = respond.send(Subscription { snapshot: self.snapshot(), events: self.events.subscribe() });
                None
            }
            Msg::EventsSince(since, respond) => {
                let log = self.engine.doc().event_log();
                let start = log.partition_point(|e| e.seq <= since);
                let _ = respond.send(log[start..].to_vec());
                None
            }
            Msg::Document(respond) => {
                let _ = respond.send(persist::to_json(self.engine.doc()));
                None
            }
            Msg::Deliver(request_id, outcome) => {
                let now = self.now();
                if let Err(e) = self.engine.on_result(now, request_id, outcome) {
                    tracing::debug!(%request_id, error = %e, "result not applied");
                }
                None
            }
            Msg::Regenerated { node, feedback, request, reply, respond } => {
                let now = self.now();
                let r = self.engine.finish_regenerate(now, node, feedback, &request, reply);
                Some((respond, r.map(|text| json!({ "text": text })).map_err(|e| e.to_string())))
            }
            Msg::Explained { node, request, reply, respond } => {
                let now = self.now();
                let r = self.engine.finish_explain(now, node, &request, reply);
                Some((respond, r.map(|text| json!({ "explanation": text })).map_err(|e| e.to_string())))
            }
            Msg::Shutdown(_) => unreachable!("handled by the loop"),
        }
    }

    fn command(&mut self, command: Command, respond: oneshot::Sender<Reply>) -> Option<(oneshot::Sender<Reply>, Reply)> {
        let params = self.engine.config().completion;
        match command {
            Command::Regenerate { node_id, feedback } => match self.engine.regenerate_request(node_id, feedback) {
                Ok(request) => {
                    self.blocking(move |provider, tx| {
                        let reply = llm::complete(provider, &request, &params);
                        Msg::Regenerated { node: node_id, feedback, request, reply, respond }.send_on(tx);
                    });
                    None
                }
                Err(e) => Some((respond, Err(e.to_string()))),
            },
            Command::Explain { node_id } => match self.engine.explain_request(node_id) {
                Ok(request) => {
                    self.blocking(move |provider, tx| {
                        let reply = llm::complete(provider, &request, &params);
                        Msg::Explained { node: node_id, request, reply, respond }.send_on(tx);
                    });
                    None
                }
                Err(e) => Some((respond, Err(e.to_string()))),
            },
            Command::DelegateTask { name_hint } => {
                // Delegation only reads the document; the client confirms the
                // proposal with `confirm_task`.
                let doc = self.engine.doc().clone();
                self.blocking(move |provider, _| {
                    let r = delegate_task(&doc, name_hint.as_deref(), provider, &params)
                        .map(|spec| serde_json::to_value(spec).expect("task serializes"))
                        .map_err(|e| e.to_string());
                    let _ = respond.send(r);
                });
                None
            }
            Command::Snapshot => Some((respond, Ok(serde_json::to_value(self.snapshot()).expect("snapshot serializes")))),
            Command::Save => {
                let reply = match self.config.doc_path {
                    None => Ok(json!({ "saved": false })),
                    Some(_) => self.flush().map(|_| json!({ "saved": true, "seq": self.saved })),
                };
                Some((respond, reply))
            }
            other => {
                let reply = self.apply(other).map_err(|e| e.to_string());
                Some((respond, reply))
            }
        }
    }

    fn blocking(&self, job: impl FnOnce(&dyn Provider, Option<mpsc::Sender<Msg>>) + Send + 'static) {
        let provider = Arc::clone(&self.provider);
        let tx = self.tx.clone();
        tokio::task::spawn_blocking(move || job(&*provider, tx.upgrade()));
    }

    fn spawn_dispatches(&mut self) {
        let params = self.engine.config().completion;
        for d in std::mem::take(&mut self.dispatches) {
            self.blocking(move |provider, tx| {
                let outcome = execute_dispatch(provider, &d.dialogue, d.output, d.partner, &params).map_err(|e| e.to_string());
                Msg::Deliver(d.request_id, outcome).send_on(tx);
            });
        }
    }

    fn apply(&mut self, command: Command) -> Result<Value, EngineError> {
        let now = self.now();
        let e = &mut self.engine;
        Ok(match command {
            Command::AddNode { kind, text, position, size } => {
                let id = e.doc_mut().add_node(now, kind, text, position, size.unwrap_or(kind.default_size()))?;
                json!({ "node_id": id })
            }
            Command::UpdateText { node_id, text } => {
                let ds = e.update_text(now, node_id, text)?;
                let n = ds.len();
                self.dispatches.extend(ds);
                json!({ "dispatched": n })
            }
            Command::MoveNode { node_id, position } => {
                e.doc_mut().move_node(now, node_id, position)?;
                Value::Null
            }
            Command::ResizeNode { node_id, size } => {
                e.doc_mut().resize_node(now, node_id, size)?;
                Value::Null
            }
            Command::DeleteNode { node_id } => {
                e.doc_mut().delete_node(now, node_id)?;
                Value::Null
            }
            Command::Connect { from, to, directed } => json!({ "edge_id": e.doc_mut().connect(now, from, to, directed)? }),
            Command::Disconnect { edge_id } => {
                e.doc_mut().disconnect(now, edge_id)?;
                Value::Null
            }
            Command::AddSection { title, rect } => json!({ "section_id": e.doc_mut().add_section(now, title, rect)? }),
            Command::DeleteSection { section_id } => {
                e.doc_mut().delete_section(now, section_id)?;
                Value::Null
            }
            Command::MoveCursor { position } => {
                e.doc_mut().move_cursor(now, position);
                Value::Null
            }
            Command::Outline { section_id } => json!({ "outline": e.doc().section_outline(section_id)? }),
            Command::ConfirmTask { task } => json!({ "task_id": e.doc_mut().confirm_task(now, task)? }),
            Command::UpdateTask { task } => {
                e.doc_mut().update_task(now, task)?;
                Value::Null
            }
            Command::SelectPrompt { task_id, index } => {
                e.doc_mut().select_prompt(now, task_id, index)?;
                Value::Null
            }
            Command::DeleteTask { task_id } => {
                e.doc_mut().delete_task(now, task_id)?;
                Value::Null
            }
            Command::SetInitiative { task_id, mode, scope } => {
                e.doc_mut().set_initiative(now, task_id, mode, scope)?;
                Value::Null
            }
            Command::SetVisibility { task_id, visible } => {
                e.set_visibility(now, task_id, visible)?;
                Value::Null
            }
            Command::Expand { anchor, task_id } => json!({ "candidates": e.expand(now, anchor, task_id)? }),
            Command::Collapse { anchor, task_id } => {
                e.collapse(now, anchor, task_id)?;
                Value::Null
            }
            Command::ClickLabel { anchor, task_id } => {
                let outcome = e.click_label(now, anchor, task_id)?;
                let v = serde_json::to_value(&outcome).expect("outcome serializes");
                if let LabelOutcome::Requested(d) = outcome {
                    self.dispatches.push(d);
                }
                v
            }
            Command::ExpandAll { anchor } => json!({ "candidates": e.expand_all(now, anchor)? }),
            Command::CloseAll { anchor } => json!({ "closed": e.close_all(now, anchor)? }),
            Command::Preview { anchor } => json!(e.preview(anchor)),
            Command::Header { anchor } => {
                if !e.doc().has_anchor(anchor) {
                    return Err(EngineError::UnknownAnchor(anchor));
                }
                let labels: Vec<Value> = e
                    .doc()
                    .tasks()
                    .iter()
                    .filter_map(|t| e.header_status(anchor, t.id).map(|s| json!({ "task_id": t.id, "status": s })))
                    .collect();
                json!(labels)
            }
            Command::Accept { node_id } => {
                e.accept(now, node_id)?;
                Value::Null
            }
            Command::Discard { node_id } => {
                e.discard(now, node_id)?;
                Value::Null
            }
            Command::RequestReactive { anchor, task_id } => {
                let d = e.request_reactive(now, anchor, task_id)?;
                let id = d.request_id;
                self.dispatches.push(d);
                json!({ "request_id": id })
            }
            Command::Snapshot
            | Command::Save
            | Command::Regenerate { .. }
            | Command::Explain { .. }
            | Command::DelegateTask { .. } => {
                unreachable!("answered by Actor::command")
            }
        })
    }
}

impl Msg {
    fn send_on(self, tx: Option<mpsc::Sender<Msg>>) {
        if let Some(tx) = tx {
            let _ = tx.blocking_send(self);
        }
    }
}
