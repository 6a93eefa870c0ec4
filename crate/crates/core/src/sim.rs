//! Headless simulation on a virtual clock with the mock provider.
//!
//! All pending work is recoverable from the document alone: in-flight
//! requests carry their dispatch time, curtains carry their deadline, and
//! ticks fall on multiples of the tick period. A document saved mid-run and
//! resumed at the same instant continues exactly as the uninterrupted run.

use serde::{Deserialize, Serialize};

use crate::document::CanvasDocument;
use crate::engine::{Engine, EngineConfig, EngineError};
use crate::event::Event;
use crate::graph::NodeKind;
use crate::ids::{Anchor, NodeId, RequestId, TaskId};
use crate::llm::{execute_dispatch, Feedback, MockFaults, MockProvider};
use crate::state::Phase;
use crate::tasks::{Initiative, Scope};
use crate::{Millis, Point, Rect};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "do", rename_all = "snake_case")]
pub enum Action {
    /// No-op; lets a trace run the clock forward.
    Wait,
    MoveCursor { x: f64, y: f64 },
    AddNode { kind: NodeKind, text: String, x: f64, y: f64 },
    EditText { node: NodeId, text: String },
    MoveNode { node: NodeId, x: f64, y: f64 },
    DeleteNode { node: NodeId },
    Connect { from: NodeId, to: NodeId, #[serde(default)] directed: bool },
    AddSection { title: String, x: f64, y: f64, width: f64, height: f64 },
    Expand { anchor: Anchor, task: TaskId },
    Collapse { anchor: Anchor, task: TaskId },
    ClickLabel { anchor: Anchor, task: TaskId },
    ExpandAll { anchor: Anchor },
    CloseAll { anchor: Anchor },
    Accept { node: NodeId },
    Discard { node: NodeId },
    /// Accepts the `index`-th displayed candidate of a header label.
    AcceptCandidate { anchor: Anchor, task: TaskId, index: usize },
    DiscardCandidate { anchor: Anchor, task: TaskId, index: usize },
    Regenerate { node: NodeId, feedback: Feedback },
    Explain { node: NodeId },
    SetInitiative { task: TaskId, scope: Scope, mode: Initiative },
    SetVisibility { task: TaskId, visible: bool },
    RequestReactive { anchor: Anchor, task: TaskId },
    DeleteTask { task: TaskId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedAction {
    pub at: Millis,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceScript {
    pub actions: Vec<TimedAction>,
    /// Run the clock to this instant after the last action.
    #[serde(default)]
    pub until: Option<Millis>,
}

impl TraceScript {
    pub fn validate(&self) -> Result<(), SimError> {
        for (i, w) in self.actions.windows(2).enumerate() {
            if w[1].at < w[0].at {
                return Err(SimError::TimeWentBack { index: i + 1, at: w[1].at, prev: w[0].at });
            }
        }
        Ok(())
    }

    pub fn end(&self) -> Millis {
        let last = self.actions.last().map_or(0, |a| a.at);
        self.until.map_or(last, |u| u.max(last))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub engine: EngineConfig,
    /// Virtual time between dispatch and result delivery.
    pub latency_ms: Millis,
    pub faults: MockFaults,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { engine: EngineConfig::default(), latency_ms: 1500, faults: MockFaults::default() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("malformed trace: {0}")]
    Malformed(String),
    #[error("action {index} at {at} precedes previous action at {prev}")]
    TimeWentBack { index: usize, at: Millis, prev: Millis },
    #[error("invalid config: {0}")]
    Config(String),
}

enum Due {
    Deliver(RequestId),
    Timers,
    Tick,
}

pub struct Simulator {
    engine: Engine,
    provider: MockProvider,
    config: SimConfig,
    now: Millis,
}

impl Simulator {
    /// Fresh document with the default tasks at time zero.
    pub fn new(seed: u64, config: SimConfig) -> Self {
        Self::resume(CanvasDocument::with_defaults(0), seed, config, 0)
    }

    /// Continues a saved document from virtual time `now`.
    pub fn resume(doc: CanvasDocument, seed: u64, config: SimConfig, now: Millis) -> Self {
        Self {
            engine: Engine::new(doc, config.engine, seed),
            provider: MockProvider::with_faults(seed, config.faults),
            config,
            now,
        }
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut Engine {
        &mut self.engine
    }

    pub fn doc(&self) -> &CanvasDocument {
        self.engine.doc()
    }

    pub fn into_doc(self) -> CanvasDocument {
        self.engine.into_doc()
    }

    fn next_tick(&self) -> Millis {
        let period = self.config.engine.scheduler.tick_ms().max(1);
        (self.now / period + 1) * period
    }

    fn next_delivery(&self) -> Option<(Millis, RequestId)> {
        self.doc()
            .states()
            .filter_map(|(_, _, s)| match &s.phase {
                Phase::InFlight { request_id, dispatched_at, .. } => {
                    Some((dispatched_at + self.config.latency_ms, *request_id))
                }
                _ => None,
            })
            .min_by_key(|(t, r)| (*t, r.0))
    }

    fn next_due(&self) -> (Millis, Due) {
        let mut best = (self.next_tick(), Due::Tick);
        if let Some(t) = self.engine.next_curtain_deadline() {
            if t <= best.0 {
                best = (t, Due::Timers);
            }
        }
        if let Some((t, r)) = self.next_delivery() {
            if t <= best.0 {
                best = (t, Due::Deliver(r));
            }
        }
        best
    }

    /// Processes every delivery, timer and tick due at or before `until`.
    /// Deliveries run before timers, and timers before ticks, at equal times.
    pub fn run_until(&mut self, until: Millis) {
        loop {
            let (at, due) = self.next_due();
            if at > until {
                break;
            }
            self.now = self.now.max(at);
            match due {
                Due::Deliver(r) => self.deliver(r),
                Due::Timers => {
                    self.engine.advance_timers(at);
                }
                Due::Tick => {
                    self.engine.tick(at);
                }
            }
        }
        self.now = self.now.max(until);
    }

    fn deliver(&mut self, request_id: RequestId) {
        let found = self.doc().states().find_map(|(_, t, s)| match &s.phase {
            Phase::InFlight { request_id: r, dialogue, partner, .. } if *r == request_id => {
                Some((t, dialogue.clone(), *partner))
            }
            _ => None,
        });
        let Some((task_id, dialogue, partner)) = found else { return };
        let Some(output) = self.doc().task(task_id).map(|t| t.output_type) else { return };
        let outcome = execute_dispatch(&self.provider, &dialogue, output, partner, &self.config.engine.completion)
            .map_err(|e| e.to_string());
        let _ = self.engine.on_result(self.now, request_id, outcome);
    }

    fn candidate(&self, anchor: Anchor, task: TaskId, index: usize) -> Result<NodeId, EngineError> {
        match self.doc().phase(anchor, task) {
            Phase::Display { candidates, .. } => {
                candidates.get(index).copied().ok_or(EngineError::NothingToShow { anchor, task })
            }
            p => Err(EngineError::WrongState { anchor, task, phase: p.name(), action: "pick" }),
        }
    }

    /// Applies one user action at the current virtual time.
    pub fn apply(&mut self, action: &Action) -> Result<(), EngineError> {
        let now = self.now;
        let e = &mut self.engine;
        match action {
            Action::Wait => {}
            Action::MoveCursor { x, y } => e.doc_mut().move_cursor(now, Point::new(*x, *y)),
            Action::AddNode { kind, text, x, y } => {
                e.doc_mut().add_node(now, *kind, text.clone(), Point::new(*x, *y), kind.default_size())?;
            }
            Action::EditText { node, text } => {
                e.update_text(now, *node, text.clone())?;
            }
            Action::MoveNode { node, x, y } => e.doc_mut().move_node(now, *node, Point::new(*x, *y))?,
            Action::DeleteNode { node } => e.doc_mut().delete_node(now, *node)?,
            Action::Connect { from, to, directed } => {
                e.doc_mut().connect(now, *from, *to, *directed)?;
            }
            Action::AddSection { title, x, y, width, height } => {
                e.doc_mut().add_section(now, title.clone(), Rect { x: *x, y: *y, width: *width, height: *height })?;
            }
            Action::Expand { anchor, task } => {
                e.expand(now, *anchor, *task)?;
            }
            Action::Collapse { anchor, task } => e.collapse(now, *anchor, *task)?,
            Action::ClickLabel { anchor, task } => {
                e.click_label(now, *anchor, *task)?;
            }
            Action::ExpandAll { anchor } => {
                e.expand_all(now, *anchor)?;
            }
            Action::CloseAll { anchor } => {
                e.close_all(now, *anchor)?;
            }
            Action::Accept { node } => e.accept(now, *node)?,
            Action::Discard { node } => e.discard(now, *node)?,
            Action::AcceptCandidate { anchor, task, index } => {
                let node = self.candidate(*anchor, *task, *index)?;
                self.engine.accept(now, node)?;
            }
            Action::DiscardCandidate { anchor, task, index } => {
                let node = self.candidate(*anchor, *task, *index)?;
                self.engine.discard(now, node)?;
            }
            Action::Regenerate { node, feedback } => {
                e.regenerate(now, *node, *feedback, &self.provider)?;
            }
            Action::Explain { node } => {
                e.explain(now, *node, &self.provider)?;
            }
            Action::SetInitiative { task, scope, mode } => e.doc_mut().set_initiative(now, *task, *mode, *scope)?,
            Action::SetVisibility { task, visible } => e.set_visibility(now, *task, *visible)?,
            Action::RequestReactive { anchor, task } => {
                e.request_reactive(now, *anchor, *task)?;
            }
            Action::DeleteTask { task } => e.doc_mut().delete_task(now, *task)?,
        }
        Ok(())
    }

    /// Runs a script to its end. Rejected actions are logged as error events
    /// and the run continues.
    pub fn run_script(&mut self, trace: &TraceScript) -> Result<(), SimError> {
        trace.validate()?;
        for step in &trace.actions {
            self.run_until(step.at);
            if let Err(err) = self.apply(&step.action) {
                let now = self.now;
                self.engine.doc_mut().log_error(now, None, None, err.to_string());
            }
        }
        self.run_until(trace.end());
        Ok(())
    }
}

/// Runs `trace` against a fresh document and returns the full event log.
/// Identical inputs give identical logs.
pub fn simulate(trace: &TraceScript, seed: u64, config: SimConfig) -> Result<Vec<Event>, SimError> {
    config.engine.scheduler.validate().map_err(SimError::Config)?;
    let mut sim = Simulator::new(seed, config);
    sim.run_script(trace)?;
    Ok(sim.doc().event_log().to_vec())
}

pub fn parse_trace(text: &str) -> Result<TraceScript, SimError> {
    let trace: TraceScript = serde_json::from_str(text).map_err(|e| SimError::Malformed(e.to_string()))?;
    trace.validate()?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::EventKind;

    fn dispatches_for(log: &[Event], task: TaskId) -> usize {
        log.iter().filter(|e| matches!(&e.event, EventKind::Dispatch { task_id, .. } if *task_id == task)).count()
    }

    #[test]
    fn empty_trace_dispatches_nothing() {
        let log = simulate(&TraceScript::default(), 1, SimConfig::default()).unwrap();
        assert!(log.iter().all(|e| !matches!(e.event, EventKind::Dispatch { .. })));
    }

    #[test]
    fn one_keyword_drives_brainstorm_only() {
        let trace = parse_trace(
            r#"{"actions":[{"at":0,"do":"add_node","kind":"keyword","text":"travel","x":100,"y":100}],"until":15000}"#,
        )
        .unwrap();
        let log = simulate(&trace, 3, SimConfig::default()).unwrap();
        assert!(dispatches_for(&log, TaskId(1)) >= 1);
        assert_eq!(dispatches_for(&log, TaskId(2)), 0);
        assert_eq!(log, simulate(&trace, 3, SimConfig::default()).unwrap());
    }

    #[test]
    fn out_of_order_trace_is_rejected() {
        let bad = r#"{"actions":[{"at":5,"do":"wait"},{"at":1,"do":"wait"}]}"#;
        assert!(matches!(parse_trace(bad), Err(SimError::TimeWentBack { index: 1, .. })));
        assert!(matches!(parse_trace("[1,2"), Err(SimError::Malformed(_))));
    }
}
