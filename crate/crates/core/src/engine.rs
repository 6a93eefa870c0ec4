//! The scheduler and per-(element, task) state machine.
//!
//! ```text
//! Idle --dispatch--> InFlight --result--> Curtain --timeout--> Unread
//!                       |  \--reactive result--> Display        |
//!                       \--error--> Idle      Curtain/Unread --expand--> Display
//! Display --all candidates resolved / collapse--> Idle
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{self, SamplerConfig};
use crate::document::CanvasDocument;
use crate::event::EventKind;
use crate::graph::{DiagramNode, Edge, GraphError, NodeKind, Origin};
use crate::ids::{Anchor, EdgeId, NodeId, RequestId, TaskId};
use crate::llm::{
    self, explain_request, feedback_request, parse_single, CompletionParams, Dialogue, Feedback, LlmError, Provider,
    KEY_POINT_MAX_WORDS, SUMMARY_MAX_WORDS,
};
use crate::state::{GenerationResult, HeaderStatus, Phase, PhaseName};
use crate::tasks::{render_prompt, word_count, GenerationConstraints, Initiative, InputType, RenderError, TaskError, TaskSpec};
use crate::{Millis, Rect, Size};

/// Horizontal gap between a source and its candidates, and between candidates.
pub const FAN_SPACING: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub tick_seconds: f64,
    pub curtain_timeout_seconds: f64,
    pub max_inflight_per_task: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self { tick_seconds: 5.0, curtain_timeout_seconds: 6.0, max_inflight_per_task: 4 }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.tick_seconds) {
            return Err(format!("tick_seconds must be positive, got {}", self.tick_seconds));
        }
        if !pos(self.curtain_timeout_seconds) {
            return Err(format!("curtain_timeout_seconds must be positive, got {}", self.curtain_timeout_seconds));
        }
        if self.max_inflight_per_task == 0 {
            return Err("max_inflight_per_task must be positive".into());
        }
        Ok(())
    }

    pub fn tick_ms(&self) -> Millis {
        (self.tick_seconds * 1000.0).round() as Millis
    }

    pub fn curtain_ms(&self) -> Millis {
        (self.curtain_timeout_seconds * 1000.0).round() as Millis
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig { tick_seconds: self.tick_seconds, ..SamplerConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EngineConfig {
    pub scheduler: SchedulerConfig,
    pub completion: CompletionParams,
}

/// A request the engine has committed to; the caller runs it against a
/// provider and reports back through [`Engine::on_result`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub request_id: RequestId,
    pub anchor: Anchor,
    pub task_id: TaskId,
    pub partner: Option<NodeId>,
    pub dialogue: Dialogue,
    pub output: NodeKind,
    pub reactive: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("unknown element {0}")]
    UnknownAnchor(Anchor),
    #[error("task {task} cannot take {anchor} as input")]
    InputMismatch { anchor: Anchor, task: TaskId },
    #[error("cannot {action} task {task} on {anchor} while {phase:?}")]
    WrongState { anchor: Anchor, task: TaskId, phase: PhaseName, action: &'static str },
    #[error("task {task} is not reactive on {anchor}")]
    NotReactive { anchor: Anchor, task: TaskId },
    #[error("nothing to show for task {task} on {anchor}")]
    NothingToShow { anchor: Anchor, task: TaskId },
    #[error("no nearby node to pair with {0}")]
    NoPartner(Anchor),
    #[error("input text is empty")]
    EmptyInput,
    #[error("{0} is not a pending candidate")]
    NotPendingCandidate(NodeId),
    #[error("{0} was not generated by a task")]
    NotGenerated(NodeId),
    #[error("no request {0} is in flight")]
    UnknownRequest(RequestId),
    #[error("language model failed: {0}")]
    Llm(String),
}

/// What `on_result` did with a reply.
#[derive(Debug, Clone, PartialEq)]
pub enum ResultOutcome {
    Curtain,
    Displayed(Vec<NodeId>),
    Rejected(String),
}

/// What a click on a header label did.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", content = "detail", rename_all = "snake_case")]
pub enum LabelOutcome {
    Shown(Vec<NodeId>),
    Hidden,
    Requested(Dispatch),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewEntry {
    pub task_id: TaskId,
    pub name: String,
    pub color: String,
    pub key_point: String,
    pub summary: String,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Owns a document and drives its microtasks. Randomness is derived from the
/// seed and the log position, so a reloaded document continues identically.
#[derive(Debug, Clone)]
pub struct Engine {
    doc: CanvasDocument,
    config: EngineConfig,
    seed: u64,
}

impl Engine {
    pub fn new(doc: CanvasDocument, config: EngineConfig, seed: u64) -> Self {
        Self { doc, config, seed }
    }

    pub fn doc(&self) -> &CanvasDocument {
        &self.doc
    }

    /// Direct document access for diagram edits that need no scheduling.
    pub fn doc_mut(&mut self) -> &mut CanvasDocument {
        &mut self.doc
    }

    pub fn into_doc(self) -> CanvasDocument {
        self.doc
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn rng(&self, now: Millis, salt: u64) -> ChaCha8Rng {
        let mixed = splitmix(splitmix(self.seed ^ splitmix(self.doc.last_seq())) ^ now) ^ salt.rotate_left(32);
        ChaCha8Rng::seed_from_u64(splitmix(mixed))
    }

    fn task(&self, id: TaskId) -> Result<&TaskSpec, EngineError> {
        self.doc.task(id).ok_or(EngineError::UnknownTask(id))
    }

    fn require_anchor(&self, anchor: Anchor) -> Result<(), EngineError> {
        if self.doc.has_anchor(anchor) {
            Ok(())
        } else {
            Err(EngineError::UnknownAnchor(anchor))
        }
    }

    fn wrong_state(&self, anchor: Anchor, task: TaskId, action: &'static str) -> EngineError {
        EngineError::WrongState { anchor, task, phase: self.doc.phase(anchor, task).name(), action }
    }

    pub fn inflight_count(&self, task: TaskId) -> usize {
        self.doc.states().filter(|(_, t, s)| *t == task && matches!(s.phase, Phase::InFlight { .. })).count()
    }

    /// Proactive dispatch gate: effective initiative is proactive, the pair is
    /// idle (no pending notification or display), the task is under its
    /// concurrency cap, and the element fits the task's input type.
    pub fn eligible(&self, anchor: Anchor, task_id: TaskId) -> bool {
        let Some(task) = self.doc.task(task_id) else { return false };
        self.doc.has_anchor(anchor)
            && task.input_type.accepts(anchor, self.doc.anchor_kind(anchor))
            && self.doc.effective_initiative(anchor, task_id) == Some(Initiative::Proactive)
            && matches!(self.doc.phase(anchor, task_id), Phase::Idle)
            && self.inflight_count(task_id) < self.config.scheduler.max_inflight_per_task
    }

    pub fn header_status(&self, anchor: Anchor, task: TaskId) -> Option<HeaderStatus> {
        let mode = self.doc.effective_initiative(anchor, task)?;
        Some(HeaderStatus::of(self.doc.phase(anchor, task), mode))
    }

    /// One scheduler tick: per input type, sample an element near the cursor
    /// and dispatch every eligible proactive task of that type on it.
    pub fn tick(&mut self, now: Millis) -> Vec<Dispatch> {
        let mut rng = self.rng(now, 0);
        let mut out = Vec::new();
        for input in InputType::ALL {
            out.extend(self.dispatch_input(now, input, &mut rng));
        }
        out
    }

    /// Immediate resampling of one input type, e.g. after a text edit.
    pub fn resample(&mut self, now: Millis, input: InputType) -> Vec<Dispatch> {
        let mut rng = self.rng(now, 1 + input as u64);
        self.dispatch_input(now, input, &mut rng)
    }

    fn dispatch_input(&mut self, now: Millis, input: InputType, rng: &mut ChaCha8Rng) -> Vec<Dispatch> {
        let tasks: Vec<TaskId> = self.doc.tasks().iter().filter(|t| t.input_type == input).map(|t| t.id).collect();
        if tasks.is_empty() {
            return Vec::new();
        }
        let Some(anchor) = attention::sample(&self.doc, input, rng) else { return Vec::new() };
        let mut partner: Option<Option<NodeId>> = None;
        let mut out = Vec::new();
        for task in tasks {
            if !self.eligible(anchor, task) {
                continue;
            }
            let pair = if input == InputType::Nodes {
                let p = *partner.get_or_insert_with(|| {
                    anchor.as_node().and_then(|n| self.doc.nearby_node(n, rng).ok().flatten())
                });
                match p {
                    Some(p) => Some(p),
                    None => continue,
                }
            } else {
                None
            };
            if let Ok(d) = self.commit_dispatch(now, anchor, task, pair, false) {
                out.push(d);
            }
        }
        out
    }

    fn input_texts(&self, anchor: Anchor, partner: Option<NodeId>) -> Result<Vec<String>, EngineError> {
        let mut texts = match anchor {
            Anchor::Section(s) => vec![self.doc.section_outline(s)?],
            Anchor::Node(n) => vec![self.doc.node(n).ok_or(GraphError::UnknownNode(n))?.text.clone()],
        };
        if let Some(p) = partner {
            texts.push(self.doc.node(p).ok_or(GraphError::UnknownNode(p))?.text.clone());
        }
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(EngineError::EmptyInput);
        }
        Ok(texts)
    }

    fn commit_dispatch(
        &mut self,
        now: Millis,
        anchor: Anchor,
        task_id: TaskId,
        partner: Option<NodeId>,
        reactive: bool,
    ) -> Result<Dispatch, EngineError> {
        let texts = self.input_texts(anchor, partner)?;
        let task = self.task(task_id)?;
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let dialogue = Dialogue::with_user(render_prompt(task, &refs)?);
        let output = task.output_type;
        let request_id = RequestId(self.doc.peek_id());
        self.doc.commit(
            now,
            EventKind::Dispatch { request_id, anchor, task_id, partner, dialogue: dialogue.clone(), reactive },
        );
        Ok(Dispatch { request_id, anchor, task_id, partner, dialogue, output, reactive })
    }

    /// Dispatches a reactive task on explicit user request, bypassing sampling.
    pub fn request_reactive(&mut self, now: Millis, anchor: Anchor, task_id: TaskId) -> Result<Dispatch, EngineError> {
        let task = self.task(task_id)?;
        let input = task.input_type;
        self.require_anchor(anchor)?;
        if !input.accepts(anchor, self.doc.anchor_kind(anchor)) {
            return Err(EngineError::InputMismatch { anchor, task: task_id });
        }
        if self.doc.effective_initiative(anchor, task_id) != Some(Initiative::Reactive) {
            return Err(EngineError::NotReactive { anchor, task: task_id });
        }
        if !matches!(self.doc.phase(anchor, task_id), Phase::Idle) {
            return Err(self.wrong_state(anchor, task_id, "request"));
        }
        let partner = if input == InputType::Nodes {
            let mut rng = self.rng(now, 0x5eed);
            let node = anchor.as_node().ok_or(EngineError::UnknownAnchor(anchor))?;
            Some(self.doc.nearby_node(node, &mut rng)?.ok_or(EngineError::NoPartner(anchor))?)
        } else {
            None
        };
        self.commit_dispatch(now, anchor, task_id, partner, true)
    }

    fn find_request(&self, request_id: RequestId) -> Option<(Anchor, TaskId, bool)> {
        self.doc.states().find_map(|(a, t, s)| match &s.phase {
            Phase::InFlight { request_id: r, reactive, .. } if *r == request_id => Some((a, t, *reactive)),
            _ => None,
        })
    }

    fn check_result(&self, task: &TaskSpec, result: &GenerationResult) -> Result<(), String> {
        let c = GenerationConstraints::for_output(task.output_type);
        if result.output != task.output_type {
            return Err(format!("result is {:?}, task outputs {:?}", result.output, task.output_type));
        }
        if !c.admits(&result.candidates) {
            return Err(format!(
                "expected {} results of at most {} words, got {:?}",
                c.count, c.max_words, result.candidates
            ));
        }
        let fits = |s: &str, max| !s.trim().is_empty() && word_count(s) <= max;
        if !fits(&result.key_point, KEY_POINT_MAX_WORDS) || !fits(&result.summary, SUMMARY_MAX_WORDS) {
            return Err("key point or summary out of bounds".into());
        }
        if result.dialogue.is_empty() {
            return Err("result carries no dialogue".into());
        }
        Ok(())
    }

    /// Delivers the outcome of a dispatched request. Malformed results are
    /// never shown: the pair drops back to idle with a rejection event.
    pub fn on_result(
        &mut self,
        now: Millis,
        request_id: RequestId,
        outcome: Result<GenerationResult, String>,
    ) -> Result<ResultOutcome, EngineError> {
        let Some((anchor, task_id, reactive)) = self.find_request(request_id) else {
            self.doc.log_error(now, None, None, format!("dropped stale result for {request_id}"));
            return Err(EngineError::UnknownRequest(request_id));
        };
        let task = self.task(task_id)?;
        let result = match outcome.and_then(|r| self.check_result(task, &r).map(|_| r)) {
            Ok(r) => r,
            Err(reason) => {
                self.doc.commit(now, EventKind::ResultRejected { anchor, task_id, request_id, reason: reason.clone() });
                return Ok(ResultOutcome::Rejected(reason));
            }
        };
        if reactive {
            return Ok(ResultOutcome::Displayed(self.commit_expand(now, anchor, task_id, result)));
        }
        let deadline = now + self.config.scheduler.curtain_ms();
        let key_point = result.key_point.clone();
        self.doc.commit(now, EventKind::CurtainShown { anchor, task_id, key_point, result, deadline });
        Ok(ResultOutcome::Curtain)
    }

    /// Collapses every curtain whose deadline has passed into an unread marker.
    pub fn advance_timers(&mut self, now: Millis) -> Vec<(Anchor, TaskId)> {
        let due: Vec<(Anchor, TaskId)> = self
            .doc
            .states()
            .filter(|(_, _, s)| matches!(s.phase, Phase::Curtain { deadline, .. } if deadline <= now))
            .map(|(a, t, _)| (a, t))
            .collect();
        for &(anchor, task_id) in &due {
            self.doc.commit(now, EventKind::UnreadMarked { anchor, task_id });
        }
        due
    }

    pub fn next_curtain_deadline(&self) -> Option<Millis> {
        self.doc
            .states()
            .filter_map(|(_, _, s)| match s.phase {
                Phase::Curtain { deadline, .. } => Some(deadline),
                _ => None,
            })
            .min()
    }

    fn source_rect(&self, anchor: Anchor) -> Option<Rect> {
        match anchor {
            Anchor::Node(n) => self.doc.node(n).map(DiagramNode::rect),
            Anchor::Section(s) => self.doc.section(s).map(|s| s.rect),
        }
    }

    /// Lays candidates out in a column to the right of the source and links
    /// each one to the source node(s) with an undirected edge.
    fn materialize(&self, anchor: Anchor, task_id: TaskId, result: &GenerationResult) -> (Vec<DiagramNode>, Vec<Edge>) {
        let src = self.source_rect(anchor).unwrap_or_default();
        let size: Size = result.output.default_size();
        let n = result.candidates.len() as f64;
        let column = n * size.height + (n - 1.0).max(0.0) * FAN_SPACING;
        let x = src.right() + FAN_SPACING;
        let y0 = src.center().y - column / 2.0;
        let mut next = self.doc.peek_id();
        let mut nodes = Vec::with_capacity(result.candidates.len());
        for (i, text) in result.candidates.iter().enumerate() {
            nodes.push(DiagramNode {
                id: NodeId(next),
                kind: result.output,
                text: text.clone(),
                position: crate::Point::new(x, y0 + i as f64 * (size.height + FAN_SPACING)),
                size,
                origin: Origin::Generated {
                    task_id,
                    source: anchor,
                    accepted: false,
                    dialogue: result.dialogue.clone(),
                },
            });
            next += 1;
        }
        let sources: Vec<NodeId> = anchor
            .as_node()
            .into_iter()
            .chain(result.partner)
            .filter(|s| self.doc.node(*s).is_some())
            .collect();
        let mut edges = Vec::new();
        for node in &nodes {
            for &s in &sources {
                edges.push(Edge { id: EdgeId(next), from: s, to: node.id, directed: false });
                next += 1;
            }
        }
        (nodes, edges)
    }

    fn commit_expand(&mut self, now: Millis, anchor: Anchor, task_id: TaskId, result: GenerationResult) -> Vec<NodeId> {
        let (nodes, edges) = self.materialize(anchor, task_id, &result);
        let ids = nodes.iter().map(|n| n.id).collect();
        self.doc.commit(now, EventKind::Expanded { anchor, task_id, result, nodes, edges });
        ids
    }

    /// Shows a notified result (curtain or unread) on the canvas.
    pub fn expand(&mut self, now: Millis, anchor: Anchor, task_id: TaskId) -> Result<Vec<NodeId>, EngineError> {
        self.task(task_id)?;
        let result = match self.doc.phase(anchor, task_id) {
            Phase::Curtain { result, .. } | Phase::Unread { result } => result.clone(),
            _ => return Err(self.wrong_state(anchor, task_id, "expand")),
        };
        Ok(self.commit_expand(now, anchor, task_id, result))
    }

    /// Hides a displayed result: pending candidates leave the canvas and the
    /// result is cached so showing it again costs no request.
    pub fn collapse(&mut self, now: Millis, anchor: Anchor, task_id: TaskId) -> Result<(), EngineError> {
        self.collapse_with(now, anchor, task_id, false)
    }

    fn collapse_with(&mut self, now: Millis, anchor: Anchor, task_id: TaskId, by_visibility: bool) -> Result<(), EngineError> {
        let removed = match self.doc.phase(anchor, task_id) {
            Phase::Display { candidates, .. } => candidates.clone(),
            _ => return Err(self.wrong_state(anchor, task_id, "collapse")),
        };
        self.doc.commit(now, EventKind::Collapsed { anchor, task_id, removed, by_visibility });
        Ok(())
    }

    /// Label click on a task header: hide, show, or fire a reactive request.
    pub fn click_label(&mut self, now: Millis, anchor: Anchor, task_id: TaskId) -> Result<LabelOutcome, EngineError> {
        self.task(task_id)?;
        self.require_anchor(anchor)?;
        match self.doc.phase(anchor, task_id) {
            Phase::Display { .. } => self.collapse(now, anchor, task_id).map(|_| LabelOutcome::Hidden),
            Phase::Curtain { .. } | Phase::Unread { .. } => self.expand(now, anchor, task_id).map(LabelOutcome::Shown),
            Phase::InFlight { .. } => Err(self.wrong_state(anchor, task_id, "click")),
            Phase::Idle => {
                if let Some(cached) = self.doc.state(anchor, task_id).and_then(|s| s.cached.clone()) {
                    return Ok(LabelOutcome::Shown(self.commit_expand(now, anchor, task_id, cached)));
                }
                match self.doc.effective_initiative(anchor, task_id) {
                    Some(Initiative::Reactive) => self.request_reactive(now, anchor, task_id).map(LabelOutcome::Requested),
                    _ => Err(EngineError::NothingToShow { anchor, task: task_id }),
                }
            }
        }
    }

    /// Expands every notified result on one header.
    pub fn expand_all(&mut self, now: Millis, anchor: Anchor) -> Result<Vec<NodeId>, EngineError> {
        self.require_anchor(anchor)?;
        let due: Vec<TaskId> = self
            .doc
            .states()
            .filter(|(a, _, s)| *a == anchor && matches!(s.phase, Phase::Curtain { .. } | Phase::Unread { .. }))
            .map(|(_, t, _)| t)
            .collect();
        let mut out = Vec::new();
        for t in due {
            out.extend(self.expand(now, anchor, t)?);
        }
        Ok(out)
    }

    /// Hides every displayed result on one header.
    pub fn close_all(&mut self, now: Millis, anchor: Anchor) -> Result<usize, EngineError> {
        self.require_anchor(anchor)?;
        let shown: Vec<TaskId> = self
            .doc
            .states()
            .filter(|(a, _, s)| *a == anchor && matches!(s.phase, Phase::Display { .. }))
            .map(|(_, t, _)| t)
            .collect();
        for &t in &shown {
            self.collapse(now, anchor, t)?;
        }
        Ok(shown.len())
    }

    fn pending(&self, node: NodeId) -> Result<&DiagramNode, EngineError> {
        let n = self.doc.node(node).ok_or(GraphError::UnknownNode(node))?;
        if n.is_pending() {
            Ok(n)
        } else {
            Err(EngineError::NotPendingCandidate(node))
        }
    }

    pub fn accept(&mut self, now: Millis, node: NodeId) -> Result<(), EngineError> {
        self.pending(node)?;
        self.doc.commit(now, EventKind::Accepted { node_id: node });
        Ok(())
    }

    pub fn discard(&mut self, now: Millis, node: NodeId) -> Result<(), EngineError> {
        self.pending(node)?;
        self.doc.commit(now, EventKind::Discarded { node_id: node });
        Ok(())
    }

    /// The candidate's preserved dialogue extended with a feedback turn.
    pub fn regenerate_request(&self, node: NodeId, feedback: Feedback) -> Result<Dialogue, EngineError> {
        let n = self.pending(node)?;
        let mut d = n.dialogue().cloned().unwrap_or_default();
        d.push_user(feedback_request(&n.text, feedback)).map_err(|e| EngineError::Llm(e.to_string()))?;
        Ok(d)
    }

    /// Applies a regeneration reply. On failure the candidate stays as it was
    /// and an error event is logged.
    pub fn finish_regenerate(
        &mut self,
        now: Millis,
        node: NodeId,
        feedback: Feedback,
        request: &Dialogue,
        reply: Result<String, LlmError>,
    ) -> Result<String, EngineError> {
        let kind = self.pending(node)?.kind;
        let outcome = reply
            .map_err(|e| e.to_string())
            .and_then(|r| parse_single(&r, kind).map(|t| (r, t)).map_err(|e| e.to_string()));
        match outcome {
            Ok((reply, text)) => {
                let request = request.last_user().unwrap_or_default().to_string();
                self.doc.commit(now, EventKind::Regenerated { node_id: node, feedback, request, reply, text: text.clone() });
                Ok(text)
            }
            Err(msg) => {
                self.doc.log_error(now, None, self.doc.node(node).and_then(DiagramNode::generated_by), format!("regenerate {node}: {msg}"));
                Err(EngineError::Llm(msg))
            }
        }
    }

    pub fn regenerate(&mut self, now: Millis, node: NodeId, feedback: Feedback, provider: &dyn Provider) -> Result<String, EngineError> {
        let request = self.regenerate_request(node, feedback)?;
        let reply = llm::complete(provider, &request, &self.config.completion);
        self.finish_regenerate(now, node, feedback, &request, reply)
    }

    /// The generated node's dialogue extended with an explanation request.
    pub fn explain_request(&self, node: NodeId) -> Result<Dialogue, EngineError> {
        let n = self.doc.node(node).ok_or(GraphError::UnknownNode(node))?;
        let mut d = n.dialogue().cloned().ok_or(EngineError::NotGenerated(node))?;
        d.push_user(explain_request(&n.text)).map_err(|e| EngineError::Llm(e.to_string()))?;
        Ok(d)
    }

    pub fn finish_explain(
        &mut self,
        now: Millis,
        node: NodeId,
        request: &Dialogue,
        reply: Result<String, LlmError>,
    ) -> Result<String, EngineError> {
        let n = self.doc.node(node).ok_or(GraphError::UnknownNode(node))?;
        let task = n.generated_by().ok_or(EngineError::NotGenerated(node))?;
        match reply.map(|r| r.trim().to_string()) {
            Ok(text) if !text.is_empty() => {
                let request = request.last_user().unwrap_or_default().to_string();
                self.doc.commit(now, EventKind::Explained { node_id: node, request, reply: text.clone() });
                Ok(text)
            }
            other => {
                let msg = other.err().map_or("empty explanation".to_string(), |e| e.to_string());
                self.doc.log_error(now, None, Some(task), format!("explain {node}: {msg}"));
                Err(EngineError::Llm(msg))
            }
        }
    }

    pub fn explain(&mut self, now: Millis, node: NodeId, provider: &dyn Provider) -> Result<String, EngineError> {
        let request = self.explain_request(node)?;
        let reply = llm::complete(provider, &request, &self.config.completion);
        self.finish_explain(now, node, &request, reply)
    }

    /// Confirms a text edit and immediately resamples that node's input type.
    pub fn update_text(&mut self, now: Millis, node: NodeId, text: impl Into<String>) -> Result<Vec<Dispatch>, EngineError> {
        let kind = self.doc.update_text(now, node, text)?;
        Ok(self.resample(now, InputType::of_kind(kind)))
    }

    /// Hides or re-shows all of a task's results on the canvas.
    pub fn set_visibility(&mut self, now: Millis, task_id: TaskId, visible: bool) -> Result<(), EngineError> {
        self.task(task_id)?;
        let pairs: Vec<(Anchor, bool, bool)> = self
            .doc
            .states()
            .filter(|(_, t, _)| *t == task_id)
            .map(|(a, _, s)| (a, matches!(s.phase, Phase::Display { .. }), s.hidden_by_visibility && s.cached.is_some()))
            .collect();
        for (anchor, displayed, hidden) in pairs {
            if !visible && displayed {
                self.collapse_with(now, anchor, task_id, true)?;
            } else if visible && hidden && matches!(self.doc.phase(anchor, task_id), Phase::Idle) {
                let cached = self.doc.state(anchor, task_id).and_then(|s| s.cached.clone()).expect("cached result");
                self.commit_expand(now, anchor, task_id, cached);
            }
        }
        self.doc.commit(now, EventKind::VisibilitySet { task_id, visible });
        Ok(())
    }

    /// Key points of every unread result on one header.
    pub fn preview(&self, anchor: Anchor) -> Vec<PreviewEntry> {
        self.doc
            .states()
            .filter(|(a, _, _)| *a == anchor)
            .filter_map(|(_, t, s)| match &s.phase {
                Phase::Unread { result } => {
                    let task = self.doc.task(t)?;
                    Some(PreviewEntry {
                        task_id: t,
                        name: task.name.clone(),
                        color: task.color.to_string(),
                        key_point: result.key_point.clone(),
                        summary: result.summary.clone(),
                    })
                }
                _ => None,
            })
            .collect()
    }
}
