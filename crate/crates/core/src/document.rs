//! The canvas document: diagram, tasks, per-element task states, and the
//! event log that all of it is derived from.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::event::{Event, EventKind};
use crate::graph::{DiagramNode, Edge, NodeKind, Origin, Section};
use crate::ids::{Anchor, EdgeId, NodeId, SectionId, TaskId};
use crate::state::{GenerationResult, NodeTaskState, Phase};
use crate::tasks::{self, Scope, TaskSpec};
use crate::{Millis, Point};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DocumentRepr", try_from = "DocumentRepr")]
pub struct CanvasDocument {
    nodes: BTreeMap<NodeId, DiagramNode>,
    edges: BTreeMap<EdgeId, Edge>,
    sections: BTreeMap<SectionId, Section>,
    tasks: Vec<TaskSpec>,
    states: BTreeMap<(Anchor, TaskId), NodeTaskState>,
    cursor: Point,
    event_log: Vec<Event>,
    next_id: u64,
}

impl Default for CanvasDocument {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("event seq {got} does not follow {prev}")]
    NonMonotoneSeq { prev: u64, got: u64 },
}

impl CanvasDocument {
    pub fn new() -> Self {
        Self {
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            sections: BTreeMap::new(),
            tasks: Vec::new(),
            states: BTreeMap::new(),
            cursor: Point::new(0.0, 0.0),
            event_log: Vec::new(),
            next_id: 1,
        }
    }

    /// Fresh document holding the six built-in microtasks.
    pub fn with_defaults(now: Millis) -> Self {
        let mut doc = Self::new();
        for spec in tasks::defaults() {
            doc.confirm_task(now, spec).expect("built-in tasks are valid");
        }
        doc
    }

    /// Rebuilds a document from its event log alone.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<Self, ReplayError> {
        let mut doc = Self::new();
        for e in events {
            doc.push_replayed(e)?;
        }
        Ok(doc)
    }

    /// Applies one already-logged event, e.g. to mirror a live event stream.
    pub fn push_replayed(&mut self, event: &Event) -> Result<(), ReplayError> {
        let prev = self.last_seq();
        if event.seq <= prev {
            return Err(ReplayError::NonMonotoneSeq { prev, got: event.seq });
        }
        self.apply(event);
        self.event_log.push(event.clone());
        Ok(())
    }

    pub fn node(&self, id: NodeId) -> Option<&DiagramNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &DiagramNode> + '_ {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(&id)
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.values()
    }

    pub fn section(&self, id: SectionId) -> Option<&Section> {
        self.sections.get(&id)
    }

    pub fn sections(&self) -> impl Iterator<Item = &Section> + '_ {
        self.sections.values()
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn task(&self, id: TaskId) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn state(&self, anchor: Anchor, task: TaskId) -> Option<&NodeTaskState> {
        self.states.get(&(anchor, task))
    }

    /// Phase of a pair, `Idle` when no state is stored.
    pub fn phase(&self, anchor: Anchor, task: TaskId) -> &Phase {
        const IDLE: Phase = Phase::Idle;
        self.state(anchor, task).map(|s| &s.phase).unwrap_or(&IDLE)
    }

    pub fn states(&self) -> impl Iterator<Item = (Anchor, TaskId, &NodeTaskState)> + '_ {
        self.states.iter().map(|((a, t), s)| (*a, *t, s))
    }

    pub fn cursor(&self) -> Point {
        self.cursor
    }

    pub fn event_log(&self) -> &[Event] {
        &self.event_log
    }

    pub fn last_seq(&self) -> u64 {
        self.event_log.last().map_or(0, |e| e.seq)
    }

    /// The id the next created entity will receive.
    pub fn peek_id(&self) -> u64 {
        self.next_id
    }

    /// Settled node or section that can carry a task header.
    pub fn has_anchor(&self, anchor: Anchor) -> bool {
        match anchor {
            Anchor::Node(n) => self.node(n).is_some_and(DiagramNode::is_settled),
            Anchor::Section(s) => self.section(s).is_some(),
        }
    }

    pub fn anchor_kind(&self, anchor: Anchor) -> Option<NodeKind> {
        anchor.as_node().and_then(|n| self.node(n)).map(|n| n.kind)
    }

    /// Appends an event and applies it. Callers validate beforehand.
    pub(crate) fn commit(&mut self, now: Millis, kind: EventKind) -> u64 {
        let seq = self.last_seq() + 1;
        let event = Event { seq, timestamp_ms: now, event: kind };
        self.apply(&event);
        self.event_log.push(event);
        seq
    }

    /// Records a diagnostic event; never changes state.
    pub fn log_error(&mut self, now: Millis, anchor: Option<Anchor>, task_id: Option<TaskId>, message: impl Into<String>) {
        self.commit(now, EventKind::Error { anchor, task_id, message: message.into() });
    }

    fn bump(&mut self, raw: u64) {
        self.next_id = self.next_id.max(raw + 1);
    }

    fn state_mut(&mut self, anchor: Anchor, task: TaskId) -> &mut NodeTaskState {
        self.states.entry((anchor, task)).or_default()
    }

    fn normalize(&mut self, anchor: Anchor, task: TaskId) {
        if self.states.get(&(anchor, task)).is_some_and(NodeTaskState::is_default) {
            self.states.remove(&(anchor, task));
        }
    }

    /// Removes a node and everything hanging off it.
    fn remove_node(&mut self, id: NodeId) {
        let mut work = vec![id];
        while let Some(id) = work.pop() {
            if self.nodes.remove(&id).is_none() {
                continue;
            }
            self.edges.retain(|_, e| e.from != id && e.to != id);
            let anchored: Vec<_> = self.states.keys().filter(|(a, _)| *a == Anchor::Node(id)).copied().collect();
            for key in anchored {
                if let Some(NodeTaskState { phase: Phase::Display { candidates, .. }, .. }) = self.states.remove(&key) {
                    work.extend(candidates);
                }
            }
            self.forget_candidate(id);
        }
    }

    /// Drops a resolved candidate from whichever display holds it; an empty
    /// display falls back to idle.
    fn forget_candidate(&mut self, id: NodeId) {
        let mut emptied = Vec::new();
        for (key, st) in self.states.iter_mut() {
            if let Phase::Display { candidates, .. } = &mut st.phase {
                if let Some(pos) = candidates.iter().position(|c| *c == id) {
                    candidates.remove(pos);
                    if candidates.is_empty() {
                        emptied.push(*key);
                    }
                }
            }
        }
        for (a, t) in emptied {
            self.state_mut(a, t).phase = Phase::Idle;
            self.normalize(a, t);
        }
    }

    fn remove_anchor_states(&mut self, anchor: Anchor) {
        let keys: Vec<_> = self.states.keys().filter(|(a, _)| *a == anchor).copied().collect();
        for key in keys {
            if let Some(NodeTaskState { phase: Phase::Display { candidates, .. }, .. }) = self.states.remove(&key) {
                for c in candidates {
                    self.remove_node(c);
                }
            }
        }
    }

    pub(crate) fn apply(&mut self, event: &Event) {
        match &event.event {
            EventKind::NodeAdded { node } => {
                self.bump(node.id.0);
                self.nodes.insert(node.id, node.clone());
            }
            EventKind::TextConfirmed { node_id, text, .. } => {
                if let Some(n) = self.nodes.get_mut(node_id) {
                    n.text.clone_from(text);
                }
            }
            EventKind::NodeMoved { node_id, position } => {
                if let Some(n) = self.nodes.get_mut(node_id) {
                    n.position = *position;
                }
            }
            EventKind::NodeResized { node_id, size } => {
                if let Some(n) = self.nodes.get_mut(node_id) {
                    n.size = *size;
                }
            }
            EventKind::NodeDeleted { node_id } => self.remove_node(*node_id),
            EventKind::EdgeAdded { edge } => {
                self.bump(edge.id.0);
                self.edges.insert(edge.id, edge.clone());
            }
            EventKind::EdgeRemoved { edge_id } => {
                self.edges.remove(edge_id);
            }
            EventKind::SectionAdded { section } => {
                self.bump(section.id.0);
                self.sections.insert(section.id, section.clone());
            }
            EventKind::SectionDeleted { section_id } => {
                self.remove_anchor_states(Anchor::Section(*section_id));
                self.sections.remove(section_id);
            }
            EventKind::CursorMoved { position } => self.cursor = *position,
            EventKind::TaskAdded { task } => {
                self.bump(task.id.0);
                self.tasks.push(task.clone());
            }
            EventKind::TaskUpdated { task } => {
                if let Some(t) = self.tasks.iter_mut().find(|t| t.id == task.id) {
                    *t = task.clone();
                }
            }
            EventKind::TaskDeleted { task_id } => {
                self.tasks.retain(|t| t.id != *task_id);
                self.states.retain(|(_, t), _| t != task_id);
                let orphans: Vec<NodeId> = self
                    .nodes
                    .values()
                    .filter(|n| n.is_pending() && n.generated_by() == Some(*task_id))
                    .map(|n| n.id)
                    .collect();
                for n in orphans {
                    self.remove_node(n);
                }
            }
            EventKind::PromptSelected { task_id, index } => {
                if let Some(t) = self.tasks.iter_mut().find(|t| t.id == *task_id) {
                    t.active_prompt = *index;
                }
            }
            EventKind::InitiativeSet { task_id, scope, mode } => match scope {
                Scope::Global => {
                    if let Some(t) = self.tasks.iter_mut().find(|t| t.id == *task_id) {
                        t.initiative = *mode;
                    }
                }
                Scope::Local(anchor) => self.state_mut(*anchor, *task_id).local_initiative = Some(*mode),
            },
            EventKind::VisibilitySet { task_id, visible } => {
                if let Some(t) = self.tasks.iter_mut().find(|t| t.id == *task_id) {
                    t.visible = *visible;
                }
            }
            EventKind::Dispatch { request_id, anchor, task_id, partner, dialogue, reactive } => {
                self.bump(request_id.0);
                self.state_mut(*anchor, *task_id).phase = Phase::InFlight {
                    request_id: *request_id,
                    dialogue: dialogue.clone(),
                    partner: *partner,
                    reactive: *reactive,
                    dispatched_at: event.timestamp_ms,
                };
            }
            EventKind::CurtainShown { anchor, task_id, result, deadline, .. } => {
                self.state_mut(*anchor, *task_id).phase = Phase::Curtain { result: result.clone(), deadline: *deadline };
            }
            EventKind::ResultRejected { anchor, task_id, .. } => {
                self.state_mut(*anchor, *task_id).phase = Phase::Idle;
            }
            EventKind::UnreadMarked { anchor, task_id } => {
                let st = self.state_mut(*anchor, *task_id);
                if let Phase::Curtain { result, .. } = std::mem::take(&mut st.phase) {
                    st.phase = Phase::Unread { result };
                }
            }
            EventKind::Expanded { anchor, task_id, result, nodes, edges } => {
                for n in nodes {
                    self.bump(n.id.0);
                    self.nodes.insert(n.id, n.clone());
                }
                for e in edges {
                    self.bump(e.id.0);
                    self.edges.insert(e.id, e.clone());
                }
                let st = self.state_mut(*anchor, *task_id);
                st.phase = Phase::Display { result: result.clone(), candidates: nodes.iter().map(|n| n.id).collect() };
                st.cached = None;
                st.hidden_by_visibility = false;
            }
            EventKind::Collapsed { anchor, task_id, removed, by_visibility } => {
                let texts: Vec<String> =
                    removed.iter().filter_map(|n| self.nodes.get(n)).map(|n| n.text.clone()).collect();
                let st = self.state_mut(*anchor, *task_id);
                let prior = std::mem::take(&mut st.phase);
                if let Phase::Display { result, .. } = prior {
                    st.cached = (!texts.is_empty()).then_some(GenerationResult { candidates: texts, ..result });
                    st.hidden_by_visibility = *by_visibility && st.cached.is_some();
                }
                for n in removed {
                    self.nodes.remove(n);
                    self.edges.retain(|_, e| e.from != *n && e.to != *n);
                }
            }
            EventKind::Accepted { node_id } => {
                if let Some(DiagramNode { origin: Origin::Generated { accepted, .. }, .. }) = self.nodes.get_mut(node_id) {
                    *accepted = true;
                }
                self.forget_candidate(*node_id);
            }
            EventKind::Discarded { node_id } => self.remove_node(*node_id),
            EventKind::Regenerated { node_id, request, reply, text, .. } => {
                if let Some(n) = self.nodes.get_mut(node_id) {
                    if let Origin::Generated { dialogue, .. } = &mut n.origin {
                        let _ = dialogue.push_user(request.clone());
                        let _ = dialogue.push_assistant(reply.clone());
                    }
                    n.text.clone_from(text);
                }
            }
            EventKind::Explained { node_id, request, reply } => {
                if let Some(DiagramNode { origin: Origin::Generated { dialogue, .. }, .. }) = self.nodes.get_mut(node_id) {
                    let _ = dialogue.push_user(request.clone());
                    let _ = dialogue.push_assistant(reply.clone());
                }
            }
            EventKind::Error { .. } => {}
        }
        if let Some((a, t)) = event_pair(&event.event) {
            self.normalize(a, t);
        }
    }
}

fn event_pair(kind: &EventKind) -> Option<(Anchor, TaskId)> {
    match kind {
        EventKind::InitiativeSet { task_id, scope: Scope::Local(a), .. } => Some((*a, *task_id)),
        EventKind::ResultRejected { anchor, task_id, .. } | EventKind::Collapsed { anchor, task_id, .. } => {
            Some((*anchor, *task_id))
        }
        _ => None,
    }
}

/// On-disk shape: plain lists keyed by string ids.
#[derive(Serialize, Deserialize)]
struct DocumentRepr {
    schema_version: u32,
    next_id: u64,
    cursor: Point,
    nodes: Vec<DiagramNode>,
    edges: Vec<Edge>,
    sections: Vec<Section>,
    tasks: Vec<TaskSpec>,
    states: Vec<StateEntry>,
    event_log: Vec<Event>,
}

#[derive(Serialize, Deserialize)]
struct StateEntry {
    anchor: Anchor,
    task_id: TaskId,
    #[serde(flatten)]
    state: NodeTaskState,
}

impl From<CanvasDocument> for DocumentRepr {
    fn from(d: CanvasDocument) -> Self {
        DocumentRepr {
            schema_version: SCHEMA_VERSION,
            next_id: d.next_id,
            cursor: d.cursor,
            nodes: d.nodes.into_values().collect(),
            edges: d.edges.into_values().collect(),
            sections: d.sections.into_values().collect(),
            tasks: d.tasks,
            states: d
                .states
                .into_iter()
                .map(|((anchor, task_id), state)| StateEntry { anchor, task_id, state })
                .collect(),
            event_log: d.event_log,
        }
    }
}

impl TryFrom<DocumentRepr> for CanvasDocument {
    type Error = String;

    fn try_from(r: DocumentRepr) -> Result<Self, Self::Error> {
        if r.schema_version != SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {}", r.schema_version));
        }
        Ok(CanvasDocument {
            nodes: r.nodes.into_iter().map(|n| (n.id, n)).collect(),
            edges: r.edges.into_iter().map(|e| (e.id, e)).collect(),
            sections: r.sections.into_iter().map(|s| (s.id, s)).collect(),
            tasks: r.tasks,
            states: r.states.into_iter().map(|e| ((e.anchor, e.task_id), e.state)).collect(),
            cursor: r.cursor,
            event_log: r.event_log,
            next_id: r.next_id,
        })
    }
}
