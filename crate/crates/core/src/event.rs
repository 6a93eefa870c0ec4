//! The append-only event log. Every document mutation is one event, and
//! replaying the log from an empty document rebuilds the document.

use serde::{Deserialize, Serialize};

use crate::graph::{DiagramNode, Edge, NodeKind, Section};
use crate::ids::{Anchor, EdgeId, NodeId, RequestId, SectionId, TaskId};
use crate::llm::{Dialogue, Feedback};
use crate::state::GenerationResult;
use crate::tasks::{Initiative, Scope, TaskSpec};
use crate::{Millis, Point, Size};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub timestamp_ms: Millis,
    pub event: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    NodeAdded { node: DiagramNode },
    TextConfirmed { node_id: NodeId, kind: NodeKind, text: String },
    NodeMoved { node_id: NodeId, position: Point },
    NodeResized { node_id: NodeId, size: Size },
    NodeDeleted { node_id: NodeId },
    EdgeAdded { edge: Edge },
    EdgeRemoved { edge_id: EdgeId },
    SectionAdded { section: Section },
    SectionDeleted { section_id: SectionId },
    CursorMoved { position: Point },

    TaskAdded { task: TaskSpec },
    TaskUpdated { task: TaskSpec },
    TaskDeleted { task_id: TaskId },
    PromptSelected { task_id: TaskId, index: usize },
    InitiativeSet { task_id: TaskId, scope: Scope, mode: Initiative },
    VisibilitySet { task_id: TaskId, visible: bool },

    Dispatch {
        request_id: RequestId,
        anchor: Anchor,
        task_id: TaskId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        partner: Option<NodeId>,
        dialogue: Dialogue,
        reactive: bool,
    },
    CurtainShown { anchor: Anchor, task_id: TaskId, key_point: String, result: GenerationResult, deadline: Millis },
    ResultRejected { anchor: Anchor, task_id: TaskId, request_id: RequestId, reason: String },
    UnreadMarked { anchor: Anchor, task_id: TaskId },
    Expanded { anchor: Anchor, task_id: TaskId, result: GenerationResult, nodes: Vec<DiagramNode>, edges: Vec<Edge> },
    Collapsed { anchor: Anchor, task_id: TaskId, removed: Vec<NodeId>, by_visibility: bool },
    Accepted { node_id: NodeId },
    Discarded { node_id: NodeId },
    Regenerated { node_id: NodeId, feedback: Feedback, request: String, reply: String, text: String },
    Explained { node_id: NodeId, request: String, reply: String },

    /// Diagnostic only; carries no state change.
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchor: Option<Anchor>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        task_id: Option<TaskId>,
        message: String,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::NodeAdded { .. } => "node_added",
            EventKind::TextConfirmed { .. } => "text_confirmed",
            EventKind::NodeMoved { .. } => "node_moved",
            EventKind::NodeResized { .. } => "node_resized",
            EventKind::NodeDeleted { .. } => "node_deleted",
            EventKind::EdgeAdded { .. } => "edge_added",
            EventKind::EdgeRemoved { .. } => "edge_removed",
            EventKind::SectionAdded { .. } => "section_added",
            EventKind::SectionDeleted { .. } => "section_deleted",
            EventKind::CursorMoved { .. } => "cursor_moved",
            EventKind::TaskAdded { .. } => "task_added",
            EventKind::TaskUpdated { .. } => "task_updated",
            EventKind::TaskDeleted { .. } => "task_deleted",
            EventKind::PromptSelected { .. } => "prompt_selected",
            EventKind::InitiativeSet { .. } => "initiative_set",
            EventKind::VisibilitySet { .. } => "visibility_set",
            EventKind::Dispatch { .. } => "dispatch",
            EventKind::CurtainShown { .. } => "curtain_shown",
            EventKind::ResultRejected { .. } => "result_rejected",
            EventKind::UnreadMarked { .. } => "unread_marked",
            EventKind::Expanded { .. } => "expanded",
            EventKind::Collapsed { .. } => "collapsed",
            EventKind::Accepted { .. } => "accepted",
            EventKind::Discarded { .. } => "discarded",
            EventKind::Regenerated { .. } => "regenerated",
            EventKind::Explained { .. } => "explained",
            EventKind::Error { .. } => "error",
        }
    }
}
