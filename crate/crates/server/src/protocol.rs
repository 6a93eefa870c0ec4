//! Wire format. Clients send `{"cmd", "args", "client_seq"}`; the server
//! sends a snapshot on connect, then events and command replies.

use prewrite_core::llm::Feedback;
use prewrite_core::tasks::{Initiative, Scope, TaskSpec};
use prewrite_core::{Anchor, EdgeId, Event, NodeId, NodeKind, Point, Rect, SectionId, Size, TaskId};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", content = "args", rename_all = "snake_case")]
pub enum Command {
    Snapshot,
    AddNode {
        kind: NodeKind,
        text: String,
        position: Point,
        #[serde(default)]
        size: Option<Size>,
    },
    UpdateText { node_id: NodeId, text: String },
    MoveNode { node_id: NodeId, position: Point },
    ResizeNode { node_id: NodeId, size: Size },
    DeleteNode { node_id: NodeId },
    Connect {
        from: NodeId,
        to: NodeId,
        #[serde(default)]
        directed: bool,
    },
    Disconnect { edge_id: EdgeId },
    AddSection { title: String, rect: Rect },
    DeleteSection { section_id: SectionId },
    MoveCursor { position: Point },
    Outline { section_id: SectionId },
    DelegateTask {
        #[serde(default)]
        name_hint: Option<String>,
    },
    ConfirmTask { task: TaskSpec },
    UpdateTask { task: TaskSpec },
    SelectPrompt { task_id: TaskId, index: usize },
    DeleteTask { task_id: TaskId },
    SetInitiative { task_id: TaskId, mode: Initiative, scope: Scope },
    SetVisibility { task_id: TaskId, visible: bool },
    Expand { anchor: Anchor, task_id: TaskId },
    Collapse { anchor: Anchor, task_id: TaskId },
    ClickLabel { anchor: Anchor, task_id: TaskId },
    ExpandAll { anchor: Anchor },
    CloseAll { anchor: Anchor },
    Preview { anchor: Anchor },
    Header { anchor: Anchor },
    Accept { node_id: NodeId },
    Discard { node_id: NodeId },
    Regenerate { node_id: NodeId, feedback: Feedback },
    Explain { node_id: NodeId },
    RequestReactive { anchor: Anchor, task_id: TaskId },
    Save,
}

impl Command {
    pub const NAMES: &'static [&'static str] = &[
        "snapshot", "add_node", "update_text", "move_node", "resize_node", "delete_node", "connect", "disconnect",
        "add_section", "delete_section", "move_cursor", "outline", "delegate_task", "confirm_task", "update_task",
        "select_prompt", "delete_task", "set_initiative", "set_visibility", "expand", "collapse", "click_label",
        "expand_all", "close_all", "preview", "header", "accept", "discard", "regenerate", "explain",
        "request_reactive", "save",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(flatten)]
    pub command: Command,
    #[serde(default)]
    pub client_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot { seq: u64, document: Value, config: Value },
    Event { event: Event },
    Reply {
        client_seq: Option<u64>,
        ok: bool,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        result: Option<Value>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        error: Option<String>,
    },
}

impl ServerMessage {
    pub fn reply(client_seq: Option<u64>, outcome: Result<Value, String>) -> Self {
        match outcome {
            Ok(v) => ServerMessage::Reply { client_seq, ok: true, result: Some(v), error: None },
            Err(e) => ServerMessage::Reply { client_seq, ok: false, result: None, error: Some(e) },
        }
    }

    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("messages serialize");
        v.to_string()
    }
}
