//! Per-(element, task) lifecycle state.

use serde::{Deserialize, Serialize};

use crate::graph::NodeKind;
use crate::ids::{NodeId, RequestId};
use crate::llm::Dialogue;
use crate::tasks::Initiative;
use crate::Millis;

/// A parsed, validated model reply for one task on one element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub output: NodeKind,
    pub candidates: Vec<String>,
    pub key_point: String,
    pub summary: String,
    pub dialogue: Dialogue,
    /// Second source node for two-node inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Idle,
    InFlight {
        request_id: RequestId,
        dialogue: Dialogue,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        partner: Option<NodeId>,
        reactive: bool,
        dispatched_at: Millis,
    },
    Curtain {
        result: GenerationResult,
        deadline: Millis,
    },
    Unread {
        result: GenerationResult,
    },
    Display {
        result: GenerationResult,
        /// Pending candidate nodes still on the canvas.
        candidates: Vec<NodeId>,
    },
}

impl Phase {
    pub fn name(&self) -> PhaseName {
        match self {
            Phase::Idle => PhaseName::Idle,
            Phase::InFlight { .. } => PhaseName::InFlight,
            Phase::Curtain { .. } => PhaseName::Curtain,
            Phase::Unread { .. } => PhaseName::Unread,
            Phase::Display { .. } => PhaseName::Display,
        }
    }

    pub fn result(&self) -> Option<&GenerationResult> {
        match self {
            Phase::Curtain { result, .. } | Phase::Unread { result } | Phase::Display { result, .. } => Some(result),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseName {
    Idle,
    InFlight,
    Curtain,
    Unread,
    Display,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NodeTaskState {
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_initiative: Option<Initiative>,
    /// Unresolved candidates of a hidden result, re-shown without prompting again.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cached: Option<GenerationResult>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub hidden_by_visibility: bool,
}

impl NodeTaskState {
    pub fn is_default(&self) -> bool {
        *self == NodeTaskState::default()
    }
}

/// What a task label on a header shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeaderStatus {
    Idle,
    ReactiveIdle,
    InFlight,
    Curtain,
    Unread,
    Display,
}

impl HeaderStatus {
    pub fn of(phase: &Phase, initiative: Initiative) -> Self {
        match (phase, initiative) {
            (Phase::Idle, Initiative::Reactive) => HeaderStatus::ReactiveIdle,
            (Phase::Idle, Initiative::Proactive) => HeaderStatus::Idle,
            (Phase::InFlight { .. }, _) => HeaderStatus::InFlight,
            (Phase::Curtain { .. }, _) => HeaderStatus::Curtain,
            (Phase::Unread { .. }, _) => HeaderStatus::Unread,
            (Phase::Display { .. }, _) => HeaderStatus::Display,
        }
    }
}
