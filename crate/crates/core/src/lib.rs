//! Event-sourced model and orchestration engine for an LLM-assisted
//! prewriting canvas: a diagram of keywords, concepts and sticky notes,
//! user-defined microtasks, an attention-weighted sampler and the per-task
//! notification lifecycle.
//!
//! Geometry and attention math are generic over [`Scalar`]; the document
//! itself is stored in `f64` through the aliases below.

pub mod attention;
pub mod document;
pub mod engine;
pub mod event;
pub mod geometry;
pub mod graph;
pub mod ids;
pub mod llm;
pub mod persist;
pub mod scalar;
pub mod sim;
pub mod state;
pub mod tasks;

pub use document::{CanvasDocument, ReplayError, SCHEMA_VERSION};
pub use engine::{Dispatch, Engine, EngineConfig, EngineError, LabelOutcome, ResultOutcome, SchedulerConfig};
pub use event::{Event, EventKind};
pub use geometry::{Point2, Rect2, Size2};
pub use graph::{DiagramNode, Edge, GraphError, NodeKind, Origin, Section};
pub use ids::{Anchor, EdgeId, NodeId, RequestId, SectionId, TaskId};
pub use scalar::Scalar;
pub use state::{GenerationResult, HeaderStatus, NodeTaskState, Phase, PhaseName};
pub use tasks::{InputType, Initiative, OutputType, Scope, TaskSpec};

/// Wall-clock or simulated time in milliseconds.
pub type Millis = u64;
pub type Point = Point2<f64>;
pub type Size = Size2<f64>;
pub type Rect = Rect2<f64>;
