//! Network service around the prewriting engine: a single-writer actor, an
//! HTTP and WebSocket front end, and the HTTP transport for remote models.

pub mod actor;
pub mod protocol;
pub mod service;
pub mod transport;

pub use actor::{ActorConfig, Handle, Reply, Subscription};
pub use protocol::{Command, Envelope, ServerMessage};
pub use service::{remote_provider, start, Running, ServiceError};
pub use transport::UreqTransport;
