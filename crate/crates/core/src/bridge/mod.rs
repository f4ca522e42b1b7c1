//! Topic bus and WebSocket bridge.
//!
//! Producers publish JSON payloads on named topics; every connected session
//! receives the latest frame on subscribe and each later publish that passes
//! its throttle gate.

pub mod bus;
pub mod protocol;
pub mod schema;
pub mod server;
pub mod table;

use thiserror::Error;

pub use bus::Bus;
pub use protocol::{decode_frame, encode_frame, DecodeError, Level, Op, WireMessage};
pub use schema::Mode;
pub use server::{loopback, serve, ServerHandle, BRIDGE_PATH};
pub use table::{Delivery, FrameMeta, Outbox, Outcome, SessionId, TopicTable, OUTBOX_DEPTH};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BridgeError {
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
    #[error("schema mismatch on {topic:?}: expected {expected:?}, got {found:?}")]
    SchemaMismatch { topic: String, expected: String, found: String },
    #[error("topic {0:?} is not client-writable")]
    ReadOnlyTopic(String),
    #[error("publishing is disabled during replay")]
    ReplayMode,
    #[error("payload does not match the schema of {0:?}")]
    BadPayload(String),
    #[error("unknown session {0}")]
    UnknownSession(u64),
}
