//! Deterministic discrete-event network simulation with per-link latencies.

mod latency;
mod message;
mod report;
mod scheduler;

pub use latency::LatencyMatrix;
pub use message::{Message, NodeId, Payload, Phase, RoundTag, HEADER_BYTES};
pub use report::{latency_report, LatencyModel, LatencyReport, DIVERGENCE_TOLERANCE_MS};
pub use scheduler::{Handler, MessageRecord, NodeCounters, Outbox, SimNet, Transcript};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("no route to node {0:?}")]
    Routing(NodeId),
    #[error("invalid latency matrix: {0}")]
    BadLatency(String),
    #[error("unknown latency preset {0:?}")]
    UnknownPreset(String),
}
