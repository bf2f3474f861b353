use serde::{Deserialize, Serialize};

use crate::numerics::{FieldElement, RingVector};

/// Node index in the latency matrix; the mediator holds the last index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Single-shot submission to the mediator (direct and pairwise-masked).
    Submit,
    RingPass1,
    RingPass2,
    ShareDistribution,
    ShareAggregate,
    ResultDelivery,
    Broadcast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoundTag {
    pub round: u64,
    pub phase: Phase,
}

impl RoundTag {
    pub fn new(round: u64, phase: Phase) -> Self {
        Self { round, phase }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Ring(RingVector),
    Field(Vec<FieldElement>),
}

impl Payload {
    pub fn len(&self) -> usize {
        match self {
            Payload::Ring(v) => v.len(),
            Payload::Field(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Raw 64-bit words as they would appear on the wire.
    pub fn words(&self) -> Vec<u64> {
        match self {
            Payload::Ring(v) => v.as_slice().to_vec(),
            Payload::Field(v) => v.iter().map(|f| f.value()).collect(),
        }
    }

    pub fn as_ring(&self) -> Option<&RingVector> {
        match self {
            Payload::Ring(v) => Some(v),
            Payload::Field(_) => None,
        }
    }

    pub fn as_field(&self) -> Option<&[FieldElement]> {
        match self {
            Payload::Field(v) => Some(v),
            Payload::Ring(_) => None,
        }
    }
}

pub const HEADER_BYTES: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub round_tag: RoundTag,
    pub payload: Payload,
}

impl Message {
    pub fn new(sender: NodeId, receiver: NodeId, round_tag: RoundTag, payload: Payload) -> Self {
        Self {
            sender,
            receiver,
            round_tag,
            payload,
        }
    }

    pub fn byte_size(&self) -> usize {
        8 * self.payload.len() + HEADER_BYTES
    }
}
