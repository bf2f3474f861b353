//! Two-phase federated training over the simulated network.
//!
//! The init phase trains the full network among a few well-provisioned
//! parties by securely summing unnormalized gradients. The edge phase trains
//! only the head over a frozen base on many small parties by securely
//! averaging locally updated head weights. Both phases submit fixed-point
//! quantized vectors through any of the aggregation protocols.
//!
//! The mediator learns the party count, each party's sample count `m_j` and
//! the vector dimension in the clear. Masks for every round are derived from
//! the one-time pairwise seeds and a fresh round tag.

mod locality;
mod party;
mod personalize;
mod phases;

pub use locality::{LocalityHit, LocalityScanner};
pub use party::{synthetic_parties, Party};
pub use personalize::{personalize, rounds_to_threshold, sweep_local_updates, PersonalizeConfig, SweepRow};
pub use phases::{accuracy, base_digest, run_edge_phase, run_init_phase, Federation, PhaseOutcome, RoundRecord};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::exec::Execution;
use crate::model::{ModelError, OptimizerKind};
use crate::numerics::{DhGroup, FixedPointCodec, NumericsError};
use crate::protocols::{GraphConstruction, ProtocolConfig, ProtocolError, ProtocolKind, ShamirFinish};
use crate::simnet::SimError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FedError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid federation config: {0}")]
    InvalidConfig(String),
}

impl FedError {
    pub fn is_round_aborted(&self) -> bool {
        matches!(self, FedError::Protocol(ProtocolError::RoundAborted { .. }))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DhGroupName {
    #[default]
    Modp2048,
    Modp768,
}

impl DhGroupName {
    pub fn group(self) -> DhGroup {
        match self {
            DhGroupName::Modp2048 => DhGroup::modp2048(),
            DhGroupName::Modp768 => DhGroup::modp768(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FedConfig {
    #[serde(default = "defaults::rounds")]
    pub rounds: usize,
    /// Local optimizer steps per edge round (E).
    #[serde(default = "defaults::local_updates")]
    pub local_updates: usize,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    /// Mini-batch size; `0` trains on the full shard.
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::optimizer")]
    pub optimizer: OptimizerKind,
    #[serde(default = "defaults::protocol")]
    pub protocol: ProtocolKind,
    /// Neighbor count for masking, threshold for Shamir.
    #[serde(default = "defaults::k")]
    pub k: usize,
    /// Weight edge-phase averages by `m_j` instead of `1/n`.
    #[serde(default)]
    pub weighted_mean: bool,
    #[serde(default = "defaults::frac_bits")]
    pub frac_bits: u32,
    #[serde(default = "defaults::clamp_range")]
    pub clamp_range: f64,
    #[serde(default)]
    pub graph: GraphConstruction,
    #[serde(default)]
    pub dh_group: DhGroupName,
    #[serde(default)]
    pub shamir_finish: ShamirFinish,
    #[serde(default)]
    pub deliver_to_mediator: bool,
    /// Fresh-tag retries after an aborted aggregation round.
    #[serde(default = "defaults::retries")]
    pub retries: usize,
    #[serde(default)]
    pub execution: Execution,
    /// Keep every message of the run in the returned transcript.
    #[serde(default = "defaults::keep_transcript")]
    pub keep_transcript: bool,
}

mod defaults {
    use super::*;

    pub fn rounds() -> usize {
        50
    }
    pub fn local_updates() -> usize {
        1
    }
    pub fn alpha() -> f64 {
        1e-3
    }
    pub fn batch_size() -> usize {
        16
    }
    pub fn optimizer() -> OptimizerKind {
        OptimizerKind::Adam
    }
    pub fn protocol() -> ProtocolKind {
        ProtocolKind::Masked
    }
    pub fn k() -> usize {
        2
    }
    pub fn frac_bits() -> u32 {
        20
    }
    pub fn clamp_range() -> f64 {
        1024.0
    }
    pub fn retries() -> usize {
        1
    }
    pub fn keep_transcript() -> bool {
        true
    }
}

impl Default for FedConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl FedConfig {
    pub fn validate(&self, parties: usize) -> Result<(), FedError> {
        if self.rounds == 0 || self.local_updates == 0 {
            return Err(FedError::InvalidConfig("rounds and local_updates must be at least 1".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(FedError::InvalidConfig(format!("learning rate {} must be positive", self.alpha)));
        }
        if parties == 0 {
            return Err(FedError::InvalidConfig("no parties".into()));
        }
        self.codec()?;
        Ok(())
    }

    pub fn codec(&self) -> Result<FixedPointCodec, FedError> {
        Ok(FixedPointCodec::new(self.frac_bits, self.clamp_range)?)
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            kind: self.protocol,
            threshold: self.k,
            shamir_finish: self.shamir_finish,
            deliver_to_mediator: self.deliver_to_mediator,
        }
    }
}
