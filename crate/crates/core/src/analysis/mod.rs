//! Empirical privacy and complexity checks over simulated transcripts.
//!
//! Privacy is measured as exact-recovery capability of a colluding coalition
//! plus a chi-square uniformity test of the residual when recovery fails.

mod collusion;
mod stats;
mod table4;

pub use collusion::{
    attack_graph, collude, random_candidates, run_collusion, shamir_candidates_consistent, AttackReport,
    CollusionRun, CollusionScenario, TrialOutcome,
};
pub use stats::{chi_square_uniform_p, entropy_bits_per_word, low_byte_histogram, BUCKETS};
pub use table4::{masked_k, shamir_k, verify_table4, Table4Case, Table4Report, Table4Row};

use thiserror::Error;

use crate::numerics::NumericsError;
use crate::protocols::ProtocolError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid collusion scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
