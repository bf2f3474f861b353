//! Dense classifier with a base/head split, trained by manual backpropagation.

mod distill;
mod net;
mod optim;
mod params;
mod spec;

pub use distill::{distill_base, distill_loss, DistillConfig, DistillOutcome};
pub use net::{base_features, forward, forward_rows, grad, grad_head, loss_mse, predict, Batch, GradScale};
pub use optim::{adam_step, adam_update, sgd_step, sgd_update, AdamParams, AdamState, Optimizer, OptimizerKind};
pub use params::{Checkpoint, ParamVector};
pub use spec::{Activation, LayerSlot, NetworkSpec};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("malformed parameter encoding: {0}")]
    Format(String),
}
