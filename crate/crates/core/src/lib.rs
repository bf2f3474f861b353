//! Secure aggregation and edge federated learning over a simulated network.
//!
//! The crate implements a pairwise-masked secure-aggregation protocol next to
//! three baselines (direct submission, a two-pass ring, Shamir sharing), a
//! small dense network with manual backpropagation and a base/head split, and
//! the two training phases built on them: masked-gradient training of the full
//! network among well-provisioned sites, followed by head-only masked-weight
//! averaging on edge devices over a frozen (optionally distilled) base.
//! Everything runs on a deterministic discrete-event network so message counts
//! and latencies can be checked against closed forms.

pub mod analysis;
pub mod cli;
pub mod data;
pub mod exec;
pub mod federation;
pub mod model;
pub mod numerics;
pub mod protocols;
pub mod simnet;
