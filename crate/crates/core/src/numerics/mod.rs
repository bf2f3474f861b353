//! Number domains used by the aggregation protocols.
//!
//! Real-valued model quantities are mapped into the `Z/2^64` ring by a
//! [`FixedPointCodec`] so that additive masks cancel bit-exactly. Pairwise
//! seeds come from finite-field Diffie-Hellman ([`dh`]) and are expanded into
//! mask streams by a SHA-256 based PRF ([`prf`]). Shamir shares live in the
//! Mersenne prime field `2^61 - 1` ([`field`]).

pub mod dh;
pub mod field;
pub mod fixed;
pub mod prf;

pub use dh::{dh_keypair, dh_shared, dh_shared_element, DhGroup, DhKeypair, SharedSeed};
pub use field::{interpolate_at_zero, FieldElement, FIELD_MODULUS};
pub use fixed::{FixedPointCodec, RingVector};
pub use prf::mask_stream;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumericsError {
    #[error("frac_bits must lie in 1..40, got {0}")]
    InvalidFracBits(u32),
    #[error("clamp range must be finite and positive")]
    InvalidClampRange,
    #[error("public value is outside the valid range (1, p-1)")]
    InvalidPublicValue,
    #[error("division by zero in the prime field")]
    DivisionByZero,
    #[error("value {0} does not fit the field embedding")]
    OutOfFieldRange(i64),
    #[error("invalid group parameters: {0}")]
    InvalidGroup(String),
}
