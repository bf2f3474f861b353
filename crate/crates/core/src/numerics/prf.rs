//! Seed-expanded mask streams.

use sha2::{Digest, Sha256};

use super::{RingVector, SharedSeed};

/// Expands `(seed, round)` into `length` uniform ring elements.
///
/// Block `b` is `SHA-256(seed || round_le || b_le)`, yielding the four
/// little-endian 64-bit words for indices `4b..4b+4`.
pub fn mask_stream(seed: &SharedSeed, round: u64, length: usize) -> RingVector {
    let mut prefix = Sha256::new();
    prefix.update(seed.bytes());
    prefix.update(round.to_le_bytes());
    let mut out = Vec::with_capacity(length);
    let mut block = 0u64;
    while out.len() < length {
        let mut h = prefix.clone();
        h.update(block.to_le_bytes());
        let digest = h.finalize();
        for word in digest.chunks_exact(8) {
            if out.len() == length {
                break;
            }
            out.push(u64::from_le_bytes(word.try_into().unwrap()));
        }
        block += 1;
    }
    RingVector(out)
}
