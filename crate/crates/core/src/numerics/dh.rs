//! Finite-field Diffie-Hellman over published safe-prime groups.

use num_bigint::BigUint;
use rand::RngCore;
use sha2::{Digest, Sha256};

use super::NumericsError;

// RFC 3526, group 14.
const MODP_2048: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1\
29024E088A67CC74020BBEA63B139B22514A08798E3404DD\
EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245\
E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3D\
C2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F\
83655D23DCA3AD961C62F356208552BB9ED529077096966D\
670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B\
E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9\
DE2BCBF6955817183995497CEA956AE515D2261898FA0510\
15728E5A8AACAA68FFFFFFFFFFFFFFFF";

// RFC 2409, first Oakley group.
const MODP_768: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1\
29024E088A67CC74020BBEA63B139B22514A08798E3404DD\
EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245\
E485B576625E7EC6F44C42E9A63A3620FFFFFFFFFFFFFFFF";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DhGroup {
    prime: BigUint,
    generator: BigUint,
}

impl DhGroup {
    /// Arbitrary group; only sanity checks are performed, primality is the caller's contract.
    pub fn new(prime: BigUint, generator: BigUint) -> Result<Self, NumericsError> {
        let two = BigUint::from(2u32);
        if prime <= BigUint::from(3u32) || !prime.bit(0) {
            return Err(NumericsError::InvalidGroup("modulus must be an odd prime > 3".into()));
        }
        if generator < two || generator >= &prime - 1u32 {
            return Err(NumericsError::InvalidGroup("generator out of range".into()));
        }
        Ok(Self { prime, generator })
    }

    /// The 2048-bit MODP group, default for key agreement.
    pub fn modp2048() -> Self {
        Self::from_hex(MODP_2048)
    }

    /// A 768-bit safe-prime group, for fast tests and simulations.
    pub fn modp768() -> Self {
        Self::from_hex(MODP_768)
    }

    fn from_hex(hex: &str) -> Self {
        Self {
            prime: BigUint::parse_bytes(hex.as_bytes(), 16).expect("static group constant"),
            generator: BigUint::from(2u32),
        }
    }

    pub fn prime(&self) -> &BigUint {
        &self.prime
    }

    pub fn generator(&self) -> &BigUint {
        &self.generator
    }

    pub fn bit_length(&self) -> u64 {
        self.prime.bits()
    }

    fn byte_len(&self) -> usize {
        self.bit_length().div_ceil(8) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DhKeypair {
    pub private: BigUint,
    pub public: BigUint,
}

impl DhKeypair {
    pub fn from_private(group: &DhGroup, private: BigUint) -> Self {
        let public = group.generator.modpow(&private, &group.prime);
        Self { private, public }
    }
}

/// Samples a private exponent uniformly from `[2, p-2]` by rejection.
pub fn dh_keypair<R: RngCore + ?Sized>(group: &DhGroup, rng: &mut R) -> DhKeypair {
    let span = &group.prime - 3u32; // size of [2, p-2]
    let bits = span.bits();
    let mut buf = vec![0u8; bits.div_ceil(8) as usize];
    let excess = buf.len() as u64 * 8 - bits;
    let private = loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= 0xffu8 >> excess;
        let candidate = BigUint::from_bytes_be(&buf);
        if candidate < span {
            break candidate + 2u32;
        }
    };
    DhKeypair::from_private(group, private)
}

/// Raw shared group element `peer_public^private mod p`, after validating the peer value.
pub fn dh_shared_element(
    private: &BigUint,
    peer_public: &BigUint,
    group: &DhGroup,
) -> Result<BigUint, NumericsError> {
    let one = BigUint::from(1u32);
    if *peer_public <= one || *peer_public >= &group.prime - 1u32 {
        return Err(NumericsError::InvalidPublicValue);
    }
    Ok(peer_public.modpow(private, &group.prime))
}

/// Derives the pair's seed as SHA-256 of the shared element, big-endian and
/// left-padded to the modulus width.
pub fn dh_shared(
    private: &BigUint,
    peer_public: &BigUint,
    group: &DhGroup,
    pair: (usize, usize),
) -> Result<SharedSeed, NumericsError> {
    let element = dh_shared_element(private, peer_public, group)?;
    let raw = element.to_bytes_be();
    let mut encoded = vec![0u8; group.byte_len() - raw.len()];
    encoded.extend_from_slice(&raw);
    let digest: [u8; 32] = Sha256::digest(&encoded).into();
    Ok(SharedSeed::new(digest, pair.0, pair.1))
}

/// 32-byte seed shared by an unordered pair of parties.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SharedSeed {
    bytes: [u8; 32],
    pair: (usize, usize),
}

impl std::fmt::Debug for SharedSeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SharedSeed({:?}, {:02x}{:02x}..)", self.pair, self.bytes[0], self.bytes[1])
    }
}

impl SharedSeed {
    pub fn new(bytes: [u8; 32], a: usize, b: usize) -> Self {
        Self {
            bytes,
            pair: (a.min(b), a.max(b)),
        }
    }

    pub fn bytes(&self) -> &[u8; 32] {
        &self.bytes
    }

    /// Endpoints, smaller id first.
    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }
}
