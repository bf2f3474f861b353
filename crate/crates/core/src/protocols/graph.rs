use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::numerics::{dh_keypair, dh_shared, DhGroup, SharedSeed};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum GraphConstruction {
    /// Party `j` pairs with `j ± 1, .., j ± k/2` and, for odd `k`, `j + n/2`.
    #[default]
    Circulant,
    /// The circulant graph under a seeded random relabeling of the parties.
    Random { seed: u64 },
}

/// Symmetric k-regular mask-sharing graph with one seed per edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    n: usize,
    k: usize,
    adjacency: BTreeSet<(usize, usize)>,
    seeds: BTreeMap<(usize, usize), SharedSeed>,
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Edge set of the k-regular circulant graph on `n` vertices.
pub fn circulant_pairs(n: usize, k: usize) -> Result<BTreeSet<(usize, usize)>, ProtocolError> {
    if n == 0 || (k > 0 && k > n - 1) || (n * k) % 2 == 1 {
        return Err(ProtocolError::GraphInfeasible { n, k });
    }
    let mut pairs = BTreeSet::new();
    for j in 0..n {
        for d in 1..=k / 2 {
            pairs.insert(ordered(j, (j + d) % n));
        }
        if k % 2 == 1 {
            pairs.insert(ordered(j, (j + n / 2) % n));
        }
    }
    Ok(pairs)
}

impl NeighborGraph {
    /// Builds the graph and runs one Diffie-Hellman agreement per edge.
    ///
    /// Each party draws a single keypair; both endpoints of every edge derive
    /// the seed independently and the results are checked for agreement.
    pub fn build<R: RngCore>(
        n: usize,
        k: usize,
        construction: GraphConstruction,
        group: &DhGroup,
        rng: &mut R,
    ) -> Result<Self, ProtocolError> {
        let adjacency = Self::edges(n, k, construction)?;
        let keys: Vec<_> = (0..n).map(|_| dh_keypair(group, rng)).collect();
        let mut seeds = BTreeMap::new();
        for &(a, b) in &adjacency {
            let ab = dh_shared(&keys[a].private, &keys[b].public, group, (a, b))?;
            let ba = dh_shared(&keys[b].private, &keys[a].public, group, (b, a))?;
            if ab != ba {
                return Err(ProtocolError::KeyAgreement(a, b));
            }
            seeds.insert((a, b), ab);
        }
        Ok(Self { n, k, adjacency, seeds })
    }

    /// Same topology with seeds drawn directly from `rng`, skipping key agreement.
    pub fn with_random_seeds<R: RngCore>(
        n: usize,
        k: usize,
        construction: GraphConstruction,
        rng: &mut R,
    ) -> Result<Self, ProtocolError> {
        let adjacency = Self::edges(n, k, construction)?;
        let seeds = adjacency
            .iter()
            .map(|&(a, b)| {
                let mut bytes = [0u8; 32];
                rng.fill_bytes(&mut bytes);
                ((a, b), SharedSeed::new(bytes, a, b))
            })
            .collect();
        Ok(Self { n, k, adjacency, seeds })
    }

    fn edges(n: usize, k: usize, construction: GraphConstruction) -> Result<BTreeSet<(usize, usize)>, ProtocolError> {
        let base = circulant_pairs(n, k)?;
        Ok(match construction {
            GraphConstruction::Circulant => base,
            GraphConstruction::Random { seed } => {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
                base.into_iter().map(|(a, b)| ordered(perm[a], perm[b])).collect()
            }
        })
    }

    pub fn parties(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().copied()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.adjacency.contains(&ordered(a, b))
    }

    /// `S_j`, ascending.
    pub fn neighbors(&self, j: usize) -> Vec<usize> {
        self.adjacency
            .iter()
            .filter_map(|&(a, b)| {
                if a == j {
                    Some(b)
                } else if b == j {
                    Some(a)
                } else {
                    None
                }
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn degree(&self, j: usize) -> usize {
        self.neighbors(j).len()
    }

    pub fn seed(&self, a: usize, b: usize) -> Option<&SharedSeed> {
        self.seeds.get(&ordered(a, b))
    }
}
