use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "weights")]
pub enum PartitionMode {
    #[default]
    Equal,
    Weighted(Vec<f64>),
}

/// One party's train/validation/test indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shard {
    pub party: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Shard {
    /// Splits `indices` 60/20/20 after a seeded shuffle.
    pub fn split(party: usize, indices: &[usize], seed: u64) -> Shard {
        let mut idx = indices.to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(party as u64);
        idx.shuffle(&mut rng);
        let m = idx.len();
        let n_train = (0.6 * m as f64).round() as usize;
        let n_val = (0.2 * m as f64).round() as usize;
        let test = idx.split_off(n_train + n_val);
        let val = idx.split_off(n_train);
        Shard {
            party,
            train: idx,
            val,
            test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shard sizes: `round(w_j * m)` for all but the last party, which takes the rest.
pub fn shard_sizes(m: usize, n_parties: usize, mode: &PartitionMode) -> Result<Vec<usize>, DataError> {
    if n_parties == 0 || n_parties > m {
        return Err(DataError::TooFewSamples { samples: m, parties: n_parties });
    }
    let weights = match mode {
        PartitionMode::Equal => vec![1.0 / n_parties as f64; n_parties],
        PartitionMode::Weighted(w) => {
            if w.len() != n_parties || w.iter().any(|&x| !(x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(DataError::InvalidConfig(format!(
                    "{n_parties} non-negative weights summing to 1 expected, got {w:?}"
                )));
            }
            w.clone()
        }
    };
    let rounded: Vec<usize> = weights[..n_parties - 1]
        .iter()
        .map(|w| (w * m as f64).round() as usize)
        .collect();
    // Rounding that overshoots falls back to flooring.
    let mut sizes: Vec<usize> = if matches!(mode, PartitionMode::Equal) {
        vec![m / n_parties; n_parties - 1]
    } else if rounded.iter().sum::<usize>() > m {
        weights[..n_parties - 1].iter().map(|w| (w * m as f64).floor() as usize).collect()
    } else {
        rounded
    };
    let used: usize = sizes.iter().sum();
    sizes.push(m - used);
    Ok(sizes)
}

/// Disjoint index sets covering `0..m` after a seeded shuffle.
pub fn partition(m: usize, n_parties: usize, mode: &PartitionMode, seed: u64) -> Result<Vec<Vec<usize>>, DataError> {
    let sizes = shard_sizes(m, n_parties, mode)?;
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut rest = idx.as_slice();
    Ok(sizes
        .into_iter()
        .map(|s| {
            let (head, tail) = rest.split_at(s);
            rest = tail;
            head.to_vec()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_and_weighted_sizes() {
        assert_eq!(shard_sizes(300, 3, &PartitionMode::Equal).unwrap(), vec![100, 100, 100]);
        let w = PartitionMode::Weighted(vec![0.5, 0.3, 0.2]);
        assert_eq!(shard_sizes(100, 3, &w).unwrap(), vec![50, 30, 20]);
        assert_eq!(shard_sizes(10, 3, &PartitionMode::Equal).unwrap(), vec![3, 3, 4]);
    }

    #[test]
    fn errors() {
        assert_eq!(
            partition(2, 3, &PartitionMode::Equal, 0),
            Err(DataError::TooFewSamples { samples: 2, parties: 3 })
        );
        assert!(shard_sizes(10, 2, &PartitionMode::Weighted(vec![0.5, 0.6])).is_err());
        assert!(shard_sizes(10, 2, &PartitionMode::Weighted(vec![1.0])).is_err());
    }

    #[test]
    fn split_proportions() {
        for m in [100, 137, 1000] {
            let s = Shard::split(0, &(0..m).collect::<Vec<_>>(), 4);
            let f = |v: &Vec<usize>| v.len() as f64 / m as f64;
            assert!((0.59..=0.61).contains(&f(&s.train)));
            assert!((0.19..=0.21).contains(&f(&s.val)));
            assert!((0.19..=0.21).contains(&f(&s.test)));
        }
    }

    proptest! {
        #[test]
        fn shards_cover_without_duplicates(m in 1usize..400, n in 1usize..12, seed in any::<u64>()) {
            prop_assume!(n <= m);
            let parts = partition(m, n, &PartitionMode::Equal, seed).unwrap();
            let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..m).collect::<Vec<_>>());
            let s = Shard::split(1, &parts[0], seed);
            let mut u: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            u.sort_unstable();
            let mut orig = parts[0].clone();
            orig.sort_unstable();
            prop_assert_eq!(u, orig);
        }
    }
}
