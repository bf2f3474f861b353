use super::FedError;
use crate::data::{generate, Dataset, GeneratorConfig, Shard};
use crate::exec::Execution;
use crate::model::Batch;

/// One data holder's local splits. Nothing here is ever put on the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Party {
    pub id: usize,
    pub train: Batch,
    pub val: Batch,
    pub test: Batch,
}

impl Party {
    /// Splits a dataset 60/20/20 with a seeded shuffle.
    pub fn from_dataset(id: usize, data: &Dataset, split_seed: u64) -> Result<Self, FedError> {
        let all: Vec<usize> = (0..data.len()).collect();
        Self::from_shard(id, data, &Shard::split(id, &all, split_seed))
    }

    pub fn from_shard(id: usize, data: &Dataset, shard: &Shard) -> Result<Self, FedError> {
        Ok(Self {
            id,
            train: data.batch(&shard.train)?,
            val: data.batch(&shard.val)?,
            test: data.batch(&shard.test)?,
        })
    }

    pub fn m(&self) -> usize {
        self.train.len()
    }
}

/// Generates `n` parties, each from its own `(seed, first_id + j)` stream.
pub fn synthetic_parties(
    n: usize,
    template: &GeneratorConfig,
    first_id: usize,
    exec: Execution,
) -> Result<Vec<Party>, FedError> {
    exec.map(n, |j| {
        let cfg = GeneratorConfig {
            party: first_id + j,
            ..template.clone()
        };
        let data = generate(&cfg)?;
        Party::from_dataset(j, &data, template.seed)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parties_are_deterministic_and_split() {
        let t = GeneratorConfig::new(100, 16, 5, 0.3, 0);
        let a = synthetic_parties(3, &t, 0, Execution::Sequential).unwrap();
        let b = synthetic_parties(3, &t, 0, Execution::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!((a[0].train.len(), a[0].val.len(), a[0].test.len()), (60, 20, 20));
        assert_ne!(a[0].train, a[1].train);
    }
}
