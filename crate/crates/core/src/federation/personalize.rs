use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FedError, Party, RoundRecord};
use crate::exec::Execution;
use crate::model::{base_features, grad, GradScale, ModelError, NetworkSpec, Optimizer, OptimizerKind, ParamVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonalizeConfig {
    /// Passes over the party's training split.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    /// `0` trains full-batch.
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_epochs() -> usize {
    10
}
fn default_alpha() -> f64 {
    1e-3
}
fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Adam
}
fn default_batch() -> usize {
    16
}

impl Default for PersonalizeConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            alpha: default_alpha(),
            optimizer: default_optimizer(),
            batch_size: default_batch(),
            seed: 0,
        }
    }
}

/// Fine-tunes the head of `global` on the party's training split; the base is untouched.
pub fn personalize(
    spec: &NetworkSpec,
    global: &ParamVector,
    party: &Party,
    cfg: &PersonalizeConfig,
) -> Result<ParamVector, FedError> {
    global.check_spec(spec)?;
    if party.train.is_empty() {
        return Err(ModelError::EmptyBatch.into());
    }
    let head_spec = spec.head_spec();
    let feats = party
        .train
        .with_inputs(base_features(spec, global, party.train.inputs.view())?)?;
    let mut head = ParamVector::from_values(&head_spec, global.head().to_vec())?;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(party.id as u64);
    let m = feats.len();
    let bs = if cfg.batch_size == 0 { m } else { cfg.batch_size.min(m) };
    let mut order: Vec<usize> = (0..m).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(bs) {
            let g = grad(&head_spec, &head, &feats.select(chunk), GradScale::Mean)?;
            opt.step(head.values_mut(), g.values())?;
        }
    }
    let mut out = global.clone();
    out.set_head(head.values())?;
    Ok(out)
}

/// First 1-based round whose validation loss is at most `threshold`.
pub fn rounds_to_threshold(history: &[RoundRecord], threshold: f64) -> Option<usize> {
    history.iter().find(|r| r.val_loss <= threshold).map(|r| r.round)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "E")]
    pub e: usize,
    /// `None` when the median run did not reach the threshold.
    pub median_rounds: Option<f64>,
    pub seeds: usize,
    #[serde(skip)]
    pub per_seed: Vec<Option<usize>>,
}

/// Median where "not reached" sorts above every reached value.
fn median(values: &[Option<usize>]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().map(|r| r.map_or(f64::INFINITY, |x| x as f64)).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return None;
    }
    let m = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    m.is_finite().then_some(m)
}

/// For each `E`, runs `train(E, seed)` over all seeds and reports the median
/// rounds needed to reach `threshold` validation loss.
pub fn sweep_local_updates<F>(
    e_values: &[usize],
    seeds: &[u64],
    threshold: f64,
    exec: Execution,
    train: F,
) -> Result<Vec<SweepRow>, FedError>
where
    F: Fn(usize, u64) -> Result<Vec<RoundRecord>, FedError> + Sync + Send,
{
    e_values
        .iter()
        .map(|&e| {
            let per_seed = exec
                .map(seeds.len(), |i| train(e, seeds[i]).map(|h| rounds_to_threshold(&h, threshold)))
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SweepRow {
                e,
                median_rounds: median(&per_seed),
                seeds: seeds.len(),
                per_seed,
            })
        })
        .collect()
}
