use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::CliError;
use crate::data::GeneratorConfig;
use crate::federation::{FedConfig, PersonalizeConfig};
use crate::model::NetworkSpec;
use crate::protocols::ProtocolKind;
use crate::simnet::LatencyMatrix;

pub const SEED_ENV: &str = "FEDMASK_SEED";

/// Synthetic data drawn for every party.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub samples_per_party: usize,
    #[serde(default)]
    pub heterogeneity: f64,
    #[serde(default = "default_ratio")]
    pub positive_ratio: f64,
    /// Generator stream of the first party; later parties use the next ids.
    #[serde(default)]
    pub first_party: usize,
}

fn default_ratio() -> f64 {
    0.5
}

/// A preset name (`scenario1`..`scenario3`, `auto`, `random`) or an explicit
/// `(n + 1) x (n + 1)` matrix in milliseconds with the mediator last.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LatencySpec {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

impl Default for LatencySpec {
    fn default() -> Self {
        LatencySpec::Named("auto".into())
    }
}

/// Random links drawn for `random` and for `auto` without a matching preset.
pub(crate) const RANDOM_LINK_MS: (f64, f64) = (5.0, 100.0);

impl LatencySpec {
    pub fn resolve(&self, parties: usize, seed: u64) -> Result<LatencyMatrix, CliError> {
        let random = || LatencyMatrix::random(parties, RANDOM_LINK_MS.0, RANDOM_LINK_MS.1, &mut ChaCha8Rng::seed_from_u64(seed));
        let m = match self {
            LatencySpec::Matrix(rows) => LatencyMatrix::new(rows.clone()).map_err(|e| CliError::Schema(e.to_string()))?,
            LatencySpec::Named(name) => match name.as_str() {
                "random" => random(),
                "auto" => match parties {
                    3 => LatencyMatrix::preset("scenario1")?,
                    5 => LatencyMatrix::preset("scenario2")?,
                    10 => LatencyMatrix::preset("scenario3")?,
                    _ => random(),
                },
                other => LatencyMatrix::preset(other).map_err(|e| CliError::Schema(e.to_string()))?,
            },
        };
        if m.parties() != parties {
            return Err(CliError::Schema(format!(
                "latency matrix covers {} parties, scenario has {parties}",
                m.parties()
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillSection {
    #[serde(default = "default_distill_epochs")]
    pub epochs: usize,
    #[serde(default = "default_distill_alpha")]
    pub alpha: f64,
    #[serde(default = "default_transfer_samples")]
    pub transfer_samples: usize,
    /// Generator stream for the transfer set, disjoint from the parties.
    #[serde(default = "default_transfer_party")]
    pub transfer_party: usize,
}

fn default_distill_epochs() -> usize {
    200
}
fn default_distill_alpha() -> f64 {
    1e-2
}
fn default_transfer_samples() -> usize {
    500
}
fn default_transfer_party() -> usize {
    1_000_000
}

impl Default for DistillSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// One experiment. The top-level `protocol` and `k` override the same
/// fields of `fed`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub parties: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    pub protocol: ProtocolKind,
    pub model: NetworkSpec,
    /// Smaller base used by `edge-train --distill`; its head must match `model`'s.
    #[serde(default)]
    pub student: Option<NetworkSpec>,
    #[serde(default)]
    pub fed: FedConfig,
    pub data: DataSection,
    #[serde(default)]
    pub latency: LatencySpec,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub distill: DistillSection,
    #[serde(default)]
    pub personalize: PersonalizeConfig,
}

fn default_k() -> usize {
    2
}

impl ScenarioFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut s: ScenarioFile = serde_json::from_str(text)
            .map_err(|e| CliError::Schema(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
        s.fed.protocol = s.protocol;
        s.fed.k = s.k;
        s.validate().map_err(|e| CliError::Schema(format!("{origin}: {e}")))?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn validate(&self) -> Result<(), String> {
        self.model.validate().map_err(|e| e.to_string())?;
        if let Some(st) = &self.student {
            st.validate().map_err(|e| e.to_string())?;
        }
        self.fed.validate(self.parties).map_err(|e| e.to_string())?;
        if self.data.samples_per_party < 5 {
            return Err("data.samples_per_party must be at least 5".into());
        }
        if !(0.0..=1.0).contains(&self.data.heterogeneity) {
            return Err("data.heterogeneity must lie in [0, 1]".into());
        }
        if *self.model.layer_sizes.last().unwrap_or(&0) != 2 {
            return Err("model must end in 2 output classes".into());
        }
        Ok(())
    }

    /// `--seed`, then the file's `seed`, then `FEDMASK_SEED`, then 0.
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        match flag.or(self.seed) {
            Some(s) => Ok(s),
            None => env_seed(),
        }
    }

    pub fn generator(&self, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n_samples: self.data.samples_per_party,
            dim: self.model.input_dim(),
            seed,
            heterogeneity: self.data.heterogeneity,
            party: self.data.first_party,
            positive_ratio: self.data.positive_ratio,
        }
    }

    pub fn personalize_config(&self, seed: u64) -> PersonalizeConfig {
        PersonalizeConfig {
            seed,
            ..self.personalize.clone()
        }
    }
}

/// `FEDMASK_SEED` if set, otherwise 0.
pub fn env_seed() -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Schema(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}
