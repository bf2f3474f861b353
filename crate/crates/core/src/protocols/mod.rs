//! Secure-aggregation protocols as message-passing state machines.
//!
//! Every protocol computes the element-wise ring sum of one [`RingVector`] per
//! party. The state machines implement [`Handler`](crate::simnet::Handler) and
//! advance only through scheduler callbacks, so a round's transcript carries
//! exact message counts and a critical-path latency.

mod graph;
mod masked;
mod shamir;
mod stsmc;

pub use graph::{circulant_pairs, GraphConstruction, NeighborGraph};
pub use masked::{masked_payload, masked_round, nosmc_round, party_mask};
pub use shamir::{share_vector, shamir_round, ShamirFinish};
pub use stsmc::{stsmc_masks, stsmc_round};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numerics::{NumericsError, RingVector};
use crate::simnet::{LatencyModel, NodeId, SimError, SimNet, Transcript};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("secret vectors disagree in length or party count: {0}")]
    Shape(String),
    #[error("protocol needs at least 2 parties, got {0}")]
    TooFewParties(usize),
    #[error("threshold {k} is outside 2..={n}")]
    BadThreshold { k: usize, n: usize },
    #[error("no {k}-regular graph on {n} parties")]
    GraphInfeasible { n: usize, k: usize },
    #[error("key agreement between parties {0} and {1} disagreed")]
    KeyAgreement(usize, usize),
    #[error("round {round} aborted: {reason}")]
    RoundAborted { round: u64, reason: String },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationResult {
    pub sum: RingVector,
    pub transcript: Transcript,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Nosmc,
    Stsmc,
    Shamir,
    Masked,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::Nosmc,
        ProtocolKind::Stsmc,
        ProtocolKind::Shamir,
        ProtocolKind::Masked,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Nosmc => "nosmc",
            ProtocolKind::Stsmc => "stsmc",
            ProtocolKind::Shamir => "shamir",
            ProtocolKind::Masked => "masked",
        }
    }
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Protocol choice plus the knobs each protocol reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    /// Shamir reconstruction threshold.
    #[serde(default = "default_threshold")]
    pub threshold: usize,
    #[serde(default)]
    pub shamir_finish: ShamirFinish,
    /// Whether the party holding the final STSMC or combined Shamir sum
    /// forwards it to the mediator.
    #[serde(default)]
    pub deliver_to_mediator: bool,
}

fn default_threshold() -> usize {
    2
}

impl ProtocolConfig {
    pub fn new(kind: ProtocolKind) -> Self {
        Self {
            kind,
            threshold: default_threshold(),
            shamir_finish: ShamirFinish::default(),
            deliver_to_mediator: false,
        }
    }

    pub fn with_threshold(mut self, k: usize) -> Self {
        self.threshold = k;
        self
    }

    /// Closed-form critical path of one round with `n` parties.
    pub fn latency_model(&self, n: usize) -> LatencyModel {
        let mediator = NodeId(n);
        match self.kind {
            ProtocolKind::Nosmc | ProtocolKind::Masked => LatencyModel::Star {
                senders: (0..n).collect(),
                sink: mediator,
            },
            ProtocolKind::Stsmc => LatencyModel::Ring {
                parties: n,
                deliver_to_mediator: self.deliver_to_mediator,
            },
            ProtocolKind::Shamir => match self.shamir_finish {
                ShamirFinish::Combiner => LatencyModel::ExchangeThenGather {
                    parties: n,
                    senders: (1..self.threshold).collect(),
                    sink: NodeId(0),
                    then_deliver: self.deliver_to_mediator.then_some(mediator),
                },
                ShamirFinish::Mediator => LatencyModel::ExchangeThenGather {
                    parties: n,
                    senders: (0..self.threshold).collect(),
                    sink: mediator,
                    then_deliver: None,
                },
            },
        }
    }

    /// Analytic `(sent, received)` per node; index `n` is the mediator.
    pub fn expected_counts(&self, n: usize) -> Vec<(usize, usize)> {
        let mut c = vec![(0, 0); n + 1];
        match self.kind {
            ProtocolKind::Nosmc | ProtocolKind::Masked => {
                c[..n].fill((1, 0));
                c[n] = (0, n);
            }
            ProtocolKind::Stsmc => {
                c[..n].fill((2, 2));
                if self.deliver_to_mediator {
                    c[0].0 += 1;
                    c[n].1 += 1;
                }
            }
            ProtocolKind::Shamir => {
                let k = self.threshold;
                c[..n].fill((n - 1, n - 1));
                match self.shamir_finish {
                    ShamirFinish::Combiner => {
                        for p in c.iter_mut().take(k).skip(1) {
                            p.0 += 1;
                        }
                        c[0].1 += k - 1;
                        if self.deliver_to_mediator {
                            c[0].0 += 1;
                            c[n].1 += 1;
                        }
                    }
                    ShamirFinish::Mediator => {
                        for p in c.iter_mut().take(k) {
                            p.0 += 1;
                        }
                        c[n].1 += k;
                    }
                }
            }
        }
        c
    }

    /// Sum over all nodes of sends plus receives.
    pub fn expected_total_events(&self, n: usize) -> usize {
        self.expected_counts(n).iter().map(|(s, r)| s + r).sum()
    }
}

/// Runs one aggregation round of the configured protocol.
///
/// `graph` is required by the masked protocol only. `rng_seed` keys the
/// per-party randomness of STSMC and Shamir together with `round`.
pub fn aggregate(
    cfg: &ProtocolConfig,
    secrets: &[RingVector],
    graph: Option<&NeighborGraph>,
    round: u64,
    rng_seed: u64,
    net: &mut SimNet,
) -> Result<AggregationResult, ProtocolError> {
    match cfg.kind {
        ProtocolKind::Nosmc => nosmc_round(secrets, round, net),
        ProtocolKind::Masked => {
            let graph = graph.ok_or_else(|| ProtocolError::Shape("masked protocol needs a neighbor graph".into()))?;
            masked_round(secrets, graph, round, net)
        }
        ProtocolKind::Stsmc => stsmc_round(secrets, rng_seed, round, cfg.deliver_to_mediator, net),
        ProtocolKind::Shamir => shamir_round(
            secrets,
            cfg.threshold,
            cfg.shamir_finish,
            cfg.deliver_to_mediator,
            rng_seed,
            round,
            net,
        ),
    }
}

/// Independent RNG for one party's local randomness in one round.
pub fn party_rng(seed: u64, round: u64, party: usize, domain: &str) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(domain.as_bytes());
    h.update(seed.to_le_bytes());
    h.update(round.to_le_bytes());
    h.update((party as u64).to_le_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

/// Checks party count and equal lengths; returns the common length.
pub(crate) fn check_secrets(secrets: &[RingVector], net: &SimNet) -> Result<usize, ProtocolError> {
    if secrets.len() != net.parties() {
        return Err(ProtocolError::Shape(format!(
            "{} secrets for {} parties",
            secrets.len(),
            net.parties()
        )));
    }
    let len = secrets.first().map_or(0, RingVector::len);
    if let Some((j, s)) = secrets.iter().enumerate().find(|(_, s)| s.len() != len) {
        return Err(ProtocolError::Shape(format!("party {j} has length {} instead of {len}", s.len())));
    }
    Ok(len)
}

/// Direct element-wise ring sum; the reference every protocol must match.
pub fn ring_sum_oracle(secrets: &[RingVector]) -> RingVector {
    let len = secrets.first().map_or(0, RingVector::len);
    let mut acc = vec![0u64; len];
    for s in secrets {
        for (a, v) in acc.iter_mut().zip(s.iter()) {
            *a = a.wrapping_add(*v);
        }
    }
    RingVector(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::{latency_report, LatencyMatrix};
    use rand::{Rng, RngCore};

    fn secrets(n: usize, len: usize, rng: &mut impl RngCore) -> Vec<RingVector> {
        // Values small enough for the Shamir field embedding.
        (0..n)
            .map(|_| RingVector((0..len).map(|_| rng.gen_range(-(1i64 << 40)..(1i64 << 40)) as u64).collect()))
            .collect()
    }

    #[test]
    fn all_protocols_match_the_oracle_and_counts() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for n in 2..=7 {
            let k = if n % 2 == 1 && n > 2 { 2 } else { n - 1 };
            let graph = NeighborGraph::with_random_seeds(n, k, GraphConstruction::Circulant, &mut rng).unwrap();
            let xs = secrets(n, 13, &mut rng);
            let oracle = ring_sum_oracle(&xs);
            let m = LatencyMatrix::random(n, 1.0, 50.0, &mut rng);
            for kind in ProtocolKind::ALL {
                for finish in [ShamirFinish::Combiner, ShamirFinish::Mediator] {
                    let cfg = ProtocolConfig {
                        shamir_finish: finish,
                        ..ProtocolConfig::new(kind).with_threshold(2.max(n - 1))
                    };
                    let mut net = SimNet::new(m.clone());
                    let res = aggregate(&cfg, &xs, Some(&graph), 4, 9, &mut net).unwrap();
                    assert_eq!(res.sum, oracle, "{kind} n={n}");
                    let got: Vec<_> = res.transcript.counters.iter().map(|c| (c.sent, c.received)).collect();
                    assert_eq!(got, cfg.expected_counts(n), "{kind} n={n} {finish:?}");
                    let rep = latency_report(&res.transcript, &cfg.latency_model(n), &m);
                    assert!(!rep.diverged, "{kind} n={n} {finish:?} {rep:?}");
                }
            }
        }
    }

    #[test]
    fn shamir_total_matches_published_count() {
        for n in 2..=10 {
            for k in 2..=n {
                let cfg = ProtocolConfig::new(ProtocolKind::Shamir).with_threshold(k);
                assert_eq!(cfg.expected_total_events(n), 2 * (n * n - n + k - 1));
            }
        }
    }

    #[test]
    fn shape_errors() {
        let m = LatencyMatrix::uniform(3, 1.0);
        let mut net = SimNet::new(m);
        let bad = vec![RingVector::zeros(2), RingVector::zeros(3), RingVector::zeros(2)];
        assert!(matches!(nosmc_round(&bad, 0, &mut net), Err(ProtocolError::Shape(_))));
        let two = vec![RingVector::zeros(2); 2];
        assert!(matches!(nosmc_round(&two, 0, &mut net), Err(ProtocolError::Shape(_))));
    }

    #[test]
    fn party_rngs_are_independent() {
        let a = party_rng(1, 0, 0, "x").next_u64();
        assert_ne!(a, party_rng(1, 1, 0, "x").next_u64());
        assert_ne!(a, party_rng(1, 0, 1, "x").next_u64());
        assert_ne!(a, party_rng(1, 0, 0, "y").next_u64());
        assert_eq!(a, party_rng(1, 0, 0, "x").next_u64());
    }
}
