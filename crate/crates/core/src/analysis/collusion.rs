//! Honest-but-curious collusion attacks on completed aggregation rounds.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::stats::{chi_square_uniform_p, entropy_bits_per_word, low_byte_histogram};
use super::AnalysisError;
use crate::exec::Execution;
use crate::numerics::{interpolate_at_zero, mask_stream, FieldElement, RingVector};
use crate::protocols::{self, GraphConstruction, NeighborGraph, ProtocolConfig, ProtocolKind};
use crate::simnet::{LatencyMatrix, Message, NodeId, Phase, SimNet, Transcript};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollusionScenario {
    pub protocol: ProtocolKind,
    pub n: usize,
    /// Neighbor count (masked) or threshold (Shamir).
    pub k: usize,
    pub victim: usize,
    /// Colluding data holders.
    pub colluders: BTreeSet<usize>,
    /// Whether the mediator colludes.
    pub mediator: bool,
    pub trials: usize,
}

impl CollusionScenario {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.victim >= self.n {
            return Err(AnalysisError::InvalidScenario(format!("victim {} of {} parties", self.victim, self.n)));
        }
        if self.colluders.contains(&self.victim) {
            return Err(AnalysisError::InvalidScenario("the victim cannot collude against itself".into()));
        }
        if let Some(c) = self.colluders.iter().find(|&&c| c >= self.n) {
            return Err(AnalysisError::InvalidScenario(format!("colluder {c} of {} parties", self.n)));
        }
        Ok(())
    }

    fn sees(&self, node: NodeId) -> bool {
        if node.0 == self.n {
            self.mediator
        } else {
            self.colluders.contains(&node.0)
        }
    }

    fn visible<'a>(&'a self, t: &'a Transcript) -> impl Iterator<Item = &'a Message> + 'a {
        t.messages
            .iter()
            .map(|r| &r.message)
            .filter(|m| self.sees(m.sender) || self.sees(m.receiver))
    }
}

/// Outcome of one attacked round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub exact: bool,
    /// Attacker estimate minus the truth, one word per element; `None` when
    /// the coalition saw nothing derived from the victim's secret.
    pub residual: Option<Vec<u64>>,
}

fn ring_outcome(estimate: RingVector, truth: &RingVector) -> TrialOutcome {
    let residual = &estimate - truth;
    TrialOutcome {
        exact: residual.iter().all(|&w| w == 0),
        residual: Some(residual.into_inner()),
    }
}

fn find<'a>(s: &'a CollusionScenario, t: &'a Transcript, from: usize, to: usize, phase: Phase) -> Option<&'a Message> {
    s.visible(t)
        .find(|m| m.sender.0 == from && m.receiver.0 == to && m.round_tag.phase == phase)
}

/// Reconstructs the victim's secret from everything the coalition observed
/// and its members' private state (`graph` seeds for the masked protocol).
pub fn collude(
    s: &CollusionScenario,
    transcript: &Transcript,
    graph: Option<&NeighborGraph>,
    truth: &RingVector,
) -> Result<TrialOutcome, AnalysisError> {
    s.validate()?;
    let v = s.victim;
    let ring_of = |m: Option<&Message>| m.and_then(|m| m.payload.as_ring().cloned());
    match s.protocol {
        ProtocolKind::Nosmc => Ok(match ring_of(find(s, transcript, v, s.n, Phase::Submit)) {
            Some(p) => ring_outcome(p, truth),
            None => TrialOutcome {
                exact: false,
                residual: None,
            },
        }),
        ProtocolKind::Masked => {
            let graph = graph.ok_or_else(|| AnalysisError::InvalidScenario("masked attack needs the seed graph".into()))?;
            let Some(msg) = find(s, transcript, v, s.n, Phase::Submit) else {
                return Ok(TrialOutcome {
                    exact: false,
                    residual: None,
                });
            };
            let mut est = msg.payload.as_ring().cloned().unwrap_or_default();
            let round = msg.round_tag.round;
            for i in graph.neighbors(v).into_iter().filter(|i| s.colluders.contains(i)) {
                let seed = graph.seed(v, i).expect("edge seed");
                // The victim added the stream when v < i; undo that.
                est.add_signed(&mask_stream(seed, round, est.len()), v < i);
            }
            Ok(ring_outcome(est, truth))
        }
        ProtocolKind::Stsmc => {
            let (pred, succ) = ((v + s.n - 1) % s.n, (v + 1) % s.n);
            let len = truth.len();
            let get = |from, to, phase| ring_of(find(s, transcript, from, to, phase)).unwrap_or_else(|| RingVector::zeros(len));
            let (in1, out1) = (get(pred, v, Phase::RingPass1), get(v, succ, Phase::RingPass1));
            let (in2, out2) = (get(pred, v, Phase::RingPass2), get(v, succ, Phase::RingPass2));
            let mut est = &out1 - &in1;
            if v == 0 {
                // out2 = total - r_0 and in1 = total.
                est += &out2;
            } else {
                // r_v = in2 - out2.
                est -= &in2;
                est += &out2;
            }
            Ok(ring_outcome(est, truth))
        }
        ProtocolKind::Shamir => {
            let points: Vec<(FieldElement, &[FieldElement])> = s
                .visible(transcript)
                .filter(|m| m.sender.0 == v && m.round_tag.phase == Phase::ShareDistribution)
                .filter_map(|m| Some((FieldElement::new(m.receiver.0 as u64 + 1), m.payload.as_field()?)))
                .take(s.k)
                .collect();
            let residual = truth
                .iter()
                .enumerate()
                .map(|(e, &x)| {
                    let est = if points.is_empty() {
                        FieldElement::ZERO
                    } else {
                        let pts: Vec<_> = points.iter().map(|&(px, ys)| (px, ys[e])).collect();
                        interpolate_at_zero(&pts)?
                    };
                    Ok((est - FieldElement::embed(x)?).value())
                })
                .collect::<Result<Vec<u64>, AnalysisError>>()?;
            Ok(TrialOutcome {
                exact: residual.iter().all(|&w| w == 0),
                residual: Some(residual),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackReport {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub k: usize,
    pub victim: usize,
    pub colluders: Vec<usize>,
    pub mediator: bool,
    pub trials: usize,
    pub recovered_trials: usize,
    /// Recovered in every trial.
    pub exact_recovery: bool,
    /// Estimated residual entropy, bits per element.
    pub residual_entropy: f64,
    /// Uniformity of the residual's low byte; `None` without residuals.
    pub chi_square_p: Option<f64>,
}

impl AttackReport {
    pub fn verdict(&self) -> String {
        match (self.exact_recovery, self.chi_square_p) {
            (true, _) => "RECOVERED".into(),
            (false, Some(p)) => format!("NOT RECOVERED, p={p:.4}"),
            (false, None) => "NOT RECOVERED, victim submission unseen".into(),
        }
    }
}

/// Parameters of a Monte Carlo collusion experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollusionRun {
    /// Elements per secret vector.
    pub dim: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for CollusionRun {
    fn default() -> Self {
        Self {
            dim: 16,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

/// Neighbor graph used by masked collusion experiments.
pub fn attack_graph(n: usize, k: usize, seed: u64) -> Result<NeighborGraph, AnalysisError> {
    let mut rng = protocols::party_rng(seed, 0, usize::MAX, "collusion-graph");
    Ok(NeighborGraph::with_random_seeds(n, k, GraphConstruction::Circulant, &mut rng)?)
}

/// Runs `trials` independent rounds with random secrets and attacks each.
pub fn run_collusion(s: &CollusionScenario, run: &CollusionRun) -> Result<AttackReport, AnalysisError> {
    s.validate()?;
    let graph = if s.protocol == ProtocolKind::Masked {
        Some(attack_graph(s.n, s.k, run.seed)?)
    } else {
        None
    };
    let cfg = ProtocolConfig::new(s.protocol).with_threshold(s.k);
    let latency = LatencyMatrix::uniform(s.n, 1.0);
    let outcomes = run
        .execution
        .map(s.trials, |t| -> Result<TrialOutcome, AnalysisError> {
            let mut rng = protocols::party_rng(run.seed, t as u64, s.n, "collusion-secrets");
            let secrets: Vec<RingVector> = (0..s.n)
                .map(|_| RingVector((0..run.dim).map(|_| rng.gen::<i32>() as i64 as u64).collect()))
                .collect();
            let mut net = SimNet::new(latency.clone());
            let res = protocols::aggregate(&cfg, &secrets, graph.as_ref(), t as u64, run.seed, &mut net)?;
            collude(s, &res.transcript, graph.as_ref(), &secrets[s.victim])
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let recovered = outcomes.iter().filter(|o| o.exact).count();
    let residuals: Vec<u64> = outcomes.iter().filter_map(|o| o.residual.as_ref()).flatten().copied().collect();
    let hist = low_byte_histogram(residuals.iter().copied());
    let seen = !residuals.is_empty();
    Ok(AttackReport {
        protocol: s.protocol,
        n: s.n,
        k: s.k,
        victim: s.victim,
        colluders: s.colluders.iter().copied().collect(),
        mediator: s.mediator,
        trials: s.trials,
        recovered_trials: recovered,
        exact_recovery: s.trials > 0 && recovered == s.trials,
        residual_entropy: if seen { entropy_bits_per_word(&hist) } else { 64.0 },
        chi_square_p: if seen { chi_square_uniform_p(&hist) } else { None },
    })
}

/// With `k - 1` shares of a degree-`k-1` polynomial, checks that every
/// candidate secret extends to a consistent polynomial: the polynomial through
/// `(0, c)` and the shares, evaluated at a fresh point `x*`, together with the
/// shares interpolates back to `c`.
pub fn shamir_candidates_consistent(
    shares: &[(FieldElement, FieldElement)],
    candidates: &[FieldElement],
) -> Result<bool, AnalysisError> {
    let fresh = FieldElement::new(shares.iter().map(|(x, _)| x.value()).max().unwrap_or(0) + 1);
    for &c in candidates {
        let mut pts = vec![(FieldElement::ZERO, c)];
        pts.extend_from_slice(shares);
        let y_star = eval_interpolant(&pts, fresh)?;
        let mut completed = shares.to_vec();
        completed.push((fresh, y_star));
        if interpolate_at_zero(&completed)? != c {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Value at `x` of the unique polynomial through `points`.
fn eval_interpolant(points: &[(FieldElement, FieldElement)], x: FieldElement) -> Result<FieldElement, AnalysisError> {
    // Shift so that `x` becomes the origin.
    let shifted: Vec<_> = points.iter().map(|&(px, py)| (px - x, py)).collect();
    Ok(interpolate_at_zero(&shifted)?)
}

/// Candidate secrets for the consistency check.
pub fn random_candidates(count: usize, seed: u64) -> Vec<FieldElement> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| FieldElement::new(rng.gen_range(0..crate::numerics::FIELD_MODULUS)))
        .collect()
}
