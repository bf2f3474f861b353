use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{FedConfig, FedError, Party};
use crate::data::metrics;
use crate::model::{forward, grad, predict, Batch, GradScale, ModelError, NetworkSpec, Optimizer, ParamVector};
use crate::numerics::{FixedPointCodec, RingVector};
use crate::protocols::{self, AggregationResult, NeighborGraph, ProtocolError, ProtocolKind};
use crate::simnet::{Handler, Message, NodeId, Outbox, Payload, Phase, RoundTag, SimNet, Transcript};

/// Per-round log line of a training phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub round: usize,
    /// Loss of the global model on the pooled training splits.
    pub global_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Messages and bytes of the aggregation and the broadcast.
    pub messages: usize,
    pub bytes: usize,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    pub params: ParamVector,
    pub history: Vec<RoundRecord>,
    /// Every message of the phase, or only counters when transcripts are not kept.
    pub transcript: Transcript,
    /// Dequantized global gradient of each init round; empty for the edge phase.
    pub global_gradients: Vec<Vec<f64>>,
}

/// SHA-256 over the little-endian base parameters.
pub fn base_digest(params: &ParamVector) -> [u8; 32] {
    let mut h = Sha256::new();
    for v in params.base() {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}

/// Cyclic mini-batch iterator over a fixed per-party shuffle.
#[derive(Debug, Clone)]
struct Cursor {
    order: Vec<usize>,
    pos: usize,
}

impl Cursor {
    fn new(m: usize, seed: u64, party: usize) -> Self {
        let mut order: Vec<usize> = (0..m).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(party as u64);
        order.shuffle(&mut rng);
        Self { order, pos: 0 }
    }

    fn next(&mut self, batch_size: usize) -> Vec<usize> {
        let m = self.order.len();
        if batch_size == 0 || batch_size >= m {
            return self.order.clone();
        }
        let rows = (0..batch_size).map(|i| self.order[(self.pos + i) % m]).collect();
        self.pos = (self.pos + batch_size) % m;
        rows
    }
}

struct Broadcast {
    tag: RoundTag,
    mediator: NodeId,
    parties: usize,
    payload: Option<RingVector>,
}

impl Handler for Broadcast {
    fn on_deliver(&mut self, _now: f64, _msg: &Message, _out: &mut Outbox) {}

    fn on_idle(&mut self, _now: f64, out: &mut Outbox) {
        if let Some(p) = self.payload.take() {
            for j in 0..self.parties {
                out.send(Message::new(self.mediator, NodeId(j), self.tag, Payload::Ring(p.clone())));
            }
        }
    }
}

struct Evaluation {
    train_loss: f64,
    val_loss: f64,
    val_accuracy: f64,
    precision: f64,
    recall: f64,
    f1: f64,
}

fn mse(probs: &ndarray::Array2<f64>, batch: &Batch) -> f64 {
    let sq: f64 = (probs - &batch.targets).iter().map(|d| d * d).sum();
    sq / (2.0 * batch.len().max(1) as f64)
}

fn evaluate(spec: &NetworkSpec, params: &ParamVector, train: &Batch, val: &Batch) -> Result<Evaluation, FedError> {
    let train_probs = forward(spec, params, train.inputs.view())?;
    let val_probs = forward(spec, params, val.inputs.view())?;
    let pred: Vec<usize> = val_probs
        .rows()
        .into_iter()
        .map(|r| usize::from(r[1] > r[0]))
        .collect();
    let m = metrics(&pred, &val.labels())?;
    Ok(Evaluation {
        train_loss: mse(&train_probs, train),
        val_loss: mse(&val_probs, val),
        val_accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
    })
}

fn pooled<'a>(batches: impl Iterator<Item = &'a Batch>) -> Result<Batch, FedError> {
    let mut iter = batches;
    let first = iter.next().ok_or(ModelError::EmptyBatch)?.clone();
    iter.try_fold(first, |acc, b| acc.concat(b)).map_err(FedError::from)
}

/// Accuracy of `params` on a batch.
pub fn accuracy(spec: &NetworkSpec, params: &ParamVector, batch: &Batch) -> Result<f64, FedError> {
    let pred = predict(spec, params, batch.inputs.view())?;
    Ok(metrics(&pred, &batch.labels())?.accuracy)
}

/// Shared state of a federation: config, seeds, neighbor graph and the round-tag counter.
#[derive(Debug, Clone)]
pub struct Federation {
    cfg: FedConfig,
    seed: u64,
    n: usize,
    codec: FixedPointCodec,
    graph: Option<NeighborGraph>,
    next_tag: u64,
}

impl Federation {
    /// Validates the config and, for the masked protocol, runs the one-time
    /// pairwise key agreement.
    pub fn new(cfg: FedConfig, n: usize, seed: u64) -> Result<Self, FedError> {
        cfg.validate(n)?;
        let codec = cfg.codec()?;
        let graph = if cfg.protocol == ProtocolKind::Masked {
            let mut rng = protocols::party_rng(seed, 0, usize::MAX, "dh");
            Some(NeighborGraph::build(n, cfg.k, cfg.graph, &cfg.dh_group.group(), &mut rng)?)
        } else {
            None
        };
        Ok(Self {
            cfg,
            seed,
            n,
            codec,
            graph,
            next_tag: 0,
        })
    }

    pub fn config(&self) -> &FedConfig {
        &self.cfg
    }

    pub fn codec(&self) -> FixedPointCodec {
        self.codec
    }

    pub fn graph(&self) -> Option<&NeighborGraph> {
        self.graph.as_ref()
    }

    fn check_parties(&self, parties: &[Party], net: &SimNet) -> Result<(), FedError> {
        if parties.len() != self.n || net.parties() != self.n {
            return Err(FedError::InvalidConfig(format!(
                "federation built for {} parties, got {} parties on a {}-party network",
                self.n,
                parties.len(),
                net.parties()
            )));
        }
        if let Some(p) = parties.iter().find(|p| p.train.is_empty()) {
            log::error!("party {} has no training samples", p.id);
            return Err(ModelError::EmptyBatch.into());
        }
        Ok(())
    }

    /// One secure aggregation; aborted rounds are retried under a fresh tag.
    fn aggregate(&mut self, secrets: &[RingVector], net: &mut SimNet) -> Result<(AggregationResult, u64), FedError> {
        let pc = self.cfg.protocol_config();
        let mut attempt = 0;
        loop {
            let tag = self.next_tag;
            self.next_tag += 1;
            match protocols::aggregate(&pc, secrets, self.graph.as_ref(), tag, self.seed, net) {
                Err(ProtocolError::RoundAborted { round, reason }) if attempt < self.cfg.retries => {
                    log::warn!("aggregation round {round} aborted ({reason}); retrying with a fresh tag");
                    attempt += 1;
                }
                r => return Ok((r?, tag)),
            }
        }
    }

    fn broadcast(&self, tag: u64, values: RingVector, net: &mut SimNet) -> Result<Transcript, FedError> {
        let mut b = Broadcast {
            tag: RoundTag::new(tag, Phase::Broadcast),
            mediator: net.mediator(),
            parties: self.n,
            payload: Some(values),
        };
        Ok(net.run_until_idle(&mut b)?)
    }

    fn finish_round(
        &self,
        round: usize,
        mut t: Transcript,
        broadcast: Transcript,
        eval: Evaluation,
        log: &mut Transcript,
    ) -> RoundRecord {
        t.extend(broadcast);
        let rec = RoundRecord {
            round,
            global_loss: eval.train_loss,
            val_loss: eval.val_loss,
            val_accuracy: eval.val_accuracy,
            precision: eval.precision,
            recall: eval.recall,
            f1: eval.f1,
            messages: t.total_sent(),
            bytes: t.total_bytes(),
            latency_ms: t.critical_path_latency,
        };
        if !self.cfg.keep_transcript {
            t.messages.clear();
        }
        log.extend(t);
        rec
    }

    /// Full-network training: each round the parties' unnormalized gradients
    /// are summed securely, divided by the total sample count and applied by
    /// the mediator's optimizer; the new parameters are broadcast.
    pub fn run_init_phase(
        &mut self,
        parties: &[Party],
        spec: &NetworkSpec,
        init: &ParamVector,
        net: &mut SimNet,
    ) -> Result<PhaseOutcome, FedError> {
        self.check_parties(parties, net)?;
        init.check_spec(spec)?;
        let exec = self.cfg.execution;
        let bs = self.cfg.batch_size;
        let mut cursors: Vec<Cursor> = parties.iter().map(|p| Cursor::new(p.m(), self.seed, p.id)).collect();
        let pooled_train = pooled(parties.iter().map(|p| &p.train))?;
        let pooled_val = pooled(parties.iter().map(|p| &p.val))?;
        let mut params = init.clone();
        let mut opt = Optimizer::new(self.cfg.optimizer, self.cfg.alpha);
        let mut log = Transcript::default();
        let mut history = Vec::with_capacity(self.cfg.rounds);
        let mut gradients = Vec::with_capacity(self.cfg.rounds);
        for round in 1..=self.cfg.rounds {
            let batches: Vec<Batch> = parties
                .iter()
                .zip(&mut cursors)
                .map(|(p, c)| p.train.select(&c.next(bs)))
                .collect();
            let m_total: usize = batches.iter().map(Batch::len).sum();
            let codec = self.codec;
            let secrets = exec
                .map(parties.len(), |j| {
                    grad(spec, &params, &batches[j], GradScale::Sum).map(|g| codec.quantize_slice(g.values()))
                })
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            let (agg, tag) = self.aggregate(&secrets, net)?;
            let g: Vec<f64> = codec.dequantize_vec(&agg.sum).into_iter().map(|v| v / m_total as f64).collect();
            opt.step(params.values_mut(), &g)?;
            gradients.push(g);
            let bt = self.broadcast(tag, codec.quantize_slice(params.values()), net)?;
            let eval = evaluate(spec, &params, &pooled_train, &pooled_val)?;
            history.push(self.finish_round(round, agg.transcript, bt, eval, &mut log));
        }
        Ok(PhaseOutcome {
            params,
            history,
            transcript: log,
            global_gradients: gradients,
        })
    }

    /// Head-only training over the frozen base in `init`: each party runs
    /// `local_updates` optimizer steps from the current global head, the
    /// locally updated heads are averaged securely and broadcast.
    pub fn run_edge_phase(
        &mut self,
        parties: &[Party],
        spec: &NetworkSpec,
        init: &ParamVector,
        net: &mut SimNet,
    ) -> Result<PhaseOutcome, FedError> {
        self.check_parties(parties, net)?;
        init.check_spec(spec)?;
        let exec = self.cfg.execution;
        let head_spec = spec.head_spec();
        let features = |b: &Batch| -> Result<Batch, FedError> {
            Ok(b.with_inputs(crate::model::base_features(spec, init, b.inputs.view())?)?)
        };
        let train_feats = parties.iter().map(|p| features(&p.train)).collect::<Result<Vec<_>, _>>()?;
        let pooled_train = pooled(train_feats.iter())?;
        let pooled_val = features(&pooled(parties.iter().map(|p| &p.val))?)?;
        let m_total: usize = parties.iter().map(Party::m).sum();
        let weights: Vec<f64> = parties
            .iter()
            .map(|p| {
                if self.cfg.weighted_mean {
                    p.m() as f64 / m_total as f64
                } else {
                    1.0
                }
            })
            .collect();
        let divisor = if self.cfg.weighted_mean { 1.0 } else { parties.len() as f64 };

        #[derive(Clone)]
        struct Local {
            opt: Optimizer,
            cursor: Cursor,
            head: ParamVector,
        }
        let mut global = ParamVector::from_values(&head_spec, init.head().to_vec())?;
        let mut locals: Vec<Local> = parties
            .iter()
            .map(|p| Local {
                opt: Optimizer::new(self.cfg.optimizer, self.cfg.alpha),
                cursor: Cursor::new(p.m(), self.seed, p.id),
                head: global.clone(),
            })
            .collect();
        let mut log = Transcript::default();
        let mut history = Vec::with_capacity(self.cfg.rounds);
        let (e_steps, bs) = (self.cfg.local_updates, self.cfg.batch_size);
        for round in 1..=self.cfg.rounds {
            let start = &global;
            locals = exec
                .map(parties.len(), |j| -> Result<Local, ModelError> {
                    let mut st = locals[j].clone();
                    st.head = start.clone();
                    for _ in 0..e_steps {
                        let batch = train_feats[j].select(&st.cursor.next(bs));
                        let g = grad(&head_spec, &st.head, &batch, GradScale::Mean)?;
                        st.opt.step(st.head.values_mut(), g.values())?;
                    }
                    Ok(st)
                })
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            let codec = self.codec;
            let secrets: Vec<RingVector> = locals
                .iter()
                .zip(&weights)
                .map(|(st, w)| {
                    let scaled: Vec<f64> = st.head.values().iter().map(|v| v * w).collect();
                    codec.quantize_slice(&scaled)
                })
                .collect();
            let (agg, tag) = self.aggregate(&secrets, net)?;
            let avg: Vec<f64> = codec.dequantize_vec(&agg.sum).into_iter().map(|v| v / divisor).collect();
            global = ParamVector::from_values(&head_spec, avg)?;
            let bt = self.broadcast(tag, codec.quantize_slice(global.values()), net)?;
            let eval = evaluate(&head_spec, &global, &pooled_train, &pooled_val)?;
            history.push(self.finish_round(round, agg.transcript, bt, eval, &mut log));
        }
        let mut params = init.clone();
        params.set_head(global.values())?;
        debug_assert_eq!(base_digest(&params), base_digest(init));
        Ok(PhaseOutcome {
            params,
            history,
            transcript: log,
            global_gradients: Vec::new(),
        })
    }
}

pub fn run_init_phase(
    parties: &[Party],
    spec: &NetworkSpec,
    init: &ParamVector,
    cfg: &FedConfig,
    seed: u64,
    net: &mut SimNet,
) -> Result<PhaseOutcome, FedError> {
    Federation::new(cfg.clone(), parties.len(), seed)?.run_init_phase(parties, spec, init, net)
}

pub fn run_edge_phase(
    parties: &[Party],
    spec: &NetworkSpec,
    base: &ParamVector,
    cfg: &FedConfig,
    seed: u64,
    net: &mut SimNet,
) -> Result<PhaseOutcome, FedError> {
    Federation::new(cfg.clone(), parties.len(), seed)?.run_edge_phase(parties, spec, base, net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::GeneratorConfig;
    use crate::exec::Execution;
    use crate::federation::synthetic_parties;
    use crate::model::OptimizerKind;
    use crate::simnet::LatencyMatrix;

    fn setup(n: usize, seed: u64) -> (Vec<Party>, NetworkSpec, ParamVector) {
        let parties = synthetic_parties(n, &GeneratorConfig::new(40, 8, seed, 0.2, 0), 0, Execution::default()).unwrap();
        let spec = NetworkSpec::new(vec![8, 6, 4, 2], 2).unwrap();
        let init = ParamVector::glorot(&spec, &mut ChaCha8Rng::seed_from_u64(seed));
        (parties, spec, init)
    }

    fn cfg(kind: ProtocolKind) -> FedConfig {
        FedConfig {
            rounds: 5,
            batch_size: 0,
            optimizer: OptimizerKind::Sgd,
            alpha: 0.5,
            protocol: kind,
            dh_group: super::super::DhGroupName::Modp768,
            ..FedConfig::default()
        }
    }

    #[test]
    fn init_phase_matches_pooled_centralized_descent() {
        let (parties, spec, init) = setup(3, 1);
        let mut net = SimNet::new(LatencyMatrix::uniform(3, 1.0));
        let out = run_init_phase(&parties, &spec, &init, &cfg(ProtocolKind::Masked), 9, &mut net).unwrap();
        let pooled = pooled(parties.iter().map(|p| &p.train)).unwrap();
        let mut central = init.clone();
        let tol = 2f64.powi(1 - 20) * spec.param_count() as f64;
        for g_fed in &out.global_gradients {
            let g = grad(&spec, &central, &pooled, GradScale::Mean).unwrap();
            let err = g.values().iter().zip(g_fed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= tol, "{err}");
            crate::model::sgd_update(central.values_mut(), g.values(), 0.5).unwrap();
        }
        let diff = central.values().iter().zip(out.params.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-3, "{diff}");
        assert_eq!(out.history.len(), 5);
        // Three submissions plus three broadcasts per round.
        assert!(out.history.iter().all(|r| r.messages == 6));
    }

    #[test]
    fn protocols_give_the_same_trajectory() {
        let (parties, spec, init) = setup(3, 2);
        let m = LatencyMatrix::uniform(3, 2.0);
        let run = |kind| {
            let c = FedConfig { k: 2, ..cfg(kind) };
            run_init_phase(&parties, &spec, &init, &c, 4, &mut SimNet::new(m.clone())).unwrap().params
        };
        let base = run(ProtocolKind::Nosmc);
        for kind in [ProtocolKind::Masked, ProtocolKind::Stsmc, ProtocolKind::Shamir] {
            assert_eq!(run(kind), base, "{kind}");
        }
    }

    #[test]
    fn edge_phase_freezes_the_base_and_averages_identical_steps() {
        let (mut parties, spec, init) = setup(3, 3);
        for j in 1..3 {
            parties[j].train = parties[0].train.clone();
        }
        let c = FedConfig { rounds: 1, ..cfg(ProtocolKind::Masked) };
        let mut net = SimNet::new(LatencyMatrix::uniform(3, 1.0));
        let out = run_edge_phase(&parties, &spec, &init, &c, 5, &mut net).unwrap();
        assert_eq!(base_digest(&out.params), base_digest(&init));
        assert_eq!(out.params.base(), init.base());

        let head_spec = spec.head_spec();
        let feats = parties[0]
            .train
            .with_inputs(crate::model::base_features(&spec, &init, parties[0].train.inputs.view()).unwrap())
            .unwrap();
        let head = ParamVector::from_values(&head_spec, init.head().to_vec()).unwrap();
        let g = grad(&head_spec, &head, &feats, GradScale::Mean).unwrap();
        let local = crate::model::sgd_step(&head, g.values(), 0.5).unwrap();
        let err = local.values().iter().zip(out.params.head()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 2f64.powi(-20), "{err}");
    }

    #[test]
    fn edge_phase_is_deterministic_under_either_execution() {
        let (parties, spec, init) = setup(4, 6);
        let run = |execution| {
            let c = FedConfig {
                execution,
                local_updates: 3,
                batch_size: 8,
                optimizer: OptimizerKind::Adam,
                alpha: 1e-2,
                ..cfg(ProtocolKind::Masked)
            };
            run_edge_phase(&parties, &spec, &init, &c, 1, &mut SimNet::new(LatencyMatrix::uniform(4, 1.0))).unwrap()
        };
        let a = run(Execution::Sequential);
        let b = run(Execution::default());
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn failed_party_surfaces_round_aborted() {
        let (parties, spec, init) = setup(3, 7);
        let mut net = SimNet::new(LatencyMatrix::uniform(3, 1.0));
        net.fail_node(NodeId(1));
        let err = run_init_phase(&parties, &spec, &init, &cfg(ProtocolKind::Masked), 0, &mut net).unwrap_err();
        assert!(err.is_round_aborted());
    }
}
