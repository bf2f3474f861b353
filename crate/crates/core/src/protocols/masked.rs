use super::{check_secrets, AggregationResult, NeighborGraph, ProtocolError};
use crate::exec::Execution;
use crate::numerics::{mask_stream, RingVector};
use crate::simnet::{Handler, Message, NodeId, Outbox, Payload, Phase, RoundTag, SimNet};

/// `Σ_{i∈S_j} sign(j,i) · mask_stream(seed_ji, round, len)`; the lower id of
/// each pair adds the stream and the higher id subtracts it.
pub fn party_mask(graph: &NeighborGraph, j: usize, round: u64, len: usize) -> RingVector {
    let mut mask = RingVector::zeros(len);
    for i in graph.neighbors(j) {
        let seed = graph.seed(i, j).expect("every edge carries a seed");
        mask.add_signed(&mask_stream(seed, round, len), j > i);
    }
    mask
}

/// What party `j` sends to the mediator in a masked round.
pub fn masked_payload(secret: &RingVector, graph: &NeighborGraph, j: usize, round: u64) -> RingVector {
    secret + &party_mask(graph, j, round, secret.len())
}

/// One-shot star: every party sends a precomputed payload to the mediator.
struct Star {
    round: u64,
    payloads: Vec<Option<RingVector>>,
    mediator: NodeId,
    acc: RingVector,
    received: usize,
}

impl Handler for Star {
    fn on_deliver(&mut self, _now: f64, msg: &Message, _out: &mut Outbox) {
        if msg.receiver == self.mediator {
            if let Some(v) = msg.payload.as_ring() {
                self.acc += v;
                self.received += 1;
            }
        }
    }

    fn on_idle(&mut self, _now: f64, out: &mut Outbox) {
        for (j, p) in self.payloads.iter_mut().enumerate() {
            if let Some(p) = p.take() {
                out.send(Message::new(
                    NodeId(j),
                    self.mediator,
                    RoundTag::new(self.round, Phase::Submit),
                    Payload::Ring(p),
                ));
            }
        }
    }
}

fn run_star(payloads: Vec<RingVector>, len: usize, round: u64, net: &mut SimNet) -> Result<AggregationResult, ProtocolError> {
    let n = payloads.len();
    let mut star = Star {
        round,
        payloads: payloads.into_iter().map(Some).collect(),
        mediator: net.mediator(),
        acc: RingVector::zeros(len),
        received: 0,
    };
    let transcript = net.run_until_idle(&mut star)?;
    if star.received != n {
        return Err(ProtocolError::RoundAborted {
            round,
            reason: format!("mediator received {} of {n} submissions", star.received),
        });
    }
    Ok(AggregationResult {
        sum: star.acc,
        transcript,
    })
}

/// Baseline without protection: raw secrets go straight to the mediator.
pub fn nosmc_round(secrets: &[RingVector], round: u64, net: &mut SimNet) -> Result<AggregationResult, ProtocolError> {
    let len = check_secrets(secrets, net)?;
    run_star(secrets.to_vec(), len, round, net)
}

/// Pairwise-masked submission to the mediator; masks cancel in the sum.
pub fn masked_round(
    secrets: &[RingVector],
    graph: &NeighborGraph,
    round: u64,
    net: &mut SimNet,
) -> Result<AggregationResult, ProtocolError> {
    let len = check_secrets(secrets, net)?;
    if graph.parties() != secrets.len() {
        return Err(ProtocolError::Shape(format!(
            "graph covers {} parties, {} secrets given",
            graph.parties(),
            secrets.len()
        )));
    }
    let payloads = Execution::default().map(secrets.len(), |j| masked_payload(&secrets[j], graph, j, round));
    run_star(payloads, len, round, net)
}
