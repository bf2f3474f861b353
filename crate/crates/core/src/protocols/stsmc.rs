use rand::Rng;

use super::{check_secrets, party_rng, AggregationResult, ProtocolError};
use crate::numerics::RingVector;
use crate::simnet::{Handler, Message, NodeId, Outbox, Payload, Phase, RoundTag, SimNet};

/// Each party's private ring mask for one STSMC round, drawn from its own RNG.
pub fn stsmc_masks(rng_seed: u64, round: u64, n: usize, len: usize) -> Vec<RingVector> {
    (0..n)
        .map(|j| {
            let mut rng = party_rng(rng_seed, round, j, "stsmc");
            RingVector((0..len).map(|_| rng.gen()).collect())
        })
        .collect()
}

/// Two passes around the ring `0 -> 1 -> .. -> n-1 -> 0`. Pass one
/// accumulates `secret_j + r_j`, pass two strips every `r_j`.
struct Ring<'a> {
    round: u64,
    secrets: &'a [RingVector],
    masks: Vec<RingVector>,
    mediator: NodeId,
    deliver: bool,
    started: bool,
    result: Option<RingVector>,
    delivered: bool,
}

impl Ring<'_> {
    fn n(&self) -> usize {
        self.secrets.len()
    }

    fn forward(&self, from: usize, phase: Phase, v: RingVector, out: &mut Outbox) {
        out.send(Message::new(
            NodeId(from),
            NodeId((from + 1) % self.n()),
            RoundTag::new(self.round, phase),
            Payload::Ring(v),
        ));
    }
}

impl Handler for Ring<'_> {
    fn on_deliver(&mut self, _now: f64, msg: &Message, out: &mut Outbox) {
        let Some(v) = msg.payload.as_ring() else { return };
        let j = msg.receiver.0;
        if msg.receiver == self.mediator {
            self.delivered = true;
            return;
        }
        match (msg.round_tag.phase, j) {
            (Phase::RingPass1, 0) => self.forward(0, Phase::RingPass2, v - &self.masks[0], out),
            (Phase::RingPass1, _) => {
                let mut next = v + &self.secrets[j];
                next += &self.masks[j];
                self.forward(j, Phase::RingPass1, next, out);
            }
            (Phase::RingPass2, 0) => {
                self.result = Some(v.clone());
                if self.deliver {
                    out.send(Message::new(
                        NodeId(0),
                        self.mediator,
                        RoundTag::new(self.round, Phase::ResultDelivery),
                        Payload::Ring(v.clone()),
                    ));
                }
            }
            (Phase::RingPass2, _) => self.forward(j, Phase::RingPass2, v - &self.masks[j], out),
            _ => {}
        }
    }

    fn on_idle(&mut self, _now: f64, out: &mut Outbox) {
        if !self.started {
            self.started = true;
            self.forward(0, Phase::RingPass1, &self.secrets[0] + &self.masks[0], out);
        }
    }
}

/// Ring-topology two-pass masked aggregation. When `deliver_to_mediator` is
/// set, party 0 forwards the final sum to the mediator as a third hop.
pub fn stsmc_round(
    secrets: &[RingVector],
    rng_seed: u64,
    round: u64,
    deliver_to_mediator: bool,
    net: &mut SimNet,
) -> Result<AggregationResult, ProtocolError> {
    let len = check_secrets(secrets, net)?;
    let n = secrets.len();
    if n < 2 {
        return Err(ProtocolError::TooFewParties(n));
    }
    let mut ring = Ring {
        round,
        secrets,
        masks: stsmc_masks(rng_seed, round, n, len),
        mediator: net.mediator(),
        deliver: deliver_to_mediator,
        started: false,
        result: None,
        delivered: false,
    };
    let transcript = net.run_until_idle(&mut ring)?;
    match ring.result {
        Some(sum) if ring.delivered || !deliver_to_mediator => Ok(AggregationResult { sum, transcript }),
        _ => Err(ProtocolError::RoundAborted {
            round,
            reason: "ring pass did not complete".into(),
        }),
    }
}
