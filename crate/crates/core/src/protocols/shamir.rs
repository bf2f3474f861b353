use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{check_secrets, party_rng, AggregationResult, ProtocolError};
use crate::exec::Execution;
use crate::numerics::{FieldElement, NumericsError, RingVector, FIELD_MODULUS};
use crate::simnet::{Handler, Message, NodeId, Outbox, Payload, Phase, RoundTag, SimNet};

/// Who collects the `k` aggregate shares in the second Shamir round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShamirFinish {
    /// Parties `1..k` send to party 0, which already holds its own share.
    #[default]
    Combiner,
    /// Parties `0..k` send to the mediator.
    Mediator,
}

fn random_field<R: RngCore>(rng: &mut R) -> FieldElement {
    FieldElement::new(rng.gen_range(0..FIELD_MODULUS))
}

/// Splits every element of `secret` into `n` shares of a random degree-`k-1`
/// polynomial; `shares[i][e]` is the evaluation at `x = i + 1`.
pub fn share_vector<R: RngCore>(
    secret: &RingVector,
    k: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<FieldElement>>, NumericsError> {
    let mut shares = vec![Vec::with_capacity(secret.len()); n];
    let mut coeffs = vec![FieldElement::ZERO; k];
    for &v in secret.iter() {
        coeffs[0] = FieldElement::embed(v)?;
        for c in coeffs.iter_mut().skip(1) {
            *c = random_field(rng);
        }
        for (i, s) in shares.iter_mut().enumerate() {
            s.push(FieldElement::eval_poly(&coeffs, FieldElement::new(i as u64 + 1)));
        }
    }
    Ok(shares)
}

/// Lagrange basis values at zero for distinct nonzero points `xs`.
fn lagrange_at_zero(xs: &[FieldElement]) -> Result<Vec<FieldElement>, NumericsError> {
    xs.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let (num, den) = xs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .fold((FieldElement::ONE, FieldElement::ONE), |(n, d), (_, &xj)| (n * xj, d * (xj - xi)));
            Ok(num * den.inv()?)
        })
        .collect()
}

/// Reconstructs the vector whose shares at `x` are `points`.
pub(crate) fn reconstruct(points: &[(u64, &[FieldElement])]) -> Result<Vec<FieldElement>, NumericsError> {
    let xs: Vec<_> = points.iter().map(|&(x, _)| FieldElement::new(x)).collect();
    let lambdas = lagrange_at_zero(&xs)?;
    let len = points.first().map_or(0, |(_, v)| v.len());
    Ok((0..len)
        .map(|e| {
            points
                .iter()
                .zip(&lambdas)
                .fold(FieldElement::ZERO, |acc, ((_, v), &l)| acc + l * v[e])
        })
        .collect())
}

struct Sharing {
    round: u64,
    n: usize,
    k: usize,
    finish: ShamirFinish,
    deliver: bool,
    mediator: NodeId,
    /// `outgoing[j][i]`: share of party `j`'s secret destined for party `i`.
    outgoing: Vec<Vec<Vec<FieldElement>>>,
    /// Running point-wise sum of shares held by each party.
    aggregate: Vec<Vec<FieldElement>>,
    share_counts: Vec<usize>,
    collected: Vec<(u64, Vec<FieldElement>)>,
    stage: u8,
    result: Option<Vec<FieldElement>>,
    delivered: bool,
    error: Option<ProtocolError>,
}

impl Sharing {
    fn collector(&self) -> NodeId {
        match self.finish {
            ShamirFinish::Combiner => NodeId(0),
            ShamirFinish::Mediator => self.mediator,
        }
    }

    fn senders(&self) -> std::ops::Range<usize> {
        match self.finish {
            ShamirFinish::Combiner => 1..self.k,
            ShamirFinish::Mediator => 0..self.k,
        }
    }
}

impl Handler for Sharing {
    fn on_deliver(&mut self, _now: f64, msg: &Message, _out: &mut Outbox) {
        let Some(v) = msg.payload.as_field() else {
            if msg.receiver == self.mediator {
                self.delivered = true;
            }
            return;
        };
        match msg.round_tag.phase {
            Phase::ShareDistribution => {
                let i = msg.receiver.0;
                for (a, &s) in self.aggregate[i].iter_mut().zip(v) {
                    *a += s;
                }
                self.share_counts[i] += 1;
            }
            Phase::ShareAggregate if msg.receiver == self.collector() => {
                self.collected.push((msg.sender.0 as u64 + 1, v.to_vec()));
            }
            _ => {}
        }
    }

    fn on_idle(&mut self, _now: f64, out: &mut Outbox) {
        let tag = |phase| RoundTag::new(self.round, phase);
        match self.stage {
            0 => {
                for (j, row) in self.outgoing.iter_mut().enumerate() {
                    for (i, share) in row.iter_mut().enumerate() {
                        if i != j {
                            out.send(Message::new(
                                NodeId(j),
                                NodeId(i),
                                tag(Phase::ShareDistribution),
                                Payload::Field(std::mem::take(share)),
                            ));
                        }
                    }
                }
            }
            1 => {
                if self.share_counts.iter().any(|&c| c != self.n - 1) {
                    return;
                }
                for j in self.senders() {
                    out.send(Message::new(
                        NodeId(j),
                        self.collector(),
                        tag(Phase::ShareAggregate),
                        Payload::Field(self.aggregate[j].clone()),
                    ));
                }
            }
            2 => {
                if self.finish == ShamirFinish::Combiner {
                    self.collected.push((1, self.aggregate[0].clone()));
                }
                if self.collected.len() != self.k {
                    return;
                }
                let points: Vec<_> = self.collected.iter().map(|(x, v)| (*x, v.as_slice())).collect();
                match reconstruct(&points) {
                    Ok(sum) => {
                        if self.finish == ShamirFinish::Combiner && self.deliver {
                            out.send(Message::new(
                                NodeId(0),
                                self.mediator,
                                tag(Phase::ResultDelivery),
                                Payload::Ring(RingVector(sum.iter().map(|e| e.unembed_sum(self.n)).collect())),
                            ));
                        }
                        self.result = Some(sum);
                    }
                    Err(e) => self.error = Some(e.into()),
                }
            }
            _ => {}
        }
        self.stage += 1;
    }
}

/// Threshold secret-sharing aggregation. Shares are exchanged all-to-all,
/// summed point-wise, and `k` aggregate shares are interpolated at zero.
pub fn shamir_round(
    secrets: &[RingVector],
    k: usize,
    finish: ShamirFinish,
    deliver_to_mediator: bool,
    rng_seed: u64,
    round: u64,
    net: &mut SimNet,
) -> Result<AggregationResult, ProtocolError> {
    check_secrets(secrets, net)?;
    let n = secrets.len();
    if k < 2 || k > n {
        return Err(ProtocolError::BadThreshold { k, n });
    }
    let outgoing = Execution::default()
        .map(n, |j| share_vector(&secrets[j], k, n, &mut party_rng(rng_seed, round, j, "shamir")))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let aggregate = (0..n).map(|i| outgoing[i][i].clone()).collect();
    let mut state = Sharing {
        round,
        n,
        k,
        finish,
        deliver: deliver_to_mediator && finish == ShamirFinish::Combiner,
        mediator: net.mediator(),
        outgoing,
        aggregate,
        share_counts: vec![0; n],
        collected: Vec::new(),
        stage: 0,
        result: None,
        delivered: false,
        error: None,
    };
    let transcript = net.run_until_idle(&mut state)?;
    if let Some(e) = state.error {
        return Err(e);
    }
    match state.result {
        Some(sum) if state.delivered || !state.deliver => Ok(AggregationResult {
            sum: RingVector(sum.into_iter().map(|e| e.unembed_sum(n)).collect()),
            transcript,
        }),
        _ => Err(ProtocolError::RoundAborted {
            round,
            reason: "share exchange did not complete".into(),
        }),
    }
}
