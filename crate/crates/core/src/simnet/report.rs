use serde::Serialize;

use super::{LatencyMatrix, NodeId, Transcript};

pub const DIVERGENCE_TOLERANCE_MS: f64 = 1e-9;

/// Closed-form completion time of a protocol's message pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum LatencyModel {
    /// Parallel one-shot sends to a sink: `max_i L(P_i, sink)`.
    Star { senders: Vec<usize>, sink: NodeId },
    /// Two sequential passes around the ring `0 -> 1 -> .. -> n-1 -> 0`,
    /// optionally followed by party 0 delivering to the mediator.
    Ring { parties: usize, deliver_to_mediator: bool },
    /// All-pairs exchange among `parties`, a barrier, then parallel sends
    /// from `senders` to `sink`.
    ExchangeThenGather {
        parties: usize,
        senders: Vec<usize>,
        sink: NodeId,
        then_deliver: Option<NodeId>,
    },
}

impl LatencyModel {
    pub fn closed_form(&self, m: &LatencyMatrix) -> f64 {
        let max_to = |senders: &[usize], sink: NodeId| {
            senders
                .iter()
                .map(|&s| m.get(NodeId(s), sink))
                .fold(0.0, f64::max)
        };
        match self {
            LatencyModel::Star { senders, sink } => max_to(senders, *sink),
            LatencyModel::Ring {
                parties,
                deliver_to_mediator,
            } => {
                let n = *parties;
                let ring: f64 = (0..n.saturating_sub(1)).map(|i| m.between(i, i + 1)).sum::<f64>()
                    + if n > 1 { m.between(n - 1, 0) } else { 0.0 };
                let tail = if *deliver_to_mediator {
                    m.get(NodeId(0), m.mediator())
                } else {
                    0.0
                };
                2.0 * ring + tail
            }
            LatencyModel::ExchangeThenGather {
                parties,
                senders,
                sink,
                then_deliver,
            } => {
                let n = *parties;
                let pairwise = (0..n)
                    .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                    .map(|(i, j)| m.between(i, j))
                    .fold(0.0, f64::max);
                let deliver = then_deliver.map_or(0.0, |to| m.get(*sink, to));
                pairwise + max_to(senders, *sink) + deliver
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LatencyReport {
    pub measured_ms: f64,
    pub closed_form_ms: f64,
    pub divergence_ms: f64,
    /// Set when the two disagree by more than [`DIVERGENCE_TOLERANCE_MS`].
    pub diverged: bool,
}

pub fn latency_report(transcript: &Transcript, model: &LatencyModel, m: &LatencyMatrix) -> LatencyReport {
    let closed = model.closed_form(m);
    let measured = transcript.critical_path_latency;
    let divergence = (measured - closed).abs();
    LatencyReport {
        measured_ms: measured,
        closed_form_ms: closed,
        divergence_ms: divergence,
        diverged: divergence > DIVERGENCE_TOLERANCE_MS,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_takes_slowest_link() {
        let m = LatencyMatrix::new(vec![
            vec![0.0, 1.0, 1.0, 10.0],
            vec![1.0, 0.0, 1.0, 20.0],
            vec![1.0, 1.0, 0.0, 15.0],
            vec![1.0, 1.0, 1.0, 0.0],
        ])
        .unwrap();
        let model = LatencyModel::Star {
            senders: vec![0, 1, 2],
            sink: m.mediator(),
        };
        assert_eq!(model.closed_form(&m), 20.0);
    }

    #[test]
    fn ring_of_unit_links() {
        let m = LatencyMatrix::uniform(4, 1.0);
        let model = LatencyModel::Ring {
            parties: 4,
            deliver_to_mediator: false,
        };
        assert_eq!(model.closed_form(&m), 8.0);
    }

    #[test]
    fn exchange_then_gather_uniform() {
        let c = 3.5;
        let m = LatencyMatrix::uniform(5, c);
        let model = LatencyModel::ExchangeThenGather {
            parties: 5,
            senders: (0..5).collect(),
            sink: m.mediator(),
            then_deliver: None,
        };
        assert_eq!(model.closed_form(&m), 2.0 * c);
    }
}
