//! Conformance of simulated transcripts with the analytic complexity table.

use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use super::AnalysisError;
use crate::exec::Execution;
use crate::numerics::RingVector;
use crate::protocols::{self, GraphConstruction, NeighborGraph, ProtocolConfig, ProtocolKind, ShamirFinish};
use crate::simnet::{latency_report, LatencyMatrix, SimNet, Transcript, DIVERGENCE_TOLERANCE_MS};

/// One party count and the latency matrices to time it on.
#[derive(Debug, Clone, PartialEq)]
pub struct Table4Case {
    pub n: usize,
    pub latencies: Vec<LatencyMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table4Row {
    pub protocol: ProtocolKind,
    pub n: usize,
    /// Neighbor count or threshold actually used.
    pub k: usize,
    pub holder_sent: Vec<usize>,
    pub holder_received: Vec<usize>,
    pub mediator_received: usize,
    pub total_events: usize,
    pub expected_total_events: usize,
    pub counts_ok: bool,
    /// Measured critical path on the first matrix.
    pub latency_ms: f64,
    pub closed_form_ms: f64,
    pub matrices: usize,
    pub max_divergence_ms: f64,
    pub latency_ok: bool,
    pub min_colluders: String,
}

impl Table4Row {
    pub fn pass(&self) -> bool {
        self.counts_ok && self.latency_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table4Report {
    pub rows: Vec<Table4Row>,
    pub pass: bool,
}

/// Largest feasible neighbor count not above `k`.
pub fn masked_k(n: usize, k: usize) -> usize {
    let mut k = k.min(n.saturating_sub(1));
    if n * k % 2 == 1 {
        k -= 1;
    }
    k
}

/// Shamir threshold clamped into `2..=n`.
pub fn shamir_k(n: usize, k: usize) -> usize {
    k.clamp(2, n.max(2))
}

fn min_colluders(kind: ProtocolKind, k: usize) -> String {
    match kind {
        ProtocolKind::Nosmc => "1 (mediator)".into(),
        ProtocolKind::Stsmc => "2 (ring neighbors)".into(),
        ProtocolKind::Shamir => format!("{k} (share holders)"),
        ProtocolKind::Masked => format!("{k} neighbors + mediator"),
    }
}

struct Setup {
    cfg: ProtocolConfig,
    graph: Option<NeighborGraph>,
}

fn setup(kind: ProtocolKind, n: usize, k: usize, finish: ShamirFinish, seed: u64) -> Result<Setup, AnalysisError> {
    let (k, graph) = match kind {
        ProtocolKind::Masked => {
            let k = masked_k(n, k);
            let mut rng = protocols::party_rng(seed, 0, usize::MAX, "table4-graph");
            (k, Some(NeighborGraph::with_random_seeds(n, k, GraphConstruction::Circulant, &mut rng)?))
        }
        ProtocolKind::Shamir => (shamir_k(n, k), None),
        _ => (k, None),
    };
    let mut cfg = ProtocolConfig::new(kind).with_threshold(k);
    cfg.shamir_finish = finish;
    Ok(Setup { cfg, graph })
}

fn run_round(s: &Setup, n: usize, dim: usize, latency: &LatencyMatrix, seed: u64, round: u64) -> Result<Transcript, AnalysisError> {
    let mut rng = protocols::party_rng(seed, round, n, "table4-secrets");
    let secrets: Vec<RingVector> = (0..n)
        .map(|_| RingVector((0..dim).map(|_| rng.gen::<i32>() as i64 as u64).collect()))
        .collect();
    let mut net = SimNet::new(latency.clone());
    let res = protocols::aggregate(&s.cfg, &secrets, s.graph.as_ref(), round, seed, &mut net)?;
    if res.sum != protocols::ring_sum_oracle(&secrets) {
        return Err(AnalysisError::InvalidScenario(format!("{} returned a wrong sum", s.cfg.kind)));
    }
    Ok(res.transcript)
}

/// Runs every protocol on every case and checks message counts against the
/// analytic formulas and critical paths against the closed forms.
///
/// Counts use each protocol's default configuration. Shamir latency is timed
/// with every party sending its aggregate share to the mediator (threshold
/// `n`), the pattern the latency closed form describes.
pub fn verify_table4(
    cases: &[Table4Case],
    k: usize,
    dim: usize,
    seed: u64,
    exec: Execution,
) -> Result<Table4Report, AnalysisError> {
    let mut rows = Vec::new();
    for case in cases {
        let n = case.n;
        let first = case
            .latencies
            .first()
            .ok_or_else(|| AnalysisError::InvalidScenario(format!("no latency matrix for n = {n}")))?;
        for kind in ProtocolKind::ALL {
            let counted = setup(kind, n, k, ShamirFinish::Combiner, seed)?;
            let t = run_round(&counted, n, dim, first, seed, 0)?;
            let expected = counted.cfg.expected_counts(n);
            let actual: Vec<(usize, usize)> = t.counters.iter().map(|c| (c.sent, c.received)).collect();
            let mut counts_ok = actual == expected;
            let total = t.total_sent() + t.total_received();
            let k_used = counted.cfg.threshold;
            counts_ok &= match kind {
                ProtocolKind::Stsmc => total == 4 * n,
                ProtocolKind::Shamir => total == 2 * (n * n - n + k_used - 1),
                _ => actual[..n].iter().all(|&(s, r)| s == 1 && r == 0) && actual[n] == (0, n),
            };

            let timed = match kind {
                ProtocolKind::Shamir => setup(kind, n, n, ShamirFinish::Mediator, seed)?,
                _ => counted,
            };
            let model = timed.cfg.latency_model(n);
            let reports = exec
                .map(case.latencies.len(), |i| -> Result<_, AnalysisError> {
                    let m = &case.latencies[i];
                    let t = run_round(&timed, n, dim, m, seed, i as u64 + 1)?;
                    Ok(latency_report(&t, &model, m))
                })
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            let max_div = reports.iter().map(|r| r.divergence_ms).fold(0.0, f64::max);
            rows.push(Table4Row {
                protocol: kind,
                n,
                k: k_used,
                holder_sent: actual[..n].iter().map(|c| c.0).collect(),
                holder_received: actual[..n].iter().map(|c| c.1).collect(),
                mediator_received: actual[n].1,
                total_events: total,
                expected_total_events: counted_expected_total(&expected),
                counts_ok,
                latency_ms: reports[0].measured_ms,
                closed_form_ms: reports[0].closed_form_ms,
                matrices: reports.len(),
                max_divergence_ms: max_div,
                latency_ok: max_div <= DIVERGENCE_TOLERANCE_MS,
                min_colluders: min_colluders(kind, k_used),
            });
        }
    }
    let pass = rows.iter().all(Table4Row::pass);
    Ok(Table4Report { rows, pass })
}

fn counted_expected_total(expected: &[(usize, usize)]) -> usize {
    expected.iter().map(|(s, r)| s + r).sum()
}

fn summarize(v: &[usize]) -> String {
    match (v.iter().min(), v.iter().max()) {
        (Some(a), Some(b)) if a == b => a.to_string(),
        (Some(a), Some(b)) => format!("{a}-{b}"),
        _ => "-".into(),
    }
}

impl Table4Report {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>3} {:>3} {:>6} {:>6} {:>6} {:>7} {:>7} {:>12} {:>12} {:>9}  {:<24} {}",
            "protocol", "n", "k", "h.send", "h.recv", "m.recv", "events", "expect", "latency_ms", "closed_ms", "max_div", "min colluders", "result"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<8} {:>3} {:>3} {:>6} {:>6} {:>6} {:>7} {:>7} {:>12.3} {:>12.3} {:>9.1e}  {:<24} {}",
                r.protocol.name(),
                r.n,
                r.k,
                summarize(&r.holder_sent),
                summarize(&r.holder_received),
                r.mediator_received,
                r.total_events,
                r.expected_total_events,
                r.latency_ms,
                r.closed_form_ms,
                r.max_divergence_ms,
                r.min_colluders,
                if r.pass() { "pass" } else { "FAIL" }
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cases(ns: &[usize], per_n: usize) -> Vec<Table4Case> {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        ns.iter()
            .map(|&n| Table4Case {
                n,
                latencies: (0..per_n).map(|_| LatencyMatrix::random(n, 1.0, 100.0, &mut rng)).collect(),
            })
            .collect()
    }

    #[test]
    fn all_cells_conform() {
        let r = verify_table4(&cases(&[3, 5, 10], 5), 2, 4, 9, Execution::default()).unwrap();
        assert_eq!(r.rows.len(), 12);
        assert!(r.pass, "{}", r.to_text());
        let masked5 = r.rows.iter().find(|r| r.protocol == ProtocolKind::Masked && r.n == 5).unwrap();
        assert_eq!(masked5.holder_sent, vec![1; 5]);
        assert_eq!(masked5.mediator_received, 5);
        let stsmc3 = r.rows.iter().find(|r| r.protocol == ProtocolKind::Stsmc && r.n == 3).unwrap();
        assert_eq!(stsmc3.total_events, 12);
    }

    #[test]
    fn shamir_event_total() {
        let r = verify_table4(&cases(&[4], 1), 3, 2, 1, Execution::default()).unwrap();
        let s = r.rows.iter().find(|r| r.protocol == ProtocolKind::Shamir).unwrap();
        assert_eq!(s.total_events, 28);
        let r = verify_table4(&cases(&[3], 1), 3, 2, 1, Execution::default()).unwrap();
        let s = r.rows.iter().find(|r| r.protocol == ProtocolKind::Shamir).unwrap();
        assert_eq!(s.total_events, 16);
    }

    #[test]
    fn k_clamping() {
        assert_eq!(masked_k(2, 2), 1);
        assert_eq!(masked_k(5, 3), 2);
        assert_eq!(masked_k(10, 3), 3);
        assert_eq!(shamir_k(3, 5), 3);
        assert_eq!(shamir_k(5, 1), 2);
    }

    #[test]
    fn text_table_has_a_row_per_cell() {
        let r = verify_table4(&cases(&[3, 5], 1), 2, 2, 1, Execution::default()).unwrap();
        assert_eq!(r.to_text().lines().count(), 1 + 8);
    }
}
