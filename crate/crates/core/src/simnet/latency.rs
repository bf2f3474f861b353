use serde::{Deserialize, Serialize};

use super::{NodeId, SimError};

/// Per-link one-way latency in milliseconds, indexed `[from][to]`.
///
/// Nodes `0..n` are data holders and the last index is the mediator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct LatencyMatrix {
    nodes: usize,
    ms: Vec<f64>,
}

impl LatencyMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, SimError> {
        let nodes = rows.len();
        if nodes < 2 {
            return Err(SimError::BadLatency("need at least one party and the mediator".into()));
        }
        let mut ms = Vec::with_capacity(nodes * nodes);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != nodes {
                return Err(SimError::BadLatency(format!("row {i} has {} entries, expected {nodes}", row.len())));
            }
            for (j, v) in row.into_iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(SimError::BadLatency(format!("entry [{i}][{j}] = {v} is not a finite nonnegative value")));
                }
                if i == j && v != 0.0 {
                    return Err(SimError::BadLatency(format!("diagonal entry [{i}][{i}] must be zero")));
                }
                ms.push(v);
            }
        }
        Ok(Self { nodes, ms })
    }

    /// Every off-diagonal link has latency `c`.
    pub fn uniform(parties: usize, c: f64) -> Self {
        let nodes = parties + 1;
        let ms = (0..nodes * nodes)
            .map(|idx| if idx / nodes == idx % nodes { 0.0 } else { c })
            .collect();
        Self { nodes, ms }
    }

    /// Independent uniform latencies in `[lo, hi)`; asymmetric.
    pub fn random<R: rand::Rng + ?Sized>(parties: usize, lo: f64, hi: f64, rng: &mut R) -> Self {
        let nodes = parties + 1;
        let ms = (0..nodes * nodes)
            .map(|idx| if idx / nodes == idx % nodes { 0.0 } else { rng.gen_range(lo..hi) })
            .collect();
        Self { nodes, ms }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::BadLatency(e.to_string()))
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn parties(&self) -> usize {
        self.nodes - 1
    }

    pub fn mediator(&self) -> NodeId {
        NodeId(self.nodes - 1)
    }

    pub fn get(&self, from: NodeId, to: NodeId) -> f64 {
        self.ms[from.0 * self.nodes + to.0]
    }

    /// Convenience for party-to-party lookups by index.
    pub fn between(&self, from: usize, to: usize) -> f64 {
        self.ms[from * self.nodes + to]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.ms.chunks(self.nodes).map(<[f64]>::to_vec).collect()
    }

    /// Named geographic presets.
    ///
    /// The mediator sits in Sweden in all three; data holders are placed as
    /// `scenario1` = EN, FR, DE; `scenario2` adds CA, IN; `scenario3` has ten
    /// sites across four continents. Latencies are synthetic: 5 ms plus 1 ms
    /// per 100 km of great-circle distance, symmetric.
    pub fn preset(name: &str) -> Result<Self, SimError> {
        let sites: &[&str] = match name {
            "scenario1" => &["EN", "FR", "DE"],
            "scenario2" => &["EN", "FR", "DE", "CA", "IN"],
            "scenario3" => &["CA", "US", "EN", "FR", "DE", "IN", "SG", "KR", "JP", "AU"],
            other => return Err(SimError::UnknownPreset(other.to_string())),
        };
        let mut coords: Vec<(f64, f64)> = sites.iter().map(|s| site_coords(s)).collect();
        coords.push(site_coords("SE"));
        let rows = coords
            .iter()
            .map(|&a| coords.iter().map(|&b| if a == b { 0.0 } else { 5.0 + haversine_km(a, b) / 100.0 }).collect())
            .collect();
        Self::new(rows)
    }
}

impl TryFrom<Vec<Vec<f64>>> for LatencyMatrix {
    type Error = SimError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, SimError> {
        Self::new(rows)
    }
}

impl From<LatencyMatrix> for Vec<Vec<f64>> {
    fn from(m: LatencyMatrix) -> Self {
        m.rows()
    }
}

fn site_coords(code: &str) -> (f64, f64) {
    match code {
        "SE" => (59.33, 18.07),
        "EN" => (51.51, -0.13),
        "FR" => (48.86, 2.35),
        "DE" => (50.11, 8.68),
        "CA" => (45.50, -73.57),
        "US" => (39.04, -77.49),
        "IN" => (19.08, 72.88),
        "SG" => (1.35, 103.82),
        "KR" => (37.57, 126.98),
        "JP" => (35.68, 139.69),
        "AU" => (-33.87, 151.21),
        _ => unreachable!("unknown site {code}"),
    }
}

fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (la1, lo1) = (a.0.to_radians(), a.1.to_radians());
    let (la2, lo2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((la2 - la1) / 2.0).sin().powi(2) + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * 6371.0 * h.sqrt().asin()
}
