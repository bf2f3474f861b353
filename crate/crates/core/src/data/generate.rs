//! Two-class synthetic signal windows reduced to banded spectral power.
//!
//! Class 0 windows are low-frequency sinusoid mixtures in Gaussian noise.
//! Class 1 windows mix higher frequencies and carry amplitude bursts. Each
//! party draws a frequency offset in `[-1, 1]` that is multiplied by the
//! heterogeneity, so at heterogeneity 0 every party samples the same
//! distribution.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};

/// Largest party frequency offset, in cycles per window, at heterogeneity 1.
const MAX_SHIFT: f64 = 12.0;
const NOISE_STD: f64 = 0.6;
const COMPONENTS: usize = 3;
const LOW_BAND: (f64, f64) = (1.5, 10.0);
const HIGH_BAND: (f64, f64) = (7.0, 20.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_samples: usize,
    /// Feature dimension; windows are `4 * dim` samples long.
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub seed: u64,
    #[serde(default)]
    pub heterogeneity: f64,
    #[serde(default)]
    pub party: usize,
    /// Fraction of class-1 samples.
    #[serde(default = "default_ratio")]
    pub positive_ratio: f64,
}

fn default_dim() -> usize {
    32
}

fn default_ratio() -> f64 {
    0.5
}

impl GeneratorConfig {
    pub fn new(n_samples: usize, dim: usize, seed: u64, heterogeneity: f64, party: usize) -> Self {
        Self {
            n_samples,
            dim,
            seed,
            heterogeneity,
            party,
            positive_ratio: default_ratio(),
        }
    }
}

fn party_rng(seed: u64, party: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(party as u64);
    rng
}

/// Frequency offset of `party`'s distribution, in cycles per window.
pub fn party_shift(seed: u64, party: usize, heterogeneity: f64) -> f64 {
    let u: f64 = party_rng(seed, party).gen_range(-1.0..=1.0);
    heterogeneity * u * MAX_SHIFT
}

fn synth_window<R: Rng>(label: usize, len: usize, shift: f64, rng: &mut R) -> Vec<f64> {
    let noise = Normal::new(0.0, NOISE_STD).expect("positive std");
    let (lo, hi) = if label == 1 { HIGH_BAND } else { LOW_BAND };
    let nyquist = len as f64 / 2.0 - 1.0;
    let comps: Vec<(f64, f64, f64)> = (0..COMPONENTS)
        .map(|_| {
            let f = (rng.gen_range(lo..hi) + shift).clamp(0.5, nyquist);
            (f, rng.gen_range(0.5..1.5), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let burst = (label == 1).then(|| (rng.gen_range(0.0..len as f64), len as f64 / 10.0));
    (0..len)
        .map(|t| {
            let t = t as f64;
            let s: f64 = comps
                .iter()
                .map(|&(f, a, ph)| a * (2.0 * PI * f * t / len as f64 + ph).sin())
                .sum();
            let env = burst.map_or(1.0, |(c, w)| 1.0 + 2.0 * (-((t - c) / w).powi(2)).exp());
            s * env + noise.sample(rng)
        })
        .collect()
}

/// Log power in `dim` equal-width bands over the positive-frequency bins,
/// centred per window.
pub fn spectral_features(window: &[f64], dim: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let fft = planner.plan_fft_forward(window.len());
    let mut buf: Vec<Complex<f64>> = window.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fft.process(&mut buf);
    let bins = window.len() / 2;
    let width = bins / dim;
    let logs: Vec<f64> = (0..dim)
        .map(|b| {
            let p: f64 = buf[1 + b * width..1 + (b + 1) * width].iter().map(|c| c.norm_sqr()).sum::<f64>()
                / (width * window.len()) as f64;
            (p + 1e-3).ln()
        })
        .collect();
    let mean = logs.iter().sum::<f64>() / dim as f64;
    logs.iter().map(|l| (l - mean) / 2.0).collect()
}

/// Synthesizes one party's dataset; identical for identical `(seed, party)`.
pub fn generate(cfg: &GeneratorConfig) -> Result<Dataset, DataError> {
    if cfg.dim < 8 {
        return Err(DataError::InvalidDim(cfg.dim));
    }
    if !(0.0..=1.0).contains(&cfg.heterogeneity) || !(0.0..=1.0).contains(&cfg.positive_ratio) {
        return Err(DataError::InvalidConfig("heterogeneity and positive_ratio must lie in [0, 1]".into()));
    }
    let shift = party_shift(cfg.seed, cfg.party, cfg.heterogeneity);
    let mut rng = party_rng(cfg.seed, cfg.party);
    // Skip the draw consumed by the party shift.
    let _: f64 = rng.gen_range(-1.0..=1.0);
    let positives = (cfg.positive_ratio * cfg.n_samples as f64).round() as usize;
    let mut labels: Vec<usize> = (0..cfg.n_samples).map(|i| usize::from(i < positives)).collect();
    labels.shuffle(&mut rng);
    let len = 4 * cfg.dim;
    let mut planner = FftPlanner::new();
    let mut features = Array2::zeros((cfg.n_samples, cfg.dim));
    for (i, &label) in labels.iter().enumerate() {
        let w = synth_window(label, len, shift, &mut rng);
        for (d, v) in spectral_features(&w, cfg.dim, &mut planner).into_iter().enumerate() {
            features[[i, d]] = v;
        }
    }
    Ok(Dataset {
        features,
        labels,
        seed: cfg.seed,
        heterogeneity: cfg.heterogeneity,
        party: cfg.party,
    })
}
