use statrs::distribution::{ChiSquared, ContinuousCDF};

pub const BUCKETS: usize = 256;

/// Histogram of the low byte of each word.
pub fn low_byte_histogram(words: impl IntoIterator<Item = u64>) -> [u64; BUCKETS] {
    let mut h = [0u64; BUCKETS];
    for w in words {
        h[(w & 0xff) as usize] += 1;
    }
    h
}

/// Upper-tail p-value of Pearson's chi-square test against the uniform distribution.
pub fn chi_square_uniform_p(hist: &[u64]) -> Option<f64> {
    let total: u64 = hist.iter().sum();
    if total == 0 || hist.len() < 2 {
        return None;
    }
    let expected = total as f64 / hist.len() as f64;
    let stat: f64 = hist
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((hist.len() - 1) as f64).ok()?;
    Some(1.0 - dist.cdf(stat))
}

/// Plug-in Shannon entropy of the low-byte histogram, scaled to bits per
/// 64-bit word under an independent-bytes assumption.
pub fn entropy_bits_per_word(hist: &[u64]) -> f64 {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let h: f64 = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum();
    h.abs() * 8.0
}
