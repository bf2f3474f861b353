use std::collections::HashMap;

use super::Party;
use crate::numerics::FixedPointCodec;
use crate::simnet::Transcript;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalityHit {
    /// Index into `Transcript::messages`.
    pub message: usize,
    pub sample: usize,
    /// Word offset of the match inside the payload.
    pub offset: usize,
}

/// Finds contiguous copies of quantized training samples inside message payloads.
#[derive(Debug, Clone, Default)]
pub struct LocalityScanner {
    patterns: Vec<Vec<u64>>,
    by_first: HashMap<u64, Vec<usize>>,
}

impl LocalityScanner {
    pub fn new<'a, I>(codec: &FixedPointCodec, samples: I) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut s = Self::default();
        for row in samples {
            let q = codec.quantize_slice(row).into_inner();
            if q.is_empty() {
                continue;
            }
            s.by_first.entry(q[0]).or_default().push(s.patterns.len());
            s.patterns.push(q);
        }
        s
    }

    /// Indexes every training row of every party.
    pub fn from_parties(codec: &FixedPointCodec, parties: &[Party]) -> Self {
        let rows: Vec<Vec<f64>> = parties
            .iter()
            .flat_map(|p| p.train.inputs.rows().into_iter().map(|r| r.to_vec()))
            .collect();
        Self::new(codec, rows.iter().map(Vec::as_slice))
    }

    pub fn patterns(&self) -> usize {
        self.patterns.len()
    }

    /// First `(sample, offset)` whose pattern occurs contiguously in `words`.
    pub fn find(&self, words: &[u64]) -> Option<(usize, usize)> {
        for (off, w) in words.iter().enumerate() {
            if let Some(cands) = self.by_first.get(w) {
                for &c in cands {
                    let p = &self.patterns[c];
                    if words.len() - off >= p.len() && words[off..off + p.len()] == p[..] {
                        return Some((c, off));
                    }
                }
            }
        }
        None
    }

    pub fn scan(&self, transcript: &Transcript) -> Vec<LocalityHit> {
        transcript
            .messages
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                self.find(&r.message.payload.words()).map(|(sample, offset)| LocalityHit {
                    message: i,
                    sample,
                    offset,
                })
            })
            .collect()
    }
}
