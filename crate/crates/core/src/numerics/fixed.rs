//! Fixed-point codec into the wrap-around 64-bit ring.

use std::ops::{Add, AddAssign, Index, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Two's-complement fixed-point encoding of reals into `Z/2^64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointCodec {
    frac_bits: u32,
    clamp_range: f64,
}

impl Default for FixedPointCodec {
    fn default() -> Self {
        Self {
            frac_bits: 20,
            clamp_range: 1024.0,
        }
    }
}

impl FixedPointCodec {
    pub fn new(frac_bits: u32, clamp_range: f64) -> Result<Self, NumericsError> {
        if frac_bits == 0 || frac_bits >= 40 {
            return Err(NumericsError::InvalidFracBits(frac_bits));
        }
        if !(clamp_range.is_finite() && clamp_range > 0.0) {
            return Err(NumericsError::InvalidClampRange);
        }
        Ok(Self {
            frac_bits,
            clamp_range,
        })
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn clamp_range(&self) -> f64 {
        self.clamp_range
    }

    /// Quantization step, `2^-frac_bits`.
    pub fn resolution(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    fn scale(&self) -> f64 {
        (self.frac_bits as f64).exp2()
    }

    /// Returns the ring element and whether the input had to be clamped.
    pub fn quantize_checked(&self, x: f64) -> (u64, bool) {
        let (v, clamped) = if x.is_nan() {
            (0.0, true)
        } else if x.abs() > self.clamp_range {
            (x.signum() * self.clamp_range, true)
        } else {
            (x, false)
        };
        ((v * self.scale()).round() as i64 as u64, clamped)
    }

    pub fn quantize(&self, x: f64) -> u64 {
        let (e, clamped) = self.quantize_checked(x);
        if clamped {
            log::warn!("fixed-point: clamped {x} to ±{}", self.clamp_range);
        }
        e
    }

    pub fn dequantize(&self, e: u64) -> f64 {
        e as i64 as f64 / self.scale()
    }

    /// Quantizes a slice, logging a single summary line if anything clamps.
    pub fn quantize_slice(&self, xs: &[f64]) -> RingVector {
        let mut clamped = 0usize;
        let elems = xs
            .iter()
            .map(|&x| {
                let (e, c) = self.quantize_checked(x);
                clamped += c as usize;
                e
            })
            .collect();
        if clamped > 0 {
            log::warn!(
                "fixed-point: clamped {clamped} of {} values to ±{}",
                xs.len(),
                self.clamp_range
            );
        }
        RingVector(elems)
    }

    pub fn dequantize_vec(&self, v: &RingVector) -> Vec<f64> {
        v.iter().map(|&e| self.dequantize(e)).collect()
    }
}

/// Vector over `Z/2^64` with element-wise wrap-around arithmetic.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingVector(pub Vec<u64>);

impl RingVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, u64> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<u64> {
        self.0
    }

    /// Adds `sign * other` in place; `sign` is `+1` or `-1`.
    pub fn add_signed(&mut self, other: &RingVector, negate: bool) {
        debug_assert_eq!(self.len(), other.len());
        if negate {
            for (a, b) in self.0.iter_mut().zip(&other.0) {
                *a = a.wrapping_sub(*b);
            }
        } else {
            for (a, b) in self.0.iter_mut().zip(&other.0) {
                *a = a.wrapping_add(*b);
            }
        }
    }

    /// Element-wise sum of equally long vectors; `None` for an empty input.
    pub fn sum<'a, I: IntoIterator<Item = &'a RingVector>>(vs: I) -> Option<RingVector> {
        let mut it = vs.into_iter();
        let mut acc = it.next()?.clone();
        for v in it {
            acc += v;
        }
        Some(acc)
    }
}

impl From<Vec<u64>> for RingVector {
    fn from(v: Vec<u64>) -> Self {
        Self(v)
    }
}

impl Index<usize> for RingVector {
    type Output = u64;
    fn index(&self, i: usize) -> &u64 {
        &self.0[i]
    }
}

impl AddAssign<&RingVector> for RingVector {
    fn add_assign(&mut self, rhs: &RingVector) {
        self.add_signed(rhs, false);
    }
}

impl SubAssign<&RingVector> for RingVector {
    fn sub_assign(&mut self, rhs: &RingVector) {
        self.add_signed(rhs, true);
    }
}

impl Add<&RingVector> for &RingVector {
    type Output = RingVector;
    fn add(self, rhs: &RingVector) -> RingVector {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub<&RingVector> for &RingVector {
    type Output = RingVector;
    fn sub(self, rhs: &RingVector) -> RingVector {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Neg for &RingVector {
    type Output = RingVector;
    fn neg(self) -> RingVector {
        RingVector(self.0.iter().map(|e| e.wrapping_neg()).collect())
    }
}
