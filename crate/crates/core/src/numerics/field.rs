//! Arithmetic in the Mersenne prime field `p = 2^61 - 1`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::NumericsError;

pub const FIELD_MODULUS: u64 = (1 << 61) - 1;

/// Offset applied when embedding signed ring values, keeps them nonnegative.
pub const EMBED_OFFSET: u64 = 1 << 60;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldElement(u64);

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F({})", self.0)
    }
}

fn reduce128(x: u128) -> u64 {
    // 2^61 = 1 (mod p)
    let lo = (x as u64) & FIELD_MODULUS;
    let hi = (x >> 61) as u64;
    let mut r = lo + (hi & FIELD_MODULUS) + (hi >> 61);
    while r >= FIELD_MODULUS {
        r -= FIELD_MODULUS;
    }
    r
}

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    pub fn new(v: u64) -> Self {
        Self(v % FIELD_MODULUS)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn pow(self, mut e: u64) -> Self {
        let mut base = self;
        let mut acc = Self::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(self) -> Result<Self, NumericsError> {
        if self.is_zero() {
            return Err(NumericsError::DivisionByZero);
        }
        Ok(self.pow(FIELD_MODULUS - 2))
    }

    /// Embeds a signed ring value (two's-complement `u64`) with the `+2^60` offset.
    pub fn embed(ring: u64) -> Result<Self, NumericsError> {
        let signed = ring as i64;
        let shifted = (signed as i128) + EMBED_OFFSET as i128;
        if shifted < 0 || shifted >= FIELD_MODULUS as i128 {
            return Err(NumericsError::OutOfFieldRange(signed));
        }
        Ok(Self(shifted as u64))
    }

    /// Inverse of summing `count` embedded values: strips `count * 2^60` and
    /// maps the centered residue back to a two's-complement ring element.
    pub fn unembed_sum(self, count: usize) -> u64 {
        let offset = Self::new(EMBED_OFFSET) * Self::new(count as u64);
        let v = (self - offset).0;
        if v > FIELD_MODULUS / 2 {
            (v as i64 - FIELD_MODULUS as i64) as u64
        } else {
            v
        }
    }

    /// Horner evaluation of `coeffs[0] + coeffs[1] x + ...`.
    pub fn eval_poly(coeffs: &[FieldElement], x: FieldElement) -> FieldElement {
        coeffs
            .iter()
            .rev()
            .fold(FieldElement::ZERO, |acc, &c| acc * x + c)
    }
}

impl Add for FieldElement {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let s = self.0 + rhs.0;
        Self(if s >= FIELD_MODULUS { s - FIELD_MODULUS } else { s })
    }
}

impl AddAssign for FieldElement {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for FieldElement {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        if self.0 >= rhs.0 {
            Self(self.0 - rhs.0)
        } else {
            Self(self.0 + FIELD_MODULUS - rhs.0)
        }
    }
}

impl Neg for FieldElement {
    type Output = Self;
    fn neg(self) -> Self {
        Self::ZERO - self
    }
}

impl Mul for FieldElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self(reduce128(self.0 as u128 * rhs.0 as u128))
    }
}

impl From<u64> for FieldElement {
    fn from(v: u64) -> Self {
        Self::new(v)
    }
}

/// Lagrange interpolation of the unique polynomial through `points`, evaluated at zero.
///
/// Fails with `DivisionByZero` if two points share an x coordinate.
pub fn interpolate_at_zero(
    points: &[(FieldElement, FieldElement)],
) -> Result<FieldElement, NumericsError> {
    let mut acc = FieldElement::ZERO;
    for (i, &(xi, yi)) in points.iter().enumerate() {
        let mut num = FieldElement::ONE;
        let mut den = FieldElement::ONE;
        for (j, &(xj, _)) in points.iter().enumerate() {
            if i != j {
                num = num * xj;
                den = den * (xj - xi);
            }
        }
        acc += yi * num * den.inv()?;
    }
    Ok(acc)
}
