use rand::Rng;

use super::{LayerSlot, ModelError, NetworkSpec};

/// Flat parameter (or gradient) vector with its layer layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Vec<LayerSlot>,
    head_offset: usize,
}

impl ParamVector {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self {
            values: vec![0.0; spec.param_count()],
            layout: spec.layout(),
            head_offset: spec.head_offset(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let mut p = Self::zeros(spec);
        for slot in p.layout.clone() {
            let bound = (6.0 / (slot.fan_in + slot.fan_out) as f64).sqrt();
            for w in &mut p.values[slot.weights..slot.biases] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        p
    }

    pub fn from_values(spec: &NetworkSpec, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != spec.param_count() {
            return Err(ModelError::Shape(format!(
                "expected {} parameters, got {}",
                spec.param_count(),
                values.len()
            )));
        }
        Ok(Self {
            values,
            layout: spec.layout(),
            head_offset: spec.head_offset(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> &[LayerSlot] {
        &self.layout
    }

    pub fn head_offset(&self) -> usize {
        self.head_offset
    }

    pub fn base(&self) -> &[f64] {
        &self.values[..self.head_offset]
    }

    pub fn head(&self) -> &[f64] {
        &self.values[self.head_offset..]
    }

    pub fn head_mut(&mut self) -> &mut [f64] {
        &mut self.values[self.head_offset..]
    }

    pub fn set_head(&mut self, head: &[f64]) -> Result<(), ModelError> {
        if head.len() != self.values.len() - self.head_offset {
            return Err(ModelError::Shape(format!(
                "head has {} parameters, got {}",
                self.values.len() - self.head_offset,
                head.len()
            )));
        }
        self.values[self.head_offset..].copy_from_slice(head);
        Ok(())
    }

    /// Checks that this vector was built for `spec`.
    pub fn check_spec(&self, spec: &NetworkSpec) -> Result<(), ModelError> {
        if self.values.len() != spec.param_count() || self.layout != spec.layout() {
            return Err(ModelError::Shape(format!(
                "parameter vector of length {} does not match network with {} parameters",
                self.values.len(),
                spec.param_count()
            )));
        }
        Ok(())
    }

    /// Little-endian `u64` length followed by little-endian `f64` values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.values.len());
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(spec: &NetworkSpec, bytes: &[u8]) -> Result<Self, ModelError> {
        let (values, rest) = decode_values(bytes)?;
        if !rest.is_empty() {
            return Err(ModelError::Format(format!("{} trailing bytes", rest.len())));
        }
        Self::from_values(spec, values)
    }
}

pub(crate) fn decode_values(bytes: &[u8]) -> Result<(Vec<f64>, &[u8]), ModelError> {
    if bytes.len() < 8 {
        return Err(ModelError::Format("missing length header".into()));
    }
    let len = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    let need = len.checked_mul(8).ok_or_else(|| ModelError::Format("length overflow".into()))?;
    if body.len() < need {
        return Err(ModelError::Format(format!("header says {len} values, body holds {}", body.len() / 8)));
    }
    let values = body[..need]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((values, &body[need..]))
}

/// Parameters plus the round they were taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub round: u64,
    pub params: ParamVector,
}

impl Checkpoint {
    /// Little-endian `u64` round, then the parameter encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.round.to_le_bytes().to_vec();
        out.extend(self.params.to_bytes());
        out
    }

    pub fn from_bytes(spec: &NetworkSpec, bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < 8 {
            return Err(ModelError::Format("missing round header".into()));
        }
        let round = u64::from_le_bytes(bytes[..8].try_into().unwrap());
        Ok(Self {
            round,
            params: ParamVector::from_bytes(spec, &bytes[8..])?,
        })
    }
}
