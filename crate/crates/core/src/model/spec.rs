use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

/// Dense network shape with a base/head partition.
///
/// `layer_sizes` lists the input width, hidden widths and the class count.
/// Layer `l` maps `layer_sizes[l] -> layer_sizes[l + 1]`. Layers
/// `head_start_layer..` form the head, earlier layers the base. Hidden layers
/// use the configured activation, the output layer is a softmax.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    pub head_start_layer: usize,
    #[serde(default)]
    pub activation: Activation,
}

/// Offsets of one layer's parameters inside a flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Row-major `fan_out x fan_in` weight block.
    pub weights: usize,
    pub biases: usize,
}

impl LayerSlot {
    pub fn end(&self) -> usize {
        self.biases + self.fan_out
    }
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>, head_start_layer: usize) -> Result<Self, ModelError> {
        let spec = Self {
            layer_sizes,
            head_start_layer,
            activation: Activation::Relu,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layer_sizes.len() < 2 {
            return Err(ModelError::InvalidSpec("need at least an input and an output size".into()));
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(ModelError::InvalidSpec("layer sizes must be positive".into()));
        }
        if self.output_dim() < 2 {
            return Err(ModelError::InvalidSpec("softmax output needs at least two classes".into()));
        }
        if self.head_start_layer >= self.num_layers() {
            return Err(ModelError::InvalidSpec(format!(
                "head_start_layer {} leaves an empty head in a {}-layer network",
                self.head_start_layer,
                self.num_layers()
            )));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Width of the features the base hands to the head.
    pub fn base_output_dim(&self) -> usize {
        self.layer_sizes[self.head_start_layer]
    }

    pub fn layout(&self) -> Vec<LayerSlot> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let slot = LayerSlot {
                    fan_in: w[0],
                    fan_out: w[1],
                    weights: offset,
                    biases: offset + w[0] * w[1],
                };
                offset = slot.end();
                slot
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn head_offset(&self) -> usize {
        self.layer_sizes[..=self.head_start_layer]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn head_param_count(&self) -> usize {
        self.param_count() - self.head_offset()
    }

    pub fn head_fraction(&self) -> f64 {
        self.head_param_count() as f64 / self.param_count() as f64
    }

    /// The head as a standalone network over base features.
    pub fn head_spec(&self) -> NetworkSpec {
        NetworkSpec {
            layer_sizes: self.layer_sizes[self.head_start_layer..].to_vec(),
            head_start_layer: 0,
            activation: self.activation,
        }
    }

    /// Same shape with a different partition; `0` makes the whole network trainable.
    pub fn with_head_start(&self, head_start_layer: usize) -> Result<NetworkSpec, ModelError> {
        let spec = NetworkSpec {
            head_start_layer,
            ..self.clone()
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_accounting() {
        let spec = NetworkSpec::new(vec![4, 3, 2], 1).unwrap();
        assert_eq!(spec.param_count(), 4 * 3 + 3 + 3 * 2 + 2);
        assert_eq!(spec.head_offset(), 15);
        assert_eq!(spec.head_param_count(), 8);
        assert_eq!(spec.head_spec().layer_sizes, vec![3, 2]);
        assert_eq!(spec.base_output_dim(), 3);
        let layout = spec.layout();
        assert_eq!(layout[1].weights, 15);
        assert_eq!(layout[1].biases, 21);
        assert_eq!(layout[1].end(), 23);
    }

    #[test]
    fn published_architecture_fraction() {
        // 8,234 head parameters out of 143,286 rounds to 5.7%.
        let frac: f64 = 8234.0 / 143286.0;
        assert!((frac * 100.0 - 5.7).abs() < 0.05);
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(NetworkSpec::new(vec![4], 0).is_err());
        assert!(NetworkSpec::new(vec![4, 1], 0).is_err());
        assert!(NetworkSpec::new(vec![4, 3, 2], 2).is_err());
        assert!(NetworkSpec::new(vec![4, 0, 2], 1).is_err());
        let json = r#"{"layer_sizes":[4,2],"head_start_layer":0,"extra":1}"#;
        assert!(serde_json::from_str::<NetworkSpec>(json).is_err());
    }
}
