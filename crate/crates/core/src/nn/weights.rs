use rand::Rng;

use super::spec::{Layer, ModelSpec};
use crate::error::{Error, Result};
use crate::rng;

/// Flat parameter vector of a model.
///
/// Each parameterized layer owns the contiguous slice starting at its entry in
/// `layer_offsets` (weights first, then biases). The first `frozen_prefix`
/// parameterized layers are excluded from SGD updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub params: Vec<f32>,
    pub layer_offsets: Vec<usize>,
    pub frozen_prefix: usize,
}

impl ModelWeights {
    /// Zero parameters with the layout of `spec`.
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        let layout = spec.layout()?;
        Ok(ModelWeights {
            params: vec![0.0; layout.total_params],
            layer_offsets: layout.offsets.iter().flatten().copied().collect(),
            frozen_prefix: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn param_layer_count(&self) -> usize {
        self.layer_offsets.len()
    }

    /// Parameter range of the `i`-th parameterized layer.
    pub fn layer_range(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.layer_offsets[i];
        let end = self
            .layer_offsets
            .get(i + 1)
            .copied()
            .unwrap_or(self.params.len());
        start..end
    }

    pub fn layer_slice(&self, i: usize) -> &[f32] {
        &self.params[self.layer_range(i)]
    }

    /// Number of leading parameters covered by the frozen prefix.
    pub fn frozen_len(&self) -> usize {
        self.layer_offsets
            .get(self.frozen_prefix)
            .copied()
            .unwrap_or(self.params.len())
    }

    pub fn frozen_slice(&self) -> &[f32] {
        &self.params[..self.frozen_len()]
    }

    pub fn with_frozen_prefix(mut self, frozen_prefix: usize) -> Result<Self> {
        self.set_frozen_prefix(frozen_prefix)?;
        Ok(self)
    }

    pub fn set_frozen_prefix(&mut self, frozen_prefix: usize) -> Result<()> {
        if frozen_prefix > self.layer_offsets.len() {
            return Err(Error::Config(format!(
                "frozen prefix {frozen_prefix} exceeds {} parameterized layers",
                self.layer_offsets.len()
            )));
        }
        self.frozen_prefix = frozen_prefix;
        Ok(())
    }

    /// Checks the structural invariants and agreement with `spec`.
    pub fn check_against(&self, spec: &ModelSpec) -> Result<()> {
        let layout = spec.layout()?;
        let expected: Vec<usize> = layout.offsets.iter().flatten().copied().collect();
        if self.params.len() != layout.total_params || self.layer_offsets != expected {
            return Err(Error::Shape(format!(
                "weights have {} params in {} layers, model expects {} in {}",
                self.params.len(),
                self.layer_offsets.len(),
                layout.total_params,
                expected.len()
            )));
        }
        if self.frozen_prefix > self.layer_offsets.len() {
            return Err(Error::Contract(format!(
                "frozen prefix {} exceeds {} parameterized layers",
                self.frozen_prefix,
                self.layer_offsets.len()
            )));
        }
        Ok(())
    }
}

/// Glorot-uniform weights and zero biases, one RNG stream per layer.
pub fn init_weights(spec: &ModelSpec, seed: u64) -> Result<ModelWeights> {
    let mut weights = ModelWeights::zeros(spec)?;
    let mut slot = 0;
    for (index, layer) in spec.layers.iter().enumerate() {
        let (fan_in, fan_out) = match *layer {
            Layer::Dense { in_dim, out_dim } => (in_dim, out_dim),
            Layer::Conv2d {
                in_channels,
                out_channels,
                kernel_size,
                ..
            } => {
                let area = kernel_size * kernel_size;
                (in_channels * area, out_channels * area)
            }
            Layer::Relu | Layer::Flatten => continue,
        };
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
        let (n_weights, _) = layer.param_counts();
        let start = weights.layer_offsets[slot];
        let mut rng = rng::stream(seed, "init", &[index as u64]);
        for p in &mut weights.params[start..start + n_weights] {
            *p = rng.random_range(-limit..=limit);
        }
        slot += 1;
    }
    Ok(weights)
}
