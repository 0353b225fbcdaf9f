use std::time::{Duration, Instant};

use fedwarm_core::nn::{gradient_check_stats, init_weights, Batch, Matrix, ModelSpec};
use rand::Rng;

use crate::error::{CliError, CliResult};
use crate::presets;

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub model: String,
    pub params: usize,
    pub max_relative_error: f64,
    /// Parameters skipped because their perturbation crossed a ReLU kink.
    pub kinked: usize,
    pub elapsed: Duration,
}

/// Finite-difference check of a model preset on a random batch.
pub fn gradcheck(model: &str, epsilon: f64, batch_size: usize, seed: u64) -> CliResult<GradcheckReport> {
    let preset = presets::model(model).ok_or_else(|| {
        CliError::Usage(format!("unknown model preset `{model}`; available: {}", presets::MODEL_PRESETS.join(", ")))
    })?;
    if batch_size == 0 {
        return Err(CliError::Usage("batch size must be at least 1".into()));
    }
    let started = Instant::now();
    let spec = ModelSpec::new(preset.layers, preset.input_shape, preset.num_classes)?;
    let weights = init_weights(&spec, seed)?;
    let mut g = fedwarm_core::rng::stream(seed, "gradcheck-batch", &[]);
    let features = spec.input_len();
    let inputs: Vec<f32> = (0..batch_size * features).map(|_| g.random::<f32>()).collect();
    let labels: Vec<usize> = (0..batch_size).map(|_| g.random_range(0..spec.num_classes)).collect();
    let batch = Batch::new(Matrix::new(batch_size, features, inputs)?, labels)?;
    let stats = gradient_check_stats(&spec, &weights, &batch, epsilon)?;
    Ok(GradcheckReport {
        model: model.to_string(),
        params: weights.len(),
        max_relative_error: stats.max_relative_error,
        kinked: stats.kinked,
        elapsed: started.elapsed(),
    })
}
