use super::kernels::Real;
use super::loss::softmax_cross_entropy;
use super::model::{backward_generic, forward_generic};
use super::spec::{Layer, ModelSpec};
use super::weights::ModelWeights;
use super::{Batch, Matrix};
use crate::error::{Error, Result};

const DENOM_FLOOR: f64 = 1e-8;

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckStats {
    /// Largest relative error over the compared parameters.
    pub max_relative_error: f64,
    pub compared: usize,
    /// Parameters whose `±epsilon` perturbation moved some ReLU input across
    /// zero. The loss is not differentiable along that segment, so the
    /// central difference there says nothing about the gradient.
    pub kinked: usize,
}

/// Maximum relative error between the analytic gradient and central finite
/// differences of the mean softmax cross-entropy.
///
/// Everything is evaluated in `f64` so the finite differences are not
/// swamped by single-precision rounding. See [`GradcheckStats::kinked`] for
/// the parameters left out.
pub fn gradient_check(
    spec: &ModelSpec,
    weights: &ModelWeights,
    batch: &Batch,
    epsilon: f64,
) -> Result<f64> {
    Ok(gradient_check_stats(spec, weights, batch, epsilon)?.max_relative_error)
}

/// [`gradient_check`] with the comparison counts.
pub fn gradient_check_stats(
    spec: &ModelSpec,
    weights: &ModelWeights,
    batch: &Batch,
    epsilon: f64,
) -> Result<GradcheckStats> {
    let labels = batch.labels.clone();
    check(spec, weights, &batch.inputs, epsilon, move |logits| softmax_cross_entropy(logits, &labels))
}

/// Like [`gradient_check`] with an arbitrary scalar objective of the logits
/// (`head` returns the objective and its gradient).
pub fn gradient_check_with<H>(
    spec: &ModelSpec,
    weights: &ModelWeights,
    inputs: &Matrix<f32>,
    epsilon: f64,
    head: H,
) -> Result<f64>
where
    H: Fn(&Matrix<f64>) -> Result<(f64, Matrix<f64>)>,
{
    Ok(check(spec, weights, inputs, epsilon, head)?.max_relative_error)
}

fn check<H>(
    spec: &ModelSpec,
    weights: &ModelWeights,
    inputs: &Matrix<f32>,
    epsilon: f64,
    head: H,
) -> Result<GradcheckStats>
where
    H: Fn(&Matrix<f64>) -> Result<(f64, Matrix<f64>)>,
{
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::Config(format!("epsilon must lie in (0, 1e-2], got {epsilon}")));
    }
    weights.check_against(spec)?;
    let inputs = inputs.map(f64::cast_f32);
    let mut params: Vec<f64> = weights.params.iter().map(|&p| p as f64).collect();

    let (logits, cache) = forward_generic(spec, &params, &inputs, true)?;
    let (_, grad_logits) = head(&logits)?;
    let analytic = backward_generic(spec, &params, &cache, &grad_logits)?;

    let relu_inputs: Vec<usize> = (0..spec.layers.len())
        .filter(|&i| spec.layers[i] == Layer::Relu)
        .collect();
    let active = |cache: &super::model::ForwardCache<f64>| -> Vec<bool> {
        relu_inputs
            .iter()
            .flat_map(|&i| cache.inputs[i].iter().map(|&z| z > 0.0))
            .collect()
    };
    let base_active = active(&cache);
    let keep = !relu_inputs.is_empty();
    // Returns the objective and whether the ReLU pattern matches the base.
    let objective = |params: &[f64]| -> Result<(f64, bool)> {
        let (logits, cache) = forward_generic(spec, params, &inputs, keep)?;
        let same = !keep || active(&cache) == base_active;
        Ok((head(&logits)?.0, same))
    };

    let mut worst = 0.0f64;
    let mut kinked = 0;
    for j in 0..params.len() {
        let original = params[j];
        let up = original + epsilon;
        let down = original - epsilon;
        params[j] = up;
        let (f_up, smooth_up) = objective(&params)?;
        params[j] = down;
        let (f_down, smooth_down) = objective(&params)?;
        params[j] = original;
        if !(smooth_up && smooth_down) {
            kinked += 1;
            continue;
        }
        let numeric = (f_up - f_down) / (up - down);
        let a = analytic[j];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(DENOM_FLOOR);
        worst = worst.max(err);
    }
    Ok(GradcheckStats {
        max_relative_error: worst,
        compared: params.len() - kinked,
        kinked,
    })
}
