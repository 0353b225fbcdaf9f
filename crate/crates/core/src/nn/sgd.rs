use super::weights::ModelWeights;
use crate::error::{Error, Result};

/// `w <- w - lr * grad` on every layer at or past the frozen prefix.
pub fn sgd_step(weights: &ModelWeights, grad: &[f32], lr: f32) -> Result<ModelWeights> {
    let mut out = weights.clone();
    sgd_step_in_place(&mut out, grad, lr)?;
    Ok(out)
}

pub fn sgd_step_in_place(weights: &mut ModelWeights, grad: &[f32], lr: f32) -> Result<()> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    if grad.len() != weights.params.len() {
        return Err(Error::Shape(format!(
            "gradient has {} entries, weights have {}",
            grad.len(),
            weights.params.len()
        )));
    }
    let start = weights.frozen_len();
    for (p, g) in weights.params[start..].iter_mut().zip(&grad[start..]) {
        *p -= lr * g;
    }
    Ok(())
}
