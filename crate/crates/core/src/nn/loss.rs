use super::kernels::Real;
use super::Matrix;
use crate::error::{Error, Result};

const LOG_FLOOR: f64 = 1e-12;

/// Row-wise softmax with max subtraction, evaluated in `f64`.
pub fn softmax<T: Real>(logits: &Matrix<T>) -> Matrix<f64> {
    let mut out = Matrix::filled(logits.rows, logits.cols, 0.0f64);
    for r in 0..logits.rows {
        let row = logits.row(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.into_f64()));
        let dst = out.row_mut(r);
        let mut sum = 0.0;
        for (d, v) in dst.iter_mut().zip(row) {
            *d = (v.into_f64() - max).exp();
            sum += *d;
        }
        for d in dst.iter_mut() {
            *d /= sum;
        }
    }
    out
}

/// Mean negative log-likelihood of `labels` under the row softmax of
/// `logits`, and its gradient `(p - onehot) / B` with respect to the logits.
pub fn softmax_cross_entropy<T: Real>(logits: &Matrix<T>, labels: &[usize]) -> Result<(f64, Matrix<T>)> {
    if logits.rows != labels.len() {
        return Err(Error::Shape(format!(
            "{} logit rows but {} labels",
            logits.rows,
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= logits.cols) {
        return Err(Error::Shape(format!(
            "label {bad} out of range for {} classes",
            logits.cols
        )));
    }
    if labels.is_empty() {
        return Ok((0.0, Matrix::filled(0, logits.cols, T::zero())));
    }
    let probs = softmax(logits);
    let scale = 1.0 / labels.len() as f64;
    let mut loss = 0.0f64;
    let mut grad = Matrix::filled(logits.rows, logits.cols, T::zero());
    for (r, &label) in labels.iter().enumerate() {
        let p = probs.row(r);
        loss -= p[label].max(LOG_FLOOR).ln();
        for (c, (g, &pc)) in grad.row_mut(r).iter_mut().zip(p).enumerate() {
            let y = if c == label { 1.0 } else { 0.0 };
            *g = T::cast_f64((pc - y) * scale);
        }
    }
    Ok((loss * scale, grad))
}
