//! Minimal feed-forward network engine.
//!
//! Parameters live in one flat `f32` vector ([`ModelWeights`]) whose layout is
//! a pure function of the [`ModelSpec`]. Forward and backward passes are
//! generic over [`Real`] so the same kernels run in `f32` for training and in
//! `f64` for finite-difference verification.

mod gradcheck;
mod kernels;
mod loss;
mod model;
mod sgd;
mod spec;
mod weights;

pub use gradcheck::{gradient_check, gradient_check_stats, gradient_check_with, GradcheckStats};
pub use kernels::Real;
pub use loss::{softmax, softmax_cross_entropy};
pub use model::{argmax, backward, forward, forward_logits, predict, ForwardCache};
pub use sgd::{sgd_step, sgd_step_in_place};
pub use spec::{Layer, Layout, ModelSpec};
pub use weights::{init_weights, ModelWeights};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy the given rows, in order, into a new matrix.
    pub fn gather(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn map<U>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// A mini-batch: one input row per label.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Matrix<f32>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Matrix<f32>, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows != labels.len() {
            return Err(Error::Shape(format!(
                "batch has {} input rows but {} labels",
                inputs.rows,
                labels.len()
            )));
        }
        Ok(Batch { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}
