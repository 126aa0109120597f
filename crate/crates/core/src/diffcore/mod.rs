//! Dense linear algebra and a reverse-mode differentiation engine.
//!
//! The [`Tape`] records a forward computation as a flat list of primitive
//! vector-valued operations and evaluates eagerly; [`Tape::backward`] then
//! accumulates gradients with respect to every registered parameter slot in
//! reverse topological order. The engine is sized for differentiating an
//! unrolled fixed-step time loop over a few thousand steps, not for general
//! graph workloads.

mod fd;
mod matrix;
mod tape;

pub use fd::finite_difference_gradient;
pub use matrix::{affine, DenseMatrix};
pub use tape::{NodeId, Tape};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    #[error("backward requires a scalar root, got a vector of length {len}")]
    NonScalarRoot { len: usize },
    #[error("NaN encountered during reverse accumulation at node {node}")]
    NanInBackward { node: usize },
    #[error("non-finite function value at coordinate {coord} during finite differencing")]
    NonFiniteEval { coord: usize },
}

/// Flat gradient over all parameter slots of a tape, in registration order.
///
/// The ordering contract is layer-major with weights before biases, the
/// dynamics MLP before the readout MLP, and PReLU slopes plus batch-norm
/// affine parameters appended per layer; see the checkpoint schema in
/// [`crate::oscillator`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn zeros(n: usize) -> Self {
        GradientVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }

    /// In-place `self += scale * other`.
    pub fn add_scaled(&mut self, other: &GradientVector, scale: f64) {
        assert_eq!(self.0.len(), other.0.len(), "gradient length mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in &mut self.0 {
            *g *= c;
        }
    }
}
