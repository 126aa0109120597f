//! Uniformly sampled multichannel signals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("signal requires a positive time step, got {0}")]
    NonPositiveStep(f64),
    #[error("signal requires a positive channel count")]
    ZeroDim,
    #[error("signal values length {len} is not a multiple of dim {dim}")]
    RaggedValues { len: usize, dim: usize },
    #[error("signal contains non-finite samples")]
    NonFinite,
    #[error("signal is empty")]
    Empty,
}

/// A signal sampled on the uniform grid `t_i = i * dt`, stored row-major:
/// sample `i` occupies `values[i * dim .. (i + 1) * dim]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    dim: usize,
    dt: f64,
    values: Vec<f64>,
}

impl Signal {
    pub fn new(dim: usize, dt: f64, values: Vec<f64>) -> Result<Self, SignalError> {
        if dim == 0 {
            return Err(SignalError::ZeroDim);
        }
        if !(dt > 0.0) {
            return Err(SignalError::NonPositiveStep(dt));
        }
        if values.is_empty() {
            return Err(SignalError::Empty);
        }
        if values.len() % dim != 0 {
            return Err(SignalError::RaggedValues {
                len: values.len(),
                dim,
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(SignalError::NonFinite);
        }
        Ok(Signal { dim, dt, values })
    }

    /// Samples a closed-form signal on `len` points starting at t = 0.
    pub fn from_fn(dim: usize, dt: f64, len: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Result<Self, SignalError> {
        let mut values = Vec::with_capacity(len * dim);
        for i in 0..len {
            let v = f(i as f64 * dt);
            assert_eq!(v.len(), dim, "from_fn: sample dimension mismatch");
            values.extend_from_slice(&v);
        }
        Signal::new(dim, dt, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of samples (time points).
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Keeps every `stride`-th sample starting at index 0. The stride must
    /// evenly tile the sample count minus one so endpoints are preserved.
    pub fn subsample(&self, stride: usize) -> Signal {
        assert!(stride >= 1);
        assert_eq!((self.len() - 1) % stride, 0, "stride must preserve the final sample");
        let mut values = Vec::with_capacity((self.len() - 1) / stride + 1);
        for i in (0..self.len()).step_by(stride) {
            values.extend_from_slice(self.sample(i));
        }
        Signal {
            dim: self.dim,
            dt: self.dt * stride as f64,
            values,
        }
    }
}
