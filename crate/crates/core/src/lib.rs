//! Neural oscillator sequence models.
//!
//! A neural oscillator maps an input signal `u(t)` to an output `y(t)` through
//! a second-order ODE `x'' = Gamma(x, x', u)` with MLP right-hand side and an
//! MLP readout `y = Pi(x, u(0), t)`, integrated with a fixed-step second-order
//! Runge-Kutta scheme. This crate provides:
//!
//! - [`diffcore`]: dense linear algebra and a tape-based reverse-mode
//!   differentiation engine for backpropagation through the unrolled integrator
//! - [`nets`]: MLP layers, initialization, batch normalization, and identity
//!   deepening for warm starts
//! - [`oscillator`]: forward simulation and loss gradients of the oscillator
//! - [`encoder`]: an explicit ReLU network whose ODE computes time-varying
//!   sine-transform coefficients, plus mollifier Fourier data and the
//!   associated reconstruction error formula
//! - [`dynsys`]: Bouc-Wen benchmark dynamics, RK4 integration, modal damping
//!   synthesis, and an ODE perturbation-bound harness
//! - [`stochastic`]: seeded generation of harmonic and harmonizable excitations
//! - [`training`]: Adam, learning-rate schedules, gradient clipping, dataset
//!   construction, and the training loop
//! - [`analysis`]: relative error metrics and log-log decay-rate fits

pub mod analysis;
pub mod diffcore;
pub mod dynsys;
pub mod encoder;
pub mod nets;
pub mod oscillator;
pub mod signal;
pub mod stochastic;
pub mod training;

pub use diffcore::{DenseMatrix, GradientVector, Tape};
pub use nets::MlpParams;
pub use oscillator::OscillatorModel;
pub use signal::Signal;
