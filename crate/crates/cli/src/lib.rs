//! Experiment runner around the oscillator library: configuration loading
//! with presets and overrides, deterministic artifact output, and the
//! verification and training experiments behind the `oscnet` binary.

pub mod artifacts;
pub mod config;
pub mod experiments;
pub mod plot;

use thiserror::Error;

use oscnet_core::analysis::AnalysisError;
use oscnet_core::diffcore::DiffError;
use oscnet_core::dynsys::DynError;
use oscnet_core::encoder::EncoderError;
use oscnet_core::nets::NetsError;
use oscnet_core::oscillator::OscError;
use oscnet_core::signal::SignalError;
use oscnet_core::stochastic::StochasticError;
use oscnet_core::training::TrainError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("artifact error: {0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Nets(#[from] NetsError),
    #[error(transparent)]
    Osc(#[from] OscError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Dynamics(#[from] DynError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Diff(#[from] DiffError),
}
