//! Unsupervised anomaly detection for multivariate time series with an
//! LSTM generator/discriminator pair, plus CUSUM and PCA/SPE baselines.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod error;
pub mod gan;
pub mod gradcheck;
pub mod inversion;
pub mod linalg;
pub mod lstm;
pub mod matrix;
pub mod mmd;
pub mod optim;
pub mod pca;
pub mod pipeline;
pub mod plot;
pub mod scoring;
pub mod series;
pub mod synthetic;

pub use error::{Error, Result};
pub use matrix::Matrix;
