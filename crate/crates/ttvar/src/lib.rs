//! Heavy-tailed multivariate forecasting toolkit.
//!
//! The crate estimates Gaussian and Student-t vector autoregressions,
//! learns nonlinear corrections on their filtered residuals (SVR, MLP,
//! LSTM, GRU), runs strictly recursive walk-forward backtests, and scores
//! the results with RMSE/MAE, Diebold-Mariano tests and regime splits.
//! A battery of stylized-fact diagnostics and synthetic data generators
//! makes every statistical component verifiable offline.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod evaluation;
pub mod hybrid;
pub mod learners;
pub mod report;
pub mod rng;
pub mod simulation;
#[cfg(test)]
pub(crate) mod testutil;
pub mod timeseries;
pub mod var_gaussian;
pub mod var_student_t;

pub use error::{Result, TtvarError};
