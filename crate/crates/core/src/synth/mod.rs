//! Overparameterized linear regression on power-law Gaussian covariates.
//!
//! Training minimizes the mean squared error `(1/n)|Xw - y|^2` with the
//! gradient taken as `X^T (Xw - y) / n` and step size
//! `eta = eta_hat / lambda_max(X X^T / n)`. Under this convention gradient
//! descent from `w_0 = 0` has the closed form
//!
//! ```text
//! w_k = X^T (X X^T)^{-1} [I - (I - eta X X^T / n)^k] y
//! ```
//!
//! which [`closed_form_weights`] evaluates through the eigendecomposition of
//! the Gram matrix. A sum-of-squares convention with step `eta` is the same
//! trajectory as this one with step `n * eta`.

mod config;
mod convergence;
mod dataset;
mod experiment;
mod gd;
mod risk;
mod solve;

pub use config::{Design, SynthConfig, CONVERGENCE_DELTA};
pub use convergence::{convergence_time, convergence_time_iterative, ConvergenceTime};
pub use dataset::{cell_rng, sample_dataset, sample_dataset_with, SynthDataset};
pub use experiment::{
    benign_overfitting_sweep, benign_overfitting_sweep_with, scaling_experiment, scaling_experiment_with, AlphaScaling,
    FitMetrics, ScalingCell, ScalingReport, Solver, SweepCell, SweepReport, SweepSummary,
};
pub use gd::{gd_train, RegressionRun, TrajectoryPoint};
pub use risk::{excess_risk, monte_carlo_excess_risk, MonteCarloRisk};
pub use solve::{closed_form_weights, delta_weights, min_norm_solution, train_mse, GramSpectrum};
