//! Eigenspectrum decay estimation for learned representations.
//!
//! The crate has four parts:
//!
//! * [`spectral`]: streaming uncentered covariance, symmetric eigenspectrum and
//!   the log-log power-law fit that yields the decay coefficient `alpha`.
//! * [`synth`]: overparameterized linear regression on power-law Gaussian
//!   covariates, closed-form gradient-descent trajectories, excess risk and
//!   convergence-time scaling sweeps.
//! * [`probe`]: linear softmax readouts, label-noise injection and
//!   alpha/accuracy correlation reports.
//! * [`io`]: the `fmx` binary matrix format, CSV ingestion, run manifests and
//!   atomic JSON report writing.
//!
//! Data-parallel loops go through [`par`]; build without the default
//! `parallel` feature to get a purely sequential library.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod features;
pub mod io;
pub mod par;
pub mod probe;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use features::FeatureMatrix;
pub use par::Execution;
