//! Feature covariance, eigenspectrum and power-law decay coefficient.
//!
//! The pipeline is the streaming one: feed row batches into a
//! [`CovarianceAccumulator`], [`finalize`](CovarianceAccumulator::finalize)
//! into the uncentered second moment `(1/N) sum f f^T`, take its
//! [`eigenspectrum`] and [`fit_power_law`] over a rank window.

mod covariance;
mod eigen;
mod fit;

pub use covariance::CovarianceAccumulator;
pub use eigen::{eigenspectrum, eigenspectrum_gram, Eigenspectrum};
pub use fit::{fit_power_law, FitRange, FitRecord, PowerLawFit, MIN_FIT_POINTS, WEAK_FIT_R2};
