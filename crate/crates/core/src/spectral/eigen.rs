use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Relative tolerance for the symmetry precondition.
const SYMMETRY_TOL: f64 = 1e-8;
/// Eigenvalues in `[-NEG_TOL * lambda_1, 0)` are round-off and clamped to zero.
const NEG_TOL: f64 = 1e-10;

/// Eigenvalues sorted in descending order, all nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenspectrum {
    values: Vec<f64>,
    rank_hint: usize,
}

impl Eigenspectrum {
    /// Wraps a precomputed spectrum. Values are sorted descending; fails on
    /// negative or non-finite entries.
    pub fn from_values(mut values: Vec<f64>, rank_hint: usize) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        if let Some(&v) = values.iter().find(|&&v| v < 0.0) {
            return Err(Error::NotPositiveSemidefinite {
                value: v,
                tolerance: 0.0,
            });
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { values, rank_hint })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `min(N, D)`: the largest possible rank of the covariance.
    pub fn rank_hint(&self) -> usize {
        self.rank_hint
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn leading(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let scale = m.amax();
    let mut dev: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..j {
            dev = dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if dev > SYMMETRY_TOL * scale {
        return Err(Error::Asymmetric { deviation: dev / scale });
    }
    Ok(())
}

/// Descending eigenvalues of a symmetric matrix with round-off negatives clamped.
fn sorted_eigenvalues(m: DMatrix<f64>) -> Result<Vec<f64>> {
    let dim = m.nrows();
    if let Some(p) = m.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: p % dim,
            col: p / dim,
        });
    }
    let scale = m.amax();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 1000.max(50 * dim)).ok_or(Error::EigenFailure)?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let lead = values.first().copied().unwrap_or(0.0);
    // an all-zero matrix still gets a sensible tolerance
    let tol = NEG_TOL * if lead > 0.0 { lead } else { scale };
    for v in &mut values {
        if *v < 0.0 {
            if *v < -tol {
                return Err(Error::NotPositiveSemidefinite {
                    value: *v,
                    tolerance: tol,
                });
            }
            *v = 0.0;
        }
    }
    Ok(values)
}

/// Spectrum of a `D x D` covariance estimated from `n_samples` rows.
pub fn eigenspectrum(cov: &DMatrix<f64>, n_samples: u64) -> Result<Eigenspectrum> {
    check_symmetric(cov)?;
    let d = cov.nrows();
    let values = sorted_eigenvalues(cov.clone())?;
    Ok(Eigenspectrum {
        values,
        rank_hint: (n_samples.min(d as u64)) as usize,
    })
}

/// Spectrum of `(1/N) X^T X` computed from the `N x N` Gram matrix
/// `(1/N) X X^T`, which shares its nonzero eigenvalues. Returns
/// `min(N, D)` values.
pub fn eigenspectrum_gram(feats: &FeatureMatrix) -> Result<Eigenspectrum> {
    let n = feats.rows();
    let m = n.min(feats.cols());
    let x = feats.to_dmatrix();
    let mut gram = &x * x.transpose();
    gram /= n as f64;
    // X X^T is symmetric up to the order of the dot products; pin it exactly
    gram = (&gram + gram.transpose()) * 0.5;
    let mut values = sorted_eigenvalues(gram)?;
    values.truncate(m);
    Ok(Eigenspectrum { values, rank_hint: m })
}
