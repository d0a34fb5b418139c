use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative training-loss gap at which gradient descent counts as converged.
pub const CONVERGENCE_DELTA: f64 = 1e-3;

/// How the training covariates are drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// Rows i.i.d. `Normal(0, diag(lambda))`.
    #[default]
    Gaussian,
    /// Gaussian rows orthogonalized so that the sample second moment
    /// `X^T X / n` equals `diag(lambda_1, ..., lambda_m, 0, ...)` exactly,
    /// `m = min(n, d)`. The Gram matrix `X X^T / n` then has eigenvalues
    /// exactly `c * j^-alpha`, free of finite-sample spectral spread.
    Orthogonalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub alpha_gen: f64,
    pub c_gen: f64,
    pub n: usize,
    pub d: usize,
    pub noise_sd: f64,
    pub seed: u64,
    pub eta_hat: f64,
    pub max_steps: u64,
    pub tol_grad: f64,
    #[serde(default)]
    pub design: Design,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            alpha_gen: 1.0,
            c_gen: 1.0,
            n: 200,
            d: 1000,
            noise_sd: 0.1,
            seed: 0,
            eta_hat: 0.5,
            max_steps: 5000,
            tol_grad: 1e-12,
            design: Design::Gaussian,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n == 0 || self.d == 0 {
            return bad(format!("n and d must be positive (n={}, d={})", self.n, self.d));
        }
        if !(self.alpha_gen >= 0.0 && self.alpha_gen.is_finite()) {
            return bad(format!("alpha_gen must be >= 0, got {}", self.alpha_gen));
        }
        if !(self.c_gen > 0.0 && self.c_gen.is_finite()) {
            return bad(format!("c_gen must be > 0, got {}", self.c_gen));
        }
        if !(self.eta_hat > 0.0 && self.eta_hat < 1.0) {
            return bad(format!("eta_hat must lie in (0, 1), got {}", self.eta_hat));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd must be >= 0, got {}", self.noise_sd));
        }
        if !(self.tol_grad >= 0.0) {
            return bad(format!("tol_grad must be >= 0, got {}", self.tol_grad));
        }
        Ok(())
    }

    /// Generative eigenvalues `c_gen * j^-alpha_gen`, `j = 1..=d`.
    pub fn spectrum(&self) -> Vec<f64> {
        (1..=self.d)
            .map(|j| self.c_gen * (j as f64).powf(-self.alpha_gen))
            .collect()
    }
}
