use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::{SynthConfig, CONVERGENCE_DELTA};
use super::dataset::SynthDataset;
use super::solve::{min_norm_solution, train_mse, GramSpectrum};
use crate::error::Result;

/// First step at which the training loss gap has shrunk to
/// [`CONVERGENCE_DELTA`] of its initial value, or a censoring marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status", content = "steps")]
pub enum ConvergenceTime {
    Converged(u64),
    /// Budget exhausted; carries `max_steps`.
    Censored(u64),
}

impl ConvergenceTime {
    pub fn steps(&self) -> Option<u64> {
        match *self {
            ConvergenceTime::Converged(k) => Some(k),
            ConvergenceTime::Censored(_) => None,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, ConvergenceTime::Censored(_))
    }
}

/// Convergence time from the closed-form loss trajectory.
///
/// With `r_i = 1 - eta mu_i` and `c_i = (u_i^T y)^2` the loss gap to the
/// interpolating minimum is `(1/n) sum_i c_i r_i^{2k}`, which is monotone in
/// `k`, so the first step below `delta` times the initial gap is found by
/// bisection.
pub fn convergence_time(data: &SynthDataset, config: &SynthConfig) -> Result<ConvergenceTime> {
    config.validate()?;
    let gram = GramSpectrum::new(data)?;
    let eta = gram.step_size(config.eta_hat);
    let target = CONVERGENCE_DELTA * gram.train_mse_at(0, eta);
    let reached = |k: u64| gram.train_mse_at(k, eta) <= target;
    if reached(0) {
        return Ok(ConvergenceTime::Converged(0));
    }
    if !reached(config.max_steps) {
        return Ok(ConvergenceTime::Censored(config.max_steps));
    }
    // invariant: !reached(lo), reached(hi)
    let (mut lo, mut hi) = (0u64, config.max_steps);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reached(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ConvergenceTime::Converged(hi))
}

/// Same criterion, evaluated by running gradient descent step by step with the
/// minimum loss taken from the pseudoinverse solution. Cost is
/// `O(steps * n * d)`; meant for cross-checking on small instances.
pub fn convergence_time_iterative(data: &SynthDataset, config: &SynthConfig) -> Result<ConvergenceTime> {
    config.validate()?;
    let gram = GramSpectrum::new(data)?;
    let eta = gram.step_size(config.eta_hat);
    let floor = train_mse(data, &min_norm_solution(data)?);
    let n = data.n() as f64;
    let xt = data.x.transpose();
    let mut w = DVector::zeros(data.d());
    let mut target = None;
    for k in 0..=config.max_steps {
        let resid = &data.x * &w - &data.y;
        let gap = resid.norm_squared() / n - floor;
        let target = *target.get_or_insert(CONVERGENCE_DELTA * gap);
        if gap <= target {
            return Ok(ConvergenceTime::Converged(k));
        }
        w.axpy(-eta / n, &(&xt * resid), 1.0);
    }
    Ok(ConvergenceTime::Censored(config.max_steps))
}
