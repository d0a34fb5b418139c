use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::SynthConfig;
use super::dataset::SynthDataset;
use super::risk::excess_risk;
use super::solve::GramSpectrum;
use crate::error::{Error, Result};

/// A run is aborted once the training loss exceeds its running minimum by this factor.
const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: u64,
    pub train_mse: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRun {
    pub config: SynthConfig,
    pub eta: f64,
    pub weights_final: Vec<f64>,
    pub steps_taken: u64,
    pub converged: bool,
    pub train_mse: f64,
    /// Expected squared error on a fresh draw: `excess_risk + noise_sd^2`.
    pub test_mse: f64,
    pub excess_risk: f64,
    /// Sampled at steps 0, 1, 2, 4, 8, ... and at the final step.
    pub trajectory: Vec<TrajectoryPoint>,
}

/// Largest eigenvalue of `X X^T / n` (equivalently of `X^T X / n`).
fn leading_eigenvalue(x: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows() as f64;
    let small = if x.nrows() <= x.ncols() {
        x * x.transpose()
    } else {
        x.transpose() * x
    } / n;
    let small = (&small + small.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(small, f64::EPSILON, 1000.max(50 * x.nrows().min(x.ncols())))
        .ok_or(Error::EigenFailure)?;
    Ok(eig.eigenvalues.max())
}

/// Full-batch gradient descent on the mean squared training error from
/// `w_0 = 0` with `eta = eta_hat / lambda_1(X X^T / n)`.
pub fn gd_train(data: &SynthDataset, config: &SynthConfig) -> Result<RegressionRun> {
    config.validate()?;
    let lead = if data.n() <= data.d() {
        GramSpectrum::new(data)
            .map(|g| g.leading())
            .or_else(|_| leading_eigenvalue(&data.x))?
    } else {
        leading_eigenvalue(&data.x)?
    };
    if !(lead > 0.0) {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
        });
    }
    let eta = config.eta_hat / lead;
    let n = data.n() as f64;
    let xt = data.x.transpose();

    let mut w = DVector::zeros(data.d());
    let mut trajectory = Vec::new();
    let mut next_record = 0u64;
    let mut min_mse = f64::INFINITY;
    let mut initial_mse = None;
    let mut steps = 0u64;
    let mut converged = false;
    let (mut mse, mut grad_norm);
    loop {
        let resid = &data.x * &w - &data.y;
        mse = resid.norm_squared() / n;
        let grad = &xt * &resid / n;
        grad_norm = grad.norm();
        if steps == next_record {
            trajectory.push(TrajectoryPoint {
                step: steps,
                train_mse: mse,
                grad_norm,
            });
            next_record = if steps == 0 { 1 } else { steps * 2 };
        }
        let floor = f64::EPSILON * *initial_mse.get_or_insert(mse);
        // the floor keeps round-off around an interpolating minimum from tripping the check
        if !mse.is_finite() || (mse > DIVERGENCE_FACTOR * min_mse && mse - min_mse > floor) {
            return Err(Error::Divergence {
                step: steps,
                mse,
                min_mse,
            });
        }
        min_mse = min_mse.min(mse);
        if grad_norm < config.tol_grad {
            converged = true;
            break;
        }
        if steps >= config.max_steps {
            break;
        }
        w.axpy(-eta, &grad, 1.0);
        steps += 1;
    }
    if trajectory.last().map(|p| p.step) != Some(steps) {
        trajectory.push(TrajectoryPoint {
            step: steps,
            train_mse: mse,
            grad_norm,
        });
    }
    let risk = excess_risk(&w, data)?;
    Ok(RegressionRun {
        config: config.clone(),
        eta,
        weights_final: w.iter().copied().collect(),
        steps_taken: steps,
        converged,
        train_mse: mse,
        test_mse: risk + data.noise_sd * data.noise_sd,
        excess_risk: risk,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{closed_form_weights, sample_dataset};

    fn cfg(n: usize, d: usize, steps: u64) -> SynthConfig {
        SynthConfig {
            n,
            d,
            max_steps: steps,
            tol_grad: 0.0,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn zero_steps_is_initialization() {
        let c = cfg(10, 20, 0);
        let ds = sample_dataset(&c).unwrap();
        let run = gd_train(&ds, &c).unwrap();
        assert!(run.weights_final.iter().all(|&w| w == 0.0));
        assert_eq!(run.steps_taken, 0);
        let mean_y2 = ds.y.norm_squared() / 10.0;
        assert!((run.train_mse - mean_y2).abs() < 1e-15);
    }

    #[test]
    fn one_step() {
        let c = cfg(10, 20, 1);
        let ds = sample_dataset(&c).unwrap();
        let run = gd_train(&ds, &c).unwrap();
        let want = ds.x.transpose() * &ds.y * (run.eta / 10.0);
        let got = DVector::from_vec(run.weights_final.clone());
        assert!((got - want).amax() < 1e-14);
    }

    #[test]
    fn matches_closed_form_at_500() {
        let c = cfg(20, 50, 500);
        let ds = sample_dataset(&c).unwrap();
        let run = gd_train(&ds, &c).unwrap();
        let cf = closed_form_weights(&ds, 500, run.eta).unwrap();
        let got = DVector::from_vec(run.weights_final.clone());
        assert!((got - cf).amax() < 1e-8);
        assert_eq!(run.steps_taken, 500);
    }

    #[test]
    fn trajectory_geometric_and_decreasing() {
        let c = cfg(20, 50, 100);
        let ds = sample_dataset(&c).unwrap();
        let run = gd_train(&ds, &c).unwrap();
        let steps: Vec<u64> = run.trajectory.iter().map(|p| p.step).collect();
        assert_eq!(steps, vec![0, 1, 2, 4, 8, 16, 32, 64, 100]);
        assert!(run.trajectory.windows(2).all(|w| w[1].train_mse <= w[0].train_mse));
        assert!(run.excess_risk >= -1e-10);
    }

    #[test]
    fn stops_on_gradient_tolerance() {
        let c = SynthConfig {
            alpha_gen: 0.0,
            tol_grad: 1e-6,
            ..cfg(10, 40, 100_000)
        };
        let ds = sample_dataset(&c).unwrap();
        let run = gd_train(&ds, &c).unwrap();
        assert!(run.converged);
        assert!(run.steps_taken < 100_000);
        assert!(run.trajectory.last().unwrap().grad_norm < 1e-6);
    }
}
