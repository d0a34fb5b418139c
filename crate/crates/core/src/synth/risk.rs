use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::SynthDataset;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

const MC_CHUNK: usize = 4096;

/// Population excess risk `(psi - theta*)^T diag(sigma) (psi - theta*)`.
pub fn excess_risk(psi: &DVector<f64>, data: &SynthDataset) -> Result<f64> {
    if psi.len() != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            got: psi.len(),
        });
    }
    Ok(psi
        .iter()
        .zip(data.theta_star.iter())
        .zip(data.sigma_diag.iter())
        .map(|((p, t), s)| s * (p - t) * (p - t))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloRisk {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

/// Empirical mean of `(y - x^T psi)^2 - (y - x^T theta*)^2` over fresh draws.
///
/// Samples are generated in fixed chunks, each with its own RNG stream, so
/// the estimate depends only on `seed` and `samples`.
pub fn monte_carlo_excess_risk(
    psi: &DVector<f64>,
    data: &SynthDataset,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<MonteCarloRisk> {
    if psi.len() != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            got: psi.len(),
        });
    }
    if samples < 2 {
        return Err(Error::InvalidConfig("Monte Carlo risk needs at least 2 samples".into()));
    }
    let sqrt_sigma = data.sqrt_sigma();
    let chunks: Vec<(usize, usize)> = (0..samples)
        .step_by(MC_CHUNK)
        .enumerate()
        .map(|(i, start)| (i, MC_CHUNK.min(samples - start)))
        .collect();
    let partial = par::map(exec, &chunks, |&(idx, len)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(idx as u64);
        let mut row = vec![0.0; data.d()];
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..len {
            let mut signal_err = 0.0;
            let mut fit_err = 0.0;
            for (((r, sd), t), p) in row
                .iter_mut()
                .zip(&sqrt_sigma)
                .zip(data.theta_star.iter())
                .zip(psi.iter())
            {
                let z: f64 = rng.sample(StandardNormal);
                *r = z * sd;
                signal_err += *r * t;
                fit_err += *r * p;
            }
            let e: f64 = rng.sample(StandardNormal);
            let y = signal_err + data.noise_sd * e;
            let v = (y - fit_err).powi(2) - (y - signal_err).powi(2);
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    let (s, s2) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = samples as f64;
    let mean = s / m;
    let var = ((s2 - m * mean * mean) / (m - 1.0)).max(0.0);
    Ok(MonteCarloRisk {
        mean,
        std_err: (var / m).sqrt(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{sample_dataset, SynthConfig};

    fn ds() -> SynthDataset {
        sample_dataset(&SynthConfig {
            n: 10,
            d: 25,
            alpha_gen: 1.0,
            seed: 4,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn teacher_has_zero_risk() {
        let data = ds();
        assert_eq!(excess_risk(&data.theta_star, &data).unwrap(), 0.0);
    }

    #[test]
    fn zero_weights_risk_is_signal_variance() {
        let data = ds();
        let want: f64 = data
            .sigma_diag
            .iter()
            .zip(data.theta_star.iter())
            .map(|(s, t)| s * t * t)
            .sum();
        let got = excess_risk(&DVector::zeros(25), &data).unwrap();
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let data = ds();
        assert!(excess_risk(&DVector::zeros(3), &data).is_err());
        assert!(monte_carlo_excess_risk(&DVector::zeros(3), &data, 10, 0, Execution::Sequential).is_err());
    }

    #[test]
    fn monte_carlo_agrees_with_closed_form() {
        let data = ds();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let psi = DVector::from_fn(25, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.3);
        let exact = excess_risk(&psi, &data).unwrap();
        let mc = monte_carlo_excess_risk(&psi, &data, 100_000, 5, Execution::default()).unwrap();
        assert!((mc.mean - exact).abs() < 3.0 * mc.std_err, "{mc:?} vs {exact}");
        assert!((mc.mean - exact).abs() < 0.02 * exact);
    }

    #[test]
    fn execution_policy_does_not_change_estimate() {
        let data = ds();
        let psi = DVector::from_element(25, 0.1);
        let a = monte_carlo_excess_risk(&psi, &data, 10_000, 1, Execution::Sequential).unwrap();
        let b = monte_carlo_excess_risk(&psi, &data, 10_000, 1, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
