use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{Design, SynthConfig};
use crate::error::Result;

/// One synthetic regression problem `y = X theta* + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub theta_star: DVector<f64>,
    /// Generative covariate variances `c * j^-alpha`.
    pub sigma_diag: DVector<f64>,
    pub noise_sd: f64,
}

impl SynthDataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Draws one fresh covariate row from `Normal(0, diag(sigma_diag))` into
    /// `row` and returns its label.
    pub fn draw_fresh<R: Rng>(&self, rng: &mut R, sqrt_sigma: &[f64], row: &mut [f64]) -> f64 {
        let mut y = 0.0;
        for ((r, s), t) in row.iter_mut().zip(sqrt_sigma).zip(self.theta_star.iter()) {
            let z: f64 = rng.sample(StandardNormal);
            *r = z * s;
            y += *r * t;
        }
        let e: f64 = rng.sample(StandardNormal);
        y + self.noise_sd * e
    }

    pub fn sqrt_sigma(&self) -> Vec<f64> {
        self.sigma_diag.iter().map(|s| s.sqrt()).collect()
    }
}

/// RNG for one experiment cell, derived from the seed and the cell's grid position.
pub fn cell_rng(seed: u64, alpha_index: usize, n_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((alpha_index as u64) << 32) | n_index as u64);
    rng
}

/// Samples a dataset from `config.seed`.
pub fn sample_dataset(config: &SynthConfig) -> Result<SynthDataset> {
    sample_dataset_with(config, &mut cell_rng(config.seed, 0, 0))
}

/// Samples covariates, then the teacher `theta* ~ Normal(0, I/d)`, then the
/// label noise, all from `rng`.
pub fn sample_dataset_with<R: Rng>(config: &SynthConfig, rng: &mut R) -> Result<SynthDataset> {
    config.validate()?;
    let (n, d) = (config.n, config.d);
    let sigma = config.spectrum();
    let x = match config.design {
        Design::Gaussian => {
            let sqrt_sigma: Vec<f64> = sigma.iter().map(|s| s.sqrt()).collect();
            let mut data = Vec::with_capacity(n * d);
            for _ in 0..n {
                for s in &sqrt_sigma {
                    let z: f64 = rng.sample(StandardNormal);
                    data.push(z * s);
                }
            }
            DMatrix::from_row_slice(n, d, &data)
        }
        Design::Orthogonalized => {
            let m = n.min(d);
            let g = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let qr = g.qr();
            let r = qr.r();
            let q = qr.q();
            let mut x = DMatrix::zeros(n, d);
            for j in 0..m {
                // sign fix makes Q Haar distributed
                let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
                let scale = sign * (n as f64 * sigma[j]).sqrt();
                x.set_column(j, &(q.column(j) * scale));
            }
            x
        }
    };
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let theta_star = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal) * inv_sqrt_d);
    let noise = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * config.noise_sd);
    let y = &x * &theta_star + noise;
    Ok(SynthDataset {
        x,
        y,
        theta_star,
        sigma_diag: DVector::from_vec(sigma),
        noise_sd: config.noise_sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, d: usize) -> SynthConfig {
        SynthConfig {
            n,
            d,
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_labels_exact() {
        let c = SynthConfig {
            noise_sd: 0.0,
            ..cfg(20, 30)
        };
        let data = sample_dataset(&c).unwrap();
        assert_eq!(data.y, &data.x * &data.theta_star);
    }

    #[test]
    fn isotropic_sigma() {
        let c = SynthConfig {
            alpha_gen: 0.0,
            ..cfg(5, 8)
        };
        let data = sample_dataset(&c).unwrap();
        assert!(data.sigma_diag.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn seed_determinism() {
        let c = cfg(15, 40);
        assert_eq!(sample_dataset(&c).unwrap(), sample_dataset(&c).unwrap());
        let other = SynthConfig { seed: 1, ..c.clone() };
        assert_ne!(sample_dataset(&c).unwrap().x, sample_dataset(&other).unwrap().x);
    }

    #[test]
    fn cell_streams_differ() {
        let a: u64 = cell_rng(3, 0, 1).random();
        let b: u64 = cell_rng(3, 1, 0).random();
        assert_ne!(a, b);
    }

    #[test]
    fn gaussian_column_variances() {
        let c = SynthConfig {
            alpha_gen: 1.0,
            ..cfg(20_000, 4)
        };
        let data = sample_dataset(&c).unwrap();
        for j in 0..4 {
            let var = data.x.column(j).norm_squared() / 20_000.0;
            let want = 1.0 / (j + 1) as f64;
            assert!((var - want).abs() < 0.05 * want, "col {j}: {var} vs {want}");
        }
    }

    #[test]
    fn orthogonalized_second_moment_is_exact() {
        for (n, d) in [(12, 30), (30, 12)] {
            let c = SynthConfig {
                alpha_gen: 1.5,
                design: Design::Orthogonalized,
                ..cfg(n, d)
            };
            let data = sample_dataset(&c).unwrap();
            let m = n.min(d);
            let second = data.x.transpose() * &data.x / n as f64;
            let mut want = DMatrix::zeros(d, d);
            for j in 0..m {
                want[(j, j)] = c.spectrum()[j];
            }
            assert!((second - want).abs().max() < 1e-12);
        }
    }
}
