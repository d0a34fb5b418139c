use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::dataset::SynthDataset;
use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest make the Gram matrix singular.
const RANK_TOL: f64 = 1e-12;

/// Mean squared residual `(1/n)|Xw - y|^2`.
pub fn train_mse(data: &SynthDataset, w: &DVector<f64>) -> f64 {
    (&data.x * w - &data.y).norm_squared() / data.n() as f64
}

/// Eigendecomposition of the normalized Gram matrix `X X^T / n` together with
/// the targets expressed in its eigenbasis. Every closed-form quantity of the
/// gradient-descent trajectory is diagonal in this basis.
#[derive(Debug, Clone)]
pub struct GramSpectrum<'a> {
    data: &'a SynthDataset,
    /// Descending eigenvalues of `X X^T / n`.
    mu: Vec<f64>,
    /// Matching eigenvectors as columns.
    basis: DMatrix<f64>,
    /// `basis^T y`
    y_coords: DVector<f64>,
}

fn sorted_eigen(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = m.nrows();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 1000.max(50 * dim)).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mu = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let basis = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((mu, basis))
}

fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

impl<'a> GramSpectrum<'a> {
    /// Fails with [`Error::RankDeficient`] unless `X X^T` is invertible.
    pub fn new(data: &'a SynthDataset) -> Result<Self> {
        let n = data.n() as f64;
        let gram = symmetrized(&data.x * data.x.transpose() / n);
        let (mu, basis) = sorted_eigen(gram)?;
        let lead = mu[0];
        let last = *mu.last().expect("n >= 1");
        if !(lead > 0.0) || last <= RANK_TOL * lead {
            return Err(Error::RankDeficient {
                condition: if last > 0.0 { lead / last } else { f64::INFINITY },
            });
        }
        let y_coords = basis.transpose() * &data.y;
        Ok(Self {
            data,
            mu,
            basis,
            y_coords,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.mu
    }

    pub fn leading(&self) -> f64 {
        self.mu[0]
    }

    pub fn smallest(&self) -> f64 {
        *self.mu.last().expect("non-empty")
    }

    /// `lambda_1 / lambda_n` of the normalized Gram matrix.
    pub fn condition(&self) -> f64 {
        self.leading() / self.smallest()
    }

    /// Squared target mass along each eigendirection.
    pub fn target_mass(&self) -> Vec<f64> {
        self.y_coords.iter().map(|c| c * c).collect()
    }

    /// Step size `eta_hat / lambda_1`.
    pub fn step_size(&self, eta_hat: f64) -> f64 {
        eta_hat / self.leading()
    }

    fn check_step(&self, eta: f64) -> Result<()> {
        let eta_lambda = eta * self.leading();
        if !(eta > 0.0) || !(eta_lambda < 1.0) {
            return Err(Error::UnstableStep { eta_lambda });
        }
        Ok(())
    }

    /// `ln(1 - eta mu_i)` for each eigenvalue.
    fn log_contraction(&self, eta: f64) -> impl Iterator<Item = f64> + '_ {
        self.mu.iter().map(move |&m| (-eta * m).ln_1p())
    }

    /// `(1/n) X^T basis diag(coef) basis^T y`
    fn lift(&self, coef: impl Iterator<Item = f64>) -> DVector<f64> {
        let scaled = DVector::from_iterator(self.mu.len(), coef.zip(self.y_coords.iter()).map(|(c, y)| c * y));
        self.data.x.transpose() * (&self.basis * scaled) / self.data.n() as f64
    }

    /// Weights after `k` gradient steps from zero.
    pub fn closed_form(&self, k: u64, eta: f64) -> Result<DVector<f64>> {
        self.check_step(eta)?;
        let kf = k as f64;
        // (1 - (1 - eta mu)^k) / mu without cancellation for small eta mu
        let coef = self
            .log_contraction(eta)
            .zip(&self.mu)
            .map(|(l, &m)| -(kf * l).exp_m1() / m)
            .collect::<Vec<_>>();
        Ok(self.lift(coef.into_iter()))
    }

    /// Increment `w_{k+1} - w_k`.
    pub fn delta(&self, k: u64, eta: f64) -> Result<DVector<f64>> {
        self.check_step(eta)?;
        let kf = k as f64;
        let coef = self
            .log_contraction(eta)
            .map(|l| eta * (kf * l).exp())
            .collect::<Vec<_>>();
        Ok(self.lift(coef.into_iter()))
    }

    /// Minimum-norm interpolant `X^T (X X^T)^{-1} y`.
    pub fn min_norm(&self) -> DVector<f64> {
        let inv: Vec<f64> = self.mu.iter().map(|m| 1.0 / m).collect();
        self.lift(inv.into_iter())
    }

    /// Training MSE after `k` steps: `(1/n) sum_i (1 - eta mu_i)^{2k} (u_i^T y)^2`.
    pub fn train_mse_at(&self, k: u64, eta: f64) -> f64 {
        let kf = k as f64;
        self.log_contraction(eta)
            .zip(self.y_coords.iter())
            .map(|(l, c)| (2.0 * kf * l).exp() * c * c)
            .sum::<f64>()
            / self.data.n() as f64
    }
}

/// Pseudoinverse solution `X^+ y`: the minimum-norm interpolant when `n <= d`
/// and the least-squares solution when `n > d`.
pub fn min_norm_solution(data: &SynthDataset) -> Result<DVector<f64>> {
    if data.n() <= data.d() {
        return Ok(GramSpectrum::new(data)?.min_norm());
    }
    // tall: (X^T X)^{-1} X^T y through the covariance eigenbasis
    let n = data.n() as f64;
    let cov = symmetrized(data.x.transpose() * &data.x / n);
    let (mu, basis) = sorted_eigen(cov)?;
    let last = *mu.last().expect("d >= 1");
    if !(mu[0] > 0.0) || last <= RANK_TOL * mu[0] {
        return Err(Error::RankDeficient {
            condition: if last > 0.0 { mu[0] / last } else { f64::INFINITY },
        });
    }
    let rhs = basis.transpose() * (data.x.transpose() * &data.y / n);
    let coords = DVector::from_iterator(mu.len(), rhs.iter().zip(&mu).map(|(r, m)| r / m));
    Ok(basis * coords)
}

/// Gradient-descent weights after `k` steps of size `eta` from `w_0 = 0`.
pub fn closed_form_weights(data: &SynthDataset, k: u64, eta: f64) -> Result<DVector<f64>> {
    GramSpectrum::new(data)?.closed_form(k, eta)
}

/// The `k`-th increment `w_{k+1} - w_k = (eta/n) X^T (I - eta X X^T/n)^k y`.
pub fn delta_weights(data: &SynthDataset, k: u64, eta: f64) -> Result<DVector<f64>> {
    GramSpectrum::new(data)?.delta(k, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{sample_dataset, SynthConfig};

    fn data(n: usize, d: usize, alpha: f64, seed: u64) -> SynthDataset {
        sample_dataset(&SynthConfig {
            n,
            d,
            alpha_gen: alpha,
            seed,
            ..Default::default()
        })
        .unwrap()
    }

    fn hand(x: DMatrix<f64>, y: DVector<f64>) -> SynthDataset {
        let d = x.ncols();
        SynthDataset {
            x,
            y,
            theta_star: DVector::zeros(d),
            sigma_diag: DVector::from_element(d, 1.0),
            noise_sd: 0.0,
        }
    }

    /// Independent route: pseudoinverse through nalgebra's SVD.
    fn svd_pinv_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
        x.clone().svd(true, true).solve(y, 1e-12).unwrap()
    }

    #[test]
    fn identity_design() {
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let ds = hand(DMatrix::identity(3, 3), y.clone());
        assert!((min_norm_solution(&ds).unwrap() - y).amax() < 1e-14);
    }

    #[test]
    fn wide_matches_svd_oracle() {
        let ds = data(3, 6, 1.0, 7);
        let psi = min_norm_solution(&ds).unwrap();
        assert!((&psi - svd_pinv_solve(&ds.x, &ds.y)).amax() < 1e-10);
        assert!(train_mse(&ds, &psi) < 1e-24);
    }

    #[test]
    fn tall_noiseless_recovers_teacher() {
        let mut c = SynthConfig {
            n: 60,
            d: 10,
            alpha_gen: 0.5,
            noise_sd: 0.0,
            ..Default::default()
        };
        c.seed = 3;
        let ds = sample_dataset(&c).unwrap();
        let psi = min_norm_solution(&ds).unwrap();
        assert!((psi - &ds.theta_star).amax() < 1e-8);
    }

    #[test]
    fn rank_deficient_reports_condition() {
        // duplicated row
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let ds = hand(x, DVector::from_vec(vec![1.0, 1.0]));
        assert!(matches!(
            min_norm_solution(&ds),
            Err(Error::RankDeficient { condition }) if condition > 1e12
        ));
    }

    #[test]
    fn closed_form_first_steps() {
        let ds = data(8, 20, 1.0, 1);
        let g = GramSpectrum::new(&ds).unwrap();
        let eta = g.step_size(0.5);
        assert_eq!(g.closed_form(0, eta).unwrap(), DVector::zeros(20));
        let want = ds.x.transpose() * &ds.y * (eta / 8.0);
        assert!((g.closed_form(1, eta).unwrap() - &want).amax() < 1e-13);
        assert!((g.delta(0, eta).unwrap() - want).amax() < 1e-13);
    }

    #[test]
    fn sum_convention_first_step() {
        // with F = |Y - Xw|^2 and step eta the first iterate is eta X^T Y;
        // the mean-loss trajectory with step n * eta is identical
        let ds = data(8, 20, 1.0, 2);
        let g = GramSpectrum::new(&ds).unwrap();
        let eta_sum = 0.5 / (g.leading() * 8.0);
        let w1 = g.closed_form(1, 8.0 * eta_sum).unwrap();
        let want = ds.x.transpose() * &ds.y * eta_sum;
        assert!((w1 - want).amax() < 1e-13);
    }

    #[test]
    fn increments_telescope() {
        let ds = data(10, 25, 1.5, 4);
        let g = GramSpectrum::new(&ds).unwrap();
        let eta = g.step_size(0.5);
        for k in [0, 1, 5, 50, 400] {
            let diff = g.closed_form(k + 1, eta).unwrap() - g.closed_form(k, eta).unwrap();
            assert!((g.delta(k, eta).unwrap() - diff).amax() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn large_k_reaches_min_norm() {
        let ds = data(10, 30, 1.0, 5);
        let g = GramSpectrum::new(&ds).unwrap();
        let eta = g.step_size(0.5);
        let oracle = svd_pinv_solve(&ds.x, &ds.y);
        assert!((g.closed_form(1_000_000, eta).unwrap() - oracle).amax() < 1e-8);
    }

    #[test]
    fn approach_to_min_norm_is_monotone() {
        let ds = data(10, 30, 2.0, 6);
        let g = GramSpectrum::new(&ds).unwrap();
        let eta = g.step_size(0.5);
        let target = g.min_norm();
        let mut prev = f64::INFINITY;
        for k in [0, 1, 2, 5, 10, 100, 1000, 10_000] {
            let dist = (g.closed_form(k, eta).unwrap() - &target).norm();
            assert!(dist <= prev + 1e-15, "k={k}");
            prev = dist;
        }
    }

    #[test]
    fn unstable_step_rejected() {
        let ds = data(5, 10, 1.0, 0);
        let g = GramSpectrum::new(&ds).unwrap();
        let eta = 1.0 / g.leading();
        assert!(matches!(g.closed_form(3, eta), Err(Error::UnstableStep { .. })));
        assert!(matches!(
            delta_weights(&ds, 3, 2.0 * eta),
            Err(Error::UnstableStep { .. })
        ));
    }

    #[test]
    fn near_critical_step_kills_only_fast_directions() {
        let ds = data(10, 40, 2.0, 8);
        let g = GramSpectrum::new(&ds).unwrap();
        let eta = (1.0 - 1e-9) / g.leading();
        let k = 200;
        let dw = g.delta(k, eta).unwrap();
        // project the increment back onto each Gram eigendirection:
        // X dw = (eta/n) X X^T basis r^k c = eta basis diag(mu r^k) c
        let coords = g.basis.transpose() * (&ds.x * &dw);
        assert!(coords[0].abs() < 1e-12);
        assert!(coords[9].abs() > 1e-12);
    }

    #[test]
    fn train_mse_trajectory_matches_weights() {
        let ds = data(12, 30, 1.0, 9);
        let g = GramSpectrum::new(&ds).unwrap();
        let eta = g.step_size(0.5);
        for k in [0, 3, 40] {
            let w = g.closed_form(k, eta).unwrap();
            let direct = train_mse(&ds, &w);
            assert!((g.train_mse_at(k, eta) - direct).abs() < 1e-12 * (1.0 + direct));
        }
    }
}
