//! Grid sweeps over (alpha, n, seed) cells. Cells are independent and run
//! through [`par::map`]; each owns an RNG stream derived from its seed and
//! grid position, and reports are assembled in grid order.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::SynthConfig;
use super::convergence::{convergence_time, ConvergenceTime};
use super::dataset::{cell_rng, sample_dataset_with, SynthDataset};
use super::gd::gd_train;
use super::risk::excess_risk;
use super::solve::{min_norm_solution, train_mse, GramSpectrum};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::stats::{fit_line, median};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCell {
    pub alpha: f64,
    pub n: usize,
    pub seed: u64,
    pub steps: Option<u64>,
    pub censored: bool,
    /// `lambda_1 / lambda_n` of `X X^T / n`.
    pub condition: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaScaling {
    pub alpha: f64,
    /// `(n, median steps over uncensored seeds)`; `None` when every seed was censored.
    pub median_steps: Vec<(usize, Option<f64>)>,
    /// Slope of `ln(median T)` against `ln(n)`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Slope fitted separately per seed.
    pub seed_slopes: Vec<f64>,
    /// `[min, max]` of the per-seed slopes.
    pub slope_band: Option<(f64, f64)>,
    pub censored_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub base: SynthConfig,
    pub cells: Vec<ScalingCell>,
    pub fits: Vec<AlphaScaling>,
}

impl ScalingReport {
    pub fn fit_for(&self, alpha: f64) -> Option<&AlphaScaling> {
        self.fits.iter().find(|f| f.alpha == alpha)
    }
}

fn check_grid(alphas: &[f64], seeds: &[u64]) -> Result<()> {
    if alphas.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig("empty alpha or seed list".into()));
    }
    Ok(())
}

pub fn scaling_experiment(alphas: &[f64], ns: &[usize], seeds: &[u64], base: &SynthConfig) -> Result<ScalingReport> {
    scaling_experiment_with(Execution::default(), alphas, ns, seeds, base)
}

/// Convergence times over the `alphas x ns x seeds` grid, with a log-log
/// slope per alpha. Censored cells are reported and left out of the fits.
pub fn scaling_experiment_with(
    exec: Execution,
    alphas: &[f64],
    ns: &[usize],
    seeds: &[u64],
    base: &SynthConfig,
) -> Result<ScalingReport> {
    check_grid(alphas, seeds)?;
    if let Some(&n) = ns.iter().find(|&&n| n > base.d || n == 0) {
        return Err(Error::InvalidConfig(format!("n = {n} must lie in [1, d = {}]", base.d)));
    }
    let mut grid = Vec::new();
    for (ai, &alpha) in alphas.iter().enumerate() {
        for (ni, &n) in ns.iter().enumerate() {
            for &seed in seeds {
                grid.push((ai, alpha, ni, n, seed));
            }
        }
    }
    for &(_, alpha, _, n, _) in &grid {
        SynthConfig {
            alpha_gen: alpha,
            n,
            ..base.clone()
        }
        .validate()?;
    }
    let cells = par::map(exec, &grid, |&(ai, alpha, ni, n, seed)| {
        let config = SynthConfig {
            alpha_gen: alpha,
            n,
            seed,
            ..base.clone()
        };
        let mut cell = ScalingCell {
            alpha,
            n,
            seed,
            steps: None,
            censored: false,
            condition: None,
            error: None,
        };
        let outcome = sample_dataset_with(&config, &mut cell_rng(seed, ai, ni)).and_then(|data| {
            let condition = GramSpectrum::new(&data)?.condition();
            Ok((condition, convergence_time(&data, &config)?))
        });
        match outcome {
            Ok((condition, time)) => {
                cell.condition = Some(condition);
                cell.censored = time.is_censored();
                cell.steps = match time {
                    ConvergenceTime::Converged(k) => Some(k),
                    ConvergenceTime::Censored(_) => None,
                };
            }
            Err(e) => cell.error = Some(e.to_string()),
        }
        cell
    });

    let fits = alphas
        .iter()
        .map(|&alpha| {
            let of_alpha: Vec<&ScalingCell> = cells.iter().filter(|c| c.alpha == alpha).collect();
            let median_steps: Vec<(usize, Option<f64>)> = ns
                .iter()
                .map(|&n| {
                    let ts: Vec<f64> = of_alpha
                        .iter()
                        .filter(|c| c.n == n)
                        .filter_map(|c| c.steps.map(|s| s as f64))
                        .collect();
                    (n, (!ts.is_empty()).then(|| median(&ts)))
                })
                .collect();
            let line = log_log_fit(median_steps.iter().filter_map(|&(n, t)| t.map(|t| (n, t))));
            let seed_slopes: Vec<f64> = seeds
                .iter()
                .filter_map(|&s| {
                    log_log_fit(
                        of_alpha
                            .iter()
                            .filter(|c| c.seed == s)
                            .filter_map(|c| c.steps.map(|t| (c.n, t as f64))),
                    )
                    .map(|l| l.0)
                })
                .collect();
            let slope_band = (!seed_slopes.is_empty()).then(|| {
                seed_slopes
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
                        (lo.min(s), hi.max(s))
                    })
            });
            AlphaScaling {
                alpha,
                median_steps,
                slope: line.map(|l| l.0),
                intercept: line.map(|l| l.1),
                seed_slopes,
                slope_band,
                censored_cells: of_alpha.iter().filter(|c| c.censored).count(),
            }
        })
        .collect();
    Ok(ScalingReport {
        base: base.clone(),
        cells,
        fits,
    })
}

/// `(slope, intercept)` of `ln t` against `ln n`; zero times are excluded.
fn log_log_fit(points: impl Iterator<Item = (usize, f64)>) -> Option<(f64, f64)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .filter(|&(_, t)| t > 0.0)
        .map(|(n, t)| ((n as f64).ln(), t.ln()))
        .unzip();
    fit_line(&xs, &ys).map(|l| (l.slope, l.intercept))
}

/// How the fixed-budget gradient-descent solution is obtained in a sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// Evaluate the closed-form iterate at `max_steps`.
    #[default]
    ClosedForm,
    /// Run [`gd_train`] step by step.
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub train_mse: f64,
    /// Empirical MSE on a fresh draw of `10 n` samples.
    pub test_mse: f64,
    pub excess_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub seed: u64,
    pub gd: Option<FitMetrics>,
    pub min_norm: Option<FitMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub alpha: f64,
    /// Medians over the cells where the solver succeeded.
    pub gd: Option<FitMetrics>,
    pub min_norm: Option<FitMetrics>,
    pub cells_ok: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub base: SynthConfig,
    pub solver: Solver,
    pub test_size: usize,
    pub cells: Vec<SweepCell>,
    pub summary: Vec<SweepSummary>,
}

impl SweepReport {
    pub fn summary_for(&self, alpha: f64) -> Option<&SweepSummary> {
        self.summary.iter().find(|s| s.alpha == alpha)
    }
}

pub fn benign_overfitting_sweep(
    alphas: &[f64],
    seeds: &[u64],
    base: &SynthConfig,
    solver: Solver,
) -> Result<SweepReport> {
    benign_overfitting_sweep_with(Execution::default(), alphas, seeds, base, solver)
}

/// Train/test/excess risk of the fixed-budget gradient-descent solution and
/// of the min-norm interpolant for each `alpha`, medians over `seeds`.
/// A failure inside a cell is recorded in that cell only.
pub fn benign_overfitting_sweep_with(
    exec: Execution,
    alphas: &[f64],
    seeds: &[u64],
    base: &SynthConfig,
    solver: Solver,
) -> Result<SweepReport> {
    check_grid(alphas, seeds)?;
    for &alpha in alphas {
        SynthConfig {
            alpha_gen: alpha,
            ..base.clone()
        }
        .validate()?;
    }
    let test_size = 10 * base.n;
    let grid: Vec<(usize, f64, u64)> = alphas
        .iter()
        .enumerate()
        .flat_map(|(ai, &a)| seeds.iter().map(move |&s| (ai, a, s)))
        .collect();
    let cells = par::map(exec, &grid, |&(ai, alpha, seed)| {
        let config = SynthConfig {
            alpha_gen: alpha,
            seed,
            ..base.clone()
        };
        let mut rng = cell_rng(seed, ai, 0);
        let mut cell = SweepCell {
            alpha,
            seed,
            gd: None,
            min_norm: None,
            error: None,
        };
        let data = match sample_dataset_with(&config, &mut rng) {
            Ok(d) => d,
            Err(e) => {
                cell.error = Some(e.to_string());
                return cell;
            }
        };
        let gd_w = match solver {
            Solver::ClosedForm => {
                GramSpectrum::new(&data).and_then(|g| g.closed_form(config.max_steps, g.step_size(config.eta_hat)))
            }
            Solver::Iterative => gd_train(&data, &config).map(|r| DVector::from_vec(r.weights_final)),
        };
        let mn_w = min_norm_solution(&data);
        let mut errors = Vec::new();
        let mut sol = |w: Result<DVector<f64>>| match w {
            Ok(w) => Some(w),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        };
        let gd_w = sol(gd_w);
        let mn_w = sol(mn_w);
        let test = test_errors(
            &data,
            &[gd_w.as_ref(), mn_w.as_ref()],
            test_size,
            &mut cell_rng(seed, ai, 1),
        );
        let metrics = |w: Option<&DVector<f64>>, test_mse: f64| {
            w.map(|w| FitMetrics {
                train_mse: train_mse(&data, w),
                test_mse,
                excess_risk: excess_risk(w, &data).expect("dimensions match"),
            })
        };
        cell.gd = metrics(gd_w.as_ref(), test[0]);
        cell.min_norm = metrics(mn_w.as_ref(), test[1]);
        if !errors.is_empty() {
            cell.error = Some(errors.join("; "));
        }
        cell
    });

    let summary = alphas
        .iter()
        .map(|&alpha| {
            let of_alpha: Vec<&SweepCell> = cells.iter().filter(|c| c.alpha == alpha).collect();
            let med = |pick: fn(&SweepCell) -> Option<FitMetrics>| {
                let ms: Vec<FitMetrics> = of_alpha.iter().filter_map(|c| pick(c)).collect();
                (!ms.is_empty()).then(|| FitMetrics {
                    train_mse: median(&ms.iter().map(|m| m.train_mse).collect::<Vec<_>>()),
                    test_mse: median(&ms.iter().map(|m| m.test_mse).collect::<Vec<_>>()),
                    excess_risk: median(&ms.iter().map(|m| m.excess_risk).collect::<Vec<_>>()),
                })
            };
            SweepSummary {
                alpha,
                gd: med(|c| c.gd),
                min_norm: med(|c| c.min_norm),
                cells_ok: of_alpha.iter().filter(|c| c.error.is_none()).count(),
            }
        })
        .collect();
    Ok(SweepReport {
        base: base.clone(),
        solver,
        test_size,
        cells,
        summary,
    })
}

/// Test MSE of each weight vector on one shared fresh sample, streamed row by row.
fn test_errors<R: rand::Rng>(
    data: &SynthDataset,
    weights: &[Option<&DVector<f64>>],
    size: usize,
    rng: &mut R,
) -> Vec<f64> {
    let sqrt_sigma = data.sqrt_sigma();
    let mut row = vec![0.0; data.d()];
    let mut sums = vec![0.0; weights.len()];
    for _ in 0..size {
        let y = data.draw_fresh(rng, &sqrt_sigma, &mut row);
        for (s, w) in sums.iter_mut().zip(weights) {
            if let Some(w) = w {
                let pred: f64 = row.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
                *s += (y - pred).powi(2);
            }
        }
    }
    sums.into_iter().map(|s| s / size as f64).collect()
}
