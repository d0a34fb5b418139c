use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::noise::inject_label_noise;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::spectral::{eigenspectrum, CovarianceAccumulator, FitRange, PowerLawFit};

/// Features with integer class labels and a disjoint train/test split.
#[derive(Debug, Clone)]
pub struct LabeledFeatures {
    features: FeatureMatrix,
    labels: Vec<usize>,
    classes: usize,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl LabeledFeatures {
    pub fn new(
        features: FeatureMatrix,
        labels: Vec<usize>,
        classes: usize,
        train: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                got: labels.len(),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::InvalidLabel { index, label, classes });
        }
        let mut seen = vec![false; labels.len()];
        for &i in train.iter().chain(&test) {
            if i >= labels.len() {
                return Err(Error::InvalidConfig(format!("split index {i} out of range")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidConfig(format!("sample {i} appears twice in the split")));
            }
        }
        Ok(Self {
            features,
            labels,
            classes,
            train,
            test,
        })
    }

    /// Shuffles all rows with `seed` and holds out `test_frac` of them.
    /// `classes` defaults to one more than the largest label.
    pub fn random_split(
        features: FeatureMatrix,
        labels: Vec<usize>,
        classes: Option<usize>,
        test_frac: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&test_frac) {
            return Err(Error::InvalidConfig(format!(
                "test fraction must lie in [0, 1), got {test_frac}"
            )));
        }
        let classes = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        let mut idx: Vec<usize> = (0..labels.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = (test_frac * labels.len() as f64).round() as usize;
        let test = idx.split_off(labels.len() - n_test);
        Self::new(features, labels, classes, idx, test)
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Fraction of train labels resampled before training.
    pub noise_frac: f64,
    pub seed: u64,
    /// Estimate alpha of the probed features as part of the run.
    pub estimate_alpha: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            noise_frac: 0.0,
            seed: 0,
            estimate_alpha: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Accuracy against the (possibly noisy) labels the readout was trained on.
    pub train_acc: f64,
    /// Accuracy against clean test labels.
    pub test_acc: f64,
    pub epochs: usize,
    pub noise_frac: f64,
    pub n_flipped: usize,
    pub alpha_of_features: Option<PowerLawFit>,
    /// Why alpha is missing when `alpha_of_features` is `None`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_error: Option<String>,
}

fn design(features: &FeatureMatrix, rows: &[usize]) -> DMatrix<f64> {
    let d = features.cols();
    DMatrix::from_fn(rows.len(), d, |i, j| features.row(rows[i])[j])
}

/// Row-wise softmax in place.
fn softmax_rows(logits: &mut DMatrix<f64>) {
    for mut row in logits.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let s = row.sum();
        row /= s;
    }
}

fn predict(x: &DMatrix<f64>, w: &DMatrix<f64>, b: &DVector<f64>) -> Vec<usize> {
    let logits = x * w;
    logits
        .row_iter()
        .map(|r| {
            let mut best = 0;
            for j in 1..r.len() {
                if r[j] + b[j] > r[best] + b[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

/// Multinomial logistic readout (weights `D x k` plus bias) trained by
/// full-batch gradient descent on the softmax cross-entropy, starting from
/// zero. Label noise is applied to the train split only.
pub fn train_linear_probe(data: &LabeledFeatures, config: &ProbeConfig) -> Result<ProbeResult> {
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be > 0, got {}",
            config.learning_rate
        )));
    }
    let k = data.classes;
    let clean: Vec<usize> = data.train.iter().map(|&i| data.labels[i]).collect();
    let first = clean.first().copied();
    if k < 2 || first.is_none() || clean.iter().all(|&l| Some(l) == first) {
        return Err(Error::SingleClass);
    }
    let noisy = inject_label_noise(&clean, k, config.noise_frac, config.seed)?;
    let x = design(&data.features, &data.train);
    let n = x.nrows() as f64;
    let mut target = DMatrix::zeros(x.nrows(), k);
    for (i, &l) in noisy.labels.iter().enumerate() {
        target[(i, l)] = 1.0;
    }
    let xt = x.transpose();
    let mut w = DMatrix::zeros(x.ncols(), k);
    let mut b = DVector::zeros(k);
    for _ in 0..config.epochs {
        let mut p = &x * &w;
        for mut row in p.row_iter_mut() {
            row += b.transpose();
        }
        softmax_rows(&mut p);
        p -= &target;
        let grad_w = &xt * &p / n;
        let grad_b = p.row_sum().transpose() / n;
        w -= &grad_w * config.learning_rate;
        b.axpy(-config.learning_rate, &grad_b, 1.0);
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            step: config.epochs as u64,
            mse: f64::NAN,
            min_mse: f64::NAN,
        });
    }
    let train_acc = accuracy(&predict(&x, &w, &b), &noisy.labels);
    let test_truth: Vec<usize> = data.test.iter().map(|&i| data.labels[i]).collect();
    let test_acc = accuracy(&predict(&design(&data.features, &data.test), &w, &b), &test_truth);

    let (alpha_of_features, alpha_error) = if config.estimate_alpha {
        match feature_alpha(&data.features) {
            Ok(fit) => (Some(fit), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    Ok(ProbeResult {
        train_acc,
        test_acc,
        epochs: config.epochs,
        noise_frac: config.noise_frac,
        n_flipped: noisy.flipped.len(),
        alpha_of_features,
        alpha_error,
    })
}

fn feature_alpha(features: &FeatureMatrix) -> Result<PowerLawFit> {
    let mut acc = CovarianceAccumulator::new(features.cols())?;
    acc.accumulate_batch(features)?;
    let spec = eigenspectrum(&acc.finalize()?, acc.count())?;
    crate::spectral::fit_power_law(&spec, FitRange::default())
}
