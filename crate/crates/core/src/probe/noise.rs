use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoisyLabels {
    pub labels: Vec<usize>,
    /// Positions whose label was changed, ascending.
    pub flipped: Vec<usize>,
}

/// Resamples exactly `floor(noise_frac * n)` uniformly chosen labels, each to
/// a class drawn uniformly from the `classes - 1` other classes.
pub fn inject_label_noise(labels: &[usize], classes: usize, noise_frac: f64, seed: u64) -> Result<NoisyLabels> {
    if classes < 2 {
        return Err(Error::TooFewClasses(classes));
    }
    if !(0.0..1.0).contains(&noise_frac) {
        return Err(Error::InvalidConfig(format!(
            "noise fraction must lie in [0, 1), got {noise_frac}"
        )));
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(Error::InvalidLabel { index, label, classes });
    }
    let n = labels.len();
    let count = (noise_frac * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flipped = index::sample(&mut rng, n, count).into_vec();
    flipped.sort_unstable();
    let mut out = labels.to_vec();
    for &i in &flipped {
        // draw from the k-1 other classes by skipping over the current one
        let r = rng.random_range(0..classes - 1);
        out[i] = if r >= labels[i] { r + 1 } else { r };
    }
    Ok(NoisyLabels { labels: out, flipped })
}
