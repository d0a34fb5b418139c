use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::stats::ranks;

/// Below this many points the p-value approximations are flagged.
const APPROX_BELOW: usize = 10;
const MIN_POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaAccuracy {
    pub alpha: f64,
    pub accuracy: f64,
    #[serde(default)]
    pub tag: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationStats {
    pub n: usize,
    pub pearson_rho: f64,
    pub spearman_rho: f64,
    /// Two-sided, Student t approximation with `n - 2` degrees of freedom.
    pub pearson_p: f64,
    /// Two-sided, large-sample normal approximation.
    pub spearman_p: f64,
    /// Set when `n < 10`, where both p-values are rough.
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status")]
pub enum SubsetCorrelation {
    Ok(CorrelationStats),
    Insufficient { n: usize },
    Undefined { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pairs: Vec<AlphaAccuracy>,
    pub overall: CorrelationStats,
    /// Points with `alpha >= 1`.
    pub above_one: SubsetCorrelation,
    /// Points with `alpha < 1`.
    pub below_one: SubsetCorrelation,
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("alpha"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("accuracy"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    let (rx, ry) = (ranks(x), ranks(y));
    let tied = |r: &[f64]| {
        r.iter().any(|v| v.fract() != 0.0) || {
            let mut s = r.to_vec();
            s.sort_by(f64::total_cmp);
            s.windows(2).any(|w| w[0] == w[1])
        }
    };
    if tied(&rx) || tied(&ry) {
        return pearson(&rx, &ry);
    }
    // no ties: the rank-difference formula is exact in integer arithmetic
    let n = x.len() as u64;
    let d2: u64 = rx
        .iter()
        .zip(&ry)
        .map(|(a, b)| (a - b).abs() as u64)
        .map(|d| d * d)
        .sum();
    Ok(1.0 - (6 * d2) as f64 / (n * (n * n - 1)) as f64)
}

fn stats(x: &[f64], y: &[f64]) -> Result<CorrelationStats> {
    let n = x.len();
    if n < MIN_POINTS {
        return Err(Error::TooFewPairs {
            got: n,
            required: MIN_POINTS,
        });
    }
    let r = pearson(x, y)?;
    let rs = spearman(x, y)?;
    let df = (n - 2) as f64;
    let pearson_p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        2.0 * dist.sf(t.abs())
    };
    let z = rs * ((n - 1) as f64).sqrt();
    let spearman_p = 2.0 * Normal::standard().sf(z.abs());
    Ok(CorrelationStats {
        n,
        pearson_rho: r,
        spearman_rho: rs,
        pearson_p: pearson_p.min(1.0),
        spearman_p: spearman_p.min(1.0),
        approximate: n < APPROX_BELOW,
    })
}

fn subset(points: &[&AlphaAccuracy]) -> SubsetCorrelation {
    if points.len() < MIN_POINTS {
        return SubsetCorrelation::Insufficient { n: points.len() };
    }
    let x: Vec<f64> = points.iter().map(|p| p.alpha).collect();
    let y: Vec<f64> = points.iter().map(|p| p.accuracy).collect();
    match stats(&x, &y) {
        Ok(s) => SubsetCorrelation::Ok(s),
        Err(e) => SubsetCorrelation::Undefined { reason: e.to_string() },
    }
}

/// Pearson and Spearman correlation of alpha against accuracy, overall and
/// split at `alpha = 1`.
pub fn correlate_alpha_accuracy(pairs: &[AlphaAccuracy]) -> Result<CorrelationReport> {
    if let Some(p) = pairs.iter().find(|p| !p.alpha.is_finite() || !p.accuracy.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite point in '{}'", p.tag)));
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.alpha).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.accuracy).collect();
    let overall = stats(&x, &y)?;
    let (above, below): (Vec<&AlphaAccuracy>, Vec<&AlphaAccuracy>) = pairs.iter().partition(|p| p.alpha >= 1.0);
    Ok(CorrelationReport {
        pairs: pairs.to_vec(),
        overall,
        above_one: subset(&above),
        below_one: subset(&below),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<AlphaAccuracy> {
        v.iter()
            .enumerate()
            .map(|(i, &(alpha, accuracy))| AlphaAccuracy {
                alpha,
                accuracy,
                tag: format!("p{i}"),
            })
            .collect()
    }

    #[test]
    fn perfect_linear() {
        let r = correlate_alpha_accuracy(&pts(&[(1.0, 0.1), (2.0, 0.2), (3.0, 0.3)])).unwrap();
        assert!((r.overall.pearson_rho - 1.0).abs() < 1e-12);
        assert!(r.overall.pearson_p < 1e-6);
        assert!(r.overall.approximate);
    }

    #[test]
    fn decreasing_spearman() {
        let r = correlate_alpha_accuracy(&pts(&[(0.1, 0.9), (0.5, 0.8), (2.0, 0.1), (7.0, 0.05)])).unwrap();
        assert_eq!(r.overall.spearman_rho, -1.0);
    }

    #[test]
    fn hand_set() {
        // Sxy = 0.04, Sxx = 61/150, Syy = 0.02  =>  r = sqrt(12/61);
        // ranks (1,2,3) vs (1,3,2)  =>  rho_s = 1 - 6*2/(3*8) = 0.5
        let r = correlate_alpha_accuracy(&pts(&[(0.5, 0.6), (0.9, 0.8), (1.4, 0.7)])).unwrap();
        assert!((r.overall.pearson_rho - (12.0f64 / 61.0).sqrt()).abs() < 1e-12);
        assert_eq!(r.overall.spearman_rho, 0.5);
        // df = 1: t distribution is Cauchy, p = 1 - (2/pi) atan(|t|)
        let t = r.overall.pearson_rho * (1.0f64 / (1.0 - 12.0 / 61.0)).sqrt();
        let p = 1.0 - 2.0 / std::f64::consts::PI * t.atan();
        assert!((r.overall.pearson_p - p).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_is_an_error() {
        let e = correlate_alpha_accuracy(&pts(&[(1.0, 0.5), (2.0, 0.5), (3.0, 0.5)])).unwrap_err();
        assert!(matches!(e, Error::ZeroVariance("accuracy")));
        let e = correlate_alpha_accuracy(&pts(&[(1.0, 0.5), (1.0, 0.6), (1.0, 0.7)])).unwrap_err();
        assert!(matches!(e, Error::ZeroVariance("alpha")));
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            correlate_alpha_accuracy(&pts(&[(1.0, 0.5), (2.0, 0.6)])),
            Err(Error::TooFewPairs { got: 2, .. })
        ));
    }

    #[test]
    fn regime_split() {
        let r = correlate_alpha_accuracy(&pts(&[(0.2, 0.3), (0.5, 0.5), (0.8, 0.7), (1.0, 0.9), (1.5, 0.6)])).unwrap();
        assert!(matches!(r.below_one, SubsetCorrelation::Ok(s) if s.n == 3 && s.pearson_rho > 0.99));
        assert_eq!(r.above_one, SubsetCorrelation::Insufficient { n: 2 });
        let r = correlate_alpha_accuracy(&pts(&[(0.2, 0.3), (0.5, 0.3), (0.8, 0.3), (1.2, 0.9)])).unwrap();
        assert!(matches!(r.below_one, SubsetCorrelation::Undefined { .. }));
    }

    proptest! {
        #[test]
        fn symmetric_and_scale_free(
            v in prop::collection::vec((0.0f64..3.0, 0.0f64..1.0), 3..30),
            a in 0.1f64..10.0,
            b in 0.1f64..10.0,
        ) {
            let base = pts(&v);
            let swapped = pts(&v.iter().map(|&(x, y)| (y, x)).collect::<Vec<_>>());
            let scaled = pts(&v.iter().map(|&(x, y)| (a * x, b * y)).collect::<Vec<_>>());
            let cubed = pts(&v.iter().map(|&(x, y)| (x.powi(3) + x, y.exp())).collect::<Vec<_>>());
            if let (Ok(r0), Ok(r1), Ok(r2), Ok(r3)) = (
                correlate_alpha_accuracy(&base),
                correlate_alpha_accuracy(&swapped),
                correlate_alpha_accuracy(&scaled),
                correlate_alpha_accuracy(&cubed),
            ) {
                let (o0, o1, o2, o3) = (r0.overall, r1.overall, r2.overall, r3.overall);
                prop_assert!(o0.pearson_rho.abs() <= 1.0);
                prop_assert!((o0.pearson_rho - o1.pearson_rho).abs() < 1e-9);
                prop_assert!((o0.spearman_rho - o1.spearman_rho).abs() < 1e-9);
                prop_assert!((o0.pearson_rho - o2.pearson_rho).abs() < 1e-9);
                prop_assert!((o0.spearman_rho - o2.spearman_rho).abs() < 1e-9);
                prop_assert!((o0.spearman_rho - o3.spearman_rho).abs() < 1e-9);
            }
        }
    }
}
