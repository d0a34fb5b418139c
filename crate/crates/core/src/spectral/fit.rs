use serde::{Deserialize, Serialize};

use super::Eigenspectrum;
use crate::error::{Error, Result};
use crate::stats::fit_line;

/// Eigenvalues at or below this fraction of the leading one are treated as zero.
pub const ZERO_CUTOFF: f64 = 1e-12;
pub const MIN_FIT_POINTS: usize = 10;
/// Fits below this coefficient of determination are reported as weak power laws.
pub const WEAK_FIT_R2: f64 = 0.9;

/// Inclusive 1-based rank window for the log-log regression. Unset bounds use
/// the defaults `lo = max(2, ceil(m/100))` and `hi = ceil(m/2)` where `m`
/// counts the retained positive eigenvalues.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitRange {
    pub lo: Option<usize>,
    pub hi: Option<usize>,
}

impl FitRange {
    pub fn new(lo: Option<usize>, hi: Option<usize>) -> Self {
        Self { lo, hi }
    }

    fn resolve(&self, m_pos: usize) -> Result<(usize, usize)> {
        let lo = self.lo.unwrap_or_else(|| 2.max(m_pos.div_ceil(100)));
        let hi = self.hi.unwrap_or_else(|| m_pos.div_ceil(2)).min(m_pos);
        if lo == 0 || lo >= hi {
            return Err(Error::DegenerateRange { lo, hi });
        }
        Ok((lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub log_c: f64,
    pub fit_lo: usize,
    pub fit_hi: usize,
    pub r_squared: f64,
    pub n_dropped: usize,
}

impl PowerLawFit {
    pub fn is_weak(&self) -> bool {
        self.r_squared < WEAK_FIT_R2
    }

    pub fn record(&self, n: u64, d: usize) -> FitRecord {
        FitRecord {
            alpha: self.alpha,
            log_c: self.log_c,
            fit_lo: self.fit_lo,
            fit_hi: self.fit_hi,
            r2: self.r_squared,
            n_dropped: self.n_dropped,
            n,
            d,
            weak: self.is_weak(),
        }
    }
}

/// Flat JSON form of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub alpha: f64,
    pub log_c: f64,
    pub fit_lo: usize,
    pub fit_hi: usize,
    pub r2: f64,
    pub n_dropped: usize,
    pub n: u64,
    pub d: usize,
    #[serde(default)]
    pub weak: bool,
}

impl From<&FitRecord> for PowerLawFit {
    fn from(r: &FitRecord) -> Self {
        PowerLawFit {
            alpha: r.alpha,
            log_c: r.log_c,
            fit_lo: r.fit_lo,
            fit_hi: r.fit_hi,
            r_squared: r.r2,
            n_dropped: r.n_dropped,
        }
    }
}

/// OLS fit of `ln(lambda_i) = log_c - alpha * ln(i)` over the resolved rank window.
pub fn fit_power_law(spec: &Eigenspectrum, range: FitRange) -> Result<PowerLawFit> {
    let values = spec.values();
    let lead = spec.leading();
    if lead <= 0.0 {
        return Err(Error::TooFewPoints {
            usable: 0,
            required: MIN_FIT_POINTS,
        });
    }
    let cutoff = ZERO_CUTOFF * lead;
    // values are descending, so the retained ones form a prefix
    let m_pos = values.iter().take_while(|&&v| v > cutoff).count();
    let n_dropped = values.len() - m_pos;
    if m_pos < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            usable: m_pos,
            required: MIN_FIT_POINTS,
        });
    }
    let (lo, hi) = range.resolve(m_pos)?;
    let points = hi - lo + 1;
    if points < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            usable: points,
            required: MIN_FIT_POINTS,
        });
    }
    let xs: Vec<f64> = (lo..=hi).map(|i| (i as f64).ln()).collect();
    let ys: Vec<f64> = values[lo - 1..hi].iter().map(|v| v.ln()).collect();
    let line = fit_line(&xs, &ys).ok_or(Error::DegenerateRange { lo, hi })?;
    Ok(PowerLawFit {
        alpha: -line.slope,
        log_c: line.intercept,
        fit_lo: lo,
        fit_hi: hi,
        r_squared: line.r_squared,
        n_dropped,
    })
}
