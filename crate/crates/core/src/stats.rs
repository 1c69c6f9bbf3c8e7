//! Small numeric helpers shared by the inference modules.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Standard normal quantile `Φ⁻¹(p)`.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Two-sided critical value `z_{(1+level)/2}`.
pub fn two_sided_z(level: f64) -> Result<f64> {
    check_level(level)?;
    Ok(normal_quantile(0.5 * (1.0 + level)))
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level.is_finite() && level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("level must lie in (0, 1), got {level}")))
    }
}

/// Sample quantile with linear interpolation between order statistics
/// (the `h = (n - 1) q` rule). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Equal-tailed interval of the draws at the given level. Sorts in place.
pub fn equal_tailed(draws: &mut [f64], level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    if draws.is_empty() {
        return Err(Error::invalid("no draws to summarize"));
    }
    draws.sort_unstable_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    Ok((
        quantile_sorted(draws, tail),
        quantile_sorted(draws, 1.0 - tail),
    ))
}

/// Mean and unbiased sample variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, ss / (n - 1.0))
}
