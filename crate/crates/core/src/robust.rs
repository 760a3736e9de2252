//! Huber M-estimation of pooled leave-one-out residuals, used to select the
//! fusion tolerance between the interpolated prior and the low-rank model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};

/// Huber transition threshold: fixed, or resolved from the data as the
/// median absolute deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HuberThreshold<T> {
    Fixed(T),
    AutoMad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuberConfig<T> {
    pub threshold: HuberThreshold<T>,
    pub max_iters: usize,
    /// Convergence tolerance on successive center estimates.
    pub tol: T,
}

impl<T: Scalar> Default for HuberConfig<T> {
    fn default() -> Self {
        Self {
            threshold: HuberThreshold::AutoMad,
            max_iters: 100,
            tol: cast::<T>(1e-8),
        }
    }
}

impl<T: Scalar> HuberConfig<T> {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if let HuberThreshold::Fixed(t) = self.threshold {
            if !(t > T::zero()) {
                return Err(Error::invalid("Huber threshold must be positive"));
            }
        }
        Ok(())
    }
}

/// Huber loss: quadratic within `threshold`, linear beyond it.
pub fn huber_loss<T: Scalar>(r: T, threshold: T) -> Result<T> {
    if !(threshold > T::zero()) {
        return Err(Error::invalid("Huber threshold must be positive"));
    }
    let half = cast::<T>(0.5);
    Ok(if r.abs() <= threshold {
        half * r * r
    } else {
        threshold * (r.abs() - half * threshold)
    })
}

fn median_of_sorted<T: Scalar>(sorted: &[T]) -> T {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / cast::<T>(2.0)
    }
}

/// Sample median; even-length lists take the midpoint of the two central
/// order statistics.
pub fn median<T: Scalar>(values: &[T]) -> Result<T> {
    if values.is_empty() {
        return Err(Error::invalid("median of an empty list"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(median_of_sorted(&sorted))
}

/// Median absolute deviation from the median.
pub fn mad<T: Scalar>(values: &[T]) -> Result<T> {
    let m = median(values)?;
    let deviations: Vec<T> = values.iter().map(|&v| (v - m).abs()).collect();
    median(&deviations)
}

/// Outcome of the iteratively reweighted least squares fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuberEstimate<T> {
    pub center: T,
    /// Threshold actually used, after auto-MAD resolution.
    pub threshold: T,
    pub iterations: usize,
    pub converged: bool,
}

fn resolve_threshold<T: Scalar>(values: &[T], cfg: &HuberConfig<T>) -> Result<T> {
    match cfg.threshold {
        HuberThreshold::Fixed(t) => Ok(t),
        HuberThreshold::AutoMad => {
            let m = mad(values)?;
            if m > T::zero() {
                return Ok(m);
            }
            // Degenerate MAD: fall back to a floored mean absolute deviation.
            let center = median(values)?;
            let mean_ad = values.iter().map(|&v| (v - center).abs()).sum::<T>()
                / cast::<T>(values.len() as f64);
            Ok(cast::<T>(1e-6) + cast::<T>(1.4826) * mean_ad)
        }
    }
}

/// Minimizes the aggregated Huber loss over a scalar center by IRLS,
/// starting from the median. Non-convergence within `max_iters` returns the
/// last iterate flagged `converged: false`.
pub fn huber_estimate<T: Scalar>(values: &[T], cfg: &HuberConfig<T>) -> Result<HuberEstimate<T>> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::invalid("Huber estimate of an empty list"));
    }
    let threshold = resolve_threshold(values, cfg)?;
    let mut mu = median(values)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        iterations += 1;
        let mut num = T::zero();
        let mut den = T::zero();
        for &e in values {
            let dev = (e - mu).abs();
            let w = if dev <= threshold { T::one() } else { threshold / dev };
            num += w * e;
            den += w;
        }
        let next = num / den;
        let step = (next - mu).abs();
        mu = next;
        if step <= cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(HuberEstimate {
        center: mu,
        threshold,
        iterations,
        converged,
    })
}

/// Tolerance selection diagnostics, persisted alongside reconstruction
/// results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSelection<T> {
    pub delta: T,
    pub threshold: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Selects the fusion tolerance as the Huber center of the absolute pooled
/// residuals. Absolute values are used because the robust center of signed
/// residuals of an unbiased interpolant sits near zero, which would collapse
/// the constraint box.
pub fn select_delta<T: Scalar>(pooled_residuals: &[T], cfg: &HuberConfig<T>) -> Result<DeltaSelection<T>> {
    if pooled_residuals.is_empty() {
        return Err(Error::invalid("tolerance selection needs residuals"));
    }
    let abs: Vec<T> = pooled_residuals.iter().map(|&e| e.abs()).collect();
    let est = huber_estimate(&abs, cfg)?;
    Ok(DeltaSelection {
        delta: est.center.max(T::zero()),
        threshold: est.threshold,
        iterations: est.iterations,
        converged: est.converged,
    })
}
