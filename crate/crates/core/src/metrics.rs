//! Reconstruction quality metrics.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};

/// Normalized mean squared error between two dB matrices, computed in
/// linear power scale: `||10^(T/10) - 10^(E/10)||_F^2 / ||10^(T/10)||_F^2`.
pub fn nmse<T: Scalar>(truth: &DMatrix<T>, estimate: &DMatrix<T>) -> Result<T> {
    if truth.shape() != estimate.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", truth.nrows(), truth.ncols()),
            actual: format!("{}x{}", estimate.nrows(), estimate.ncols()),
        });
    }
    if truth.iter().chain(estimate.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("NMSE inputs must be finite"));
    }
    let ln10_over_10 = cast::<T>(std::f64::consts::LN_10 / 10.0);
    let mut num = T::zero();
    let mut den = T::zero();
    for (&t, &e) in truth.iter().zip(estimate.iter()) {
        let lt = (t * ln10_over_10).exp();
        let le = (e * ln10_over_10).exp();
        num += (lt - le) * (lt - le);
        den += lt * lt;
    }
    if !(den > T::zero()) {
        return Err(Error::invalid("truth matrix has zero linear energy"));
    }
    Ok(num / den)
}

/// Fraction of the singular value sum carried by the `k` largest singular
/// values.
pub fn singular_energy<T: Scalar>(m: &DMatrix<T>, k: usize) -> Result<T> {
    if k == 0 || k > m.nrows().min(m.ncols()) {
        return Err(Error::invalid(format!(
            "k = {k} outside 1..={}",
            m.nrows().min(m.ncols())
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let sv = m.clone().singular_values();
    let mut sorted: Vec<T> = sv.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    let total: T = sorted.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::invalid("zero matrix has no singular energy"));
    }
    let top: T = sorted.iter().take(k).copied().sum();
    Ok(top / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::Rng;

    #[test]
    fn nmse_basics() {
        let truth = DMatrix::<f64>::from_fn(4, 4, |i, j| -80.0 - (i + j) as f64);
        assert_eq!(nmse(&truth, &truth).unwrap(), 0.0);
        let shifted = truth.map(|v| v + 10.0);
        // +10 dB is a linear factor of 10, so NMSE = (10 - 1)^2 = 81
        assert_relative_eq!(nmse(&truth, &shifted).unwrap(), 81.0, max_relative = 1e-12);
        let wrong = DMatrix::<f64>::zeros(3, 4);
        assert!(nmse(&truth, &wrong).is_err());
    }

    #[test]
    fn nmse_matches_elementwise_oracle() {
        let mut rng = stream_rng(1, 0x33, 0);
        let truth = DMatrix::<f64>::from_fn(5, 5, |_, _| -100.0 + 30.0 * rng.random::<f64>());
        let est = DMatrix::<f64>::from_fn(5, 5, |_, _| -100.0 + 30.0 * rng.random::<f64>());
        let got = nmse(&truth, &est).unwrap();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for (t, e) in truth.iter().zip(est.iter()) {
            let lt = 10.0f64.powf(t / 10.0);
            let le = 10.0f64.powf(e / 10.0);
            num += (lt - le).powi(2);
            den += lt * lt;
        }
        assert_relative_eq!(got, num / den, max_relative = 1e-12);
    }

    #[test]
    fn nmse_invariant_to_common_db_shift() {
        let mut rng = stream_rng(2, 0x33, 0);
        let truth = DMatrix::<f64>::from_fn(6, 6, |_, _| -90.0 + 10.0 * rng.random::<f64>());
        let est = truth.map(|v| v + rng.random::<f64>());
        let base = nmse(&truth, &est).unwrap();
        let shifted = nmse(&truth.map(|v| v + 17.0), &est.map(|v| v + 17.0)).unwrap();
        assert_relative_eq!(base, shifted, max_relative = 1e-10);
    }

    #[test]
    fn singular_energy_basics() {
        let diag = DMatrix::from_diagonal(&DVector::from_column_slice(&[3.0f64, 1.0]));
        assert_relative_eq!(singular_energy(&diag, 1).unwrap(), 0.75, epsilon = 1e-12);
        assert_relative_eq!(singular_energy(&diag, 2).unwrap(), 1.0, epsilon = 1e-12);
        let u = DVector::from_column_slice(&[1.0f64, 2.0, 3.0]);
        let rank1 = &u * u.transpose();
        assert_relative_eq!(singular_energy(&rank1, 1).unwrap(), 1.0, epsilon = 1e-10);
        assert!(singular_energy(&diag, 0).is_err());
        assert!(singular_energy(&diag, 3).is_err());
    }

    #[test]
    fn singular_energy_monotone_in_k() {
        let mut rng = stream_rng(3, 0x33, 0);
        let m = DMatrix::<f64>::from_fn(8, 6, |_, _| rng.random::<f64>());
        let mut prev = 0.0;
        for k in 1..=6 {
            let e = singular_energy(&m, k).unwrap();
            assert!(e >= prev);
            prev = e;
        }
        assert_relative_eq!(prev, 1.0, epsilon = 1e-12);
    }
}
