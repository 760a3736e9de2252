//! Regularized radial-basis-function interpolation along radial slices.
//!
//! Each angular slice is fit independently: the interpolant is a kernel
//! expansion over the observed radii plus a constant term, with the kernel
//! weights constrained to sum to zero. The constant absorbs the global dB
//! offset, which stabilizes the fit near the domain boundaries.
//!
//! Radii are rescaled per slice so that the smallest node gap becomes unit
//! distance before kernel evaluation. This keeps the kernel matrix
//! conditioning independent of physical units, sample count, and node
//! clustering: with an absolute length scale, two nearly coincident samples
//! with different values force enormous opposing weights whose cancellation
//! fails away from the pair, swinging the interpolant by hundreds of dB.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::GridSpec;
use crate::error::{Error, Result};
use crate::sampling::Observations;
use crate::scalar::{cast, Scalar};

/// Condition-estimate ceiling beyond which a slice system is reported as
/// numerically singular.
const CONDITION_LIMIT: f64 = 1e14;

/// Radial basis kernels supported by the slice fitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `sqrt(1 + eps d^2)`
    Multiquadric,
    /// `exp(-eps d^2)`
    Gaussian,
    /// `d^2 ln d`, zero at the origin; has no shape parameter.
    ThinPlateSpline,
}

impl Kernel {
    pub fn eval<T: Scalar>(self, distance: T, epsilon: T) -> T {
        match self {
            Kernel::Multiquadric => kernel_multiquadric(distance, epsilon),
            Kernel::Gaussian => (-epsilon * distance * distance).exp(),
            Kernel::ThinPlateSpline => {
                if distance <= T::zero() {
                    T::zero()
                } else {
                    distance * distance * distance.ln()
                }
            }
        }
    }

    fn has_shape_parameter(self) -> bool {
        !matches!(self, Kernel::ThinPlateSpline)
    }

    pub fn label(self) -> &'static str {
        match self {
            Kernel::Multiquadric => "multiquadric",
            Kernel::Gaussian => "gaussian",
            Kernel::ThinPlateSpline => "tps",
        }
    }
}

/// Multiquadric kernel `sqrt(1 + eps d^2)`; even in `d` and at least 1.
pub fn kernel_multiquadric<T: Scalar>(distance: T, epsilon: T) -> T {
    (T::one() + epsilon * distance * distance).sqrt()
}

/// Measurements along one angular slice: strictly increasing radii and the
/// matching dB values, at least two of each.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceMeasurements<T> {
    theta_index: usize,
    radii: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> SliceMeasurements<T> {
    pub fn new(theta_index: usize, radii: Vec<T>, values: Vec<T>) -> Result<Self> {
        if radii.len() != values.len() {
            return Err(Error::invalid(format!(
                "slice {theta_index}: {} radii vs {} values",
                radii.len(),
                values.len()
            )));
        }
        if radii.len() < 2 {
            return Err(Error::DegenerateSlice {
                slice: theta_index,
                len: radii.len(),
                min: 2,
            });
        }
        if radii.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(format!(
                "slice {theta_index}: radii must be strictly increasing"
            )));
        }
        Ok(Self {
            theta_index,
            radii,
            values,
        })
    }

    pub fn theta_index(&self) -> usize {
        self.theta_index
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn radii(&self) -> &[T] {
        &self.radii
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Copy with the `k`-th measurement removed.
    pub fn without(&self, k: usize) -> Result<Self> {
        if self.radii.len() <= 2 {
            return Err(Error::DegenerateSlice {
                slice: self.theta_index,
                len: self.radii.len(),
                min: 3,
            });
        }
        let mut radii = self.radii.clone();
        let mut values = self.values.clone();
        radii.remove(k);
        values.remove(k);
        Self::new(self.theta_index, radii, values)
    }
}

/// Fit configuration: kernel, its shape parameter, and whether the constant
/// term (with the zero-sum weight constraint) is used.
///
/// `epsilon` applies to slice-normalized distances, i.e. in units of the
/// slice's smallest node gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfConfig<T> {
    pub kernel: Kernel,
    pub epsilon: T,
    pub constant_term: bool,
}

impl<T: Scalar> Default for RbfConfig<T> {
    fn default() -> Self {
        Self {
            kernel: Kernel::Multiquadric,
            epsilon: T::one(),
            constant_term: true,
        }
    }
}

impl<T: Scalar> RbfConfig<T> {
    pub fn with_kernel(kernel: Kernel, epsilon: T) -> Self {
        Self {
            kernel,
            epsilon,
            constant_term: true,
        }
    }

    /// Plain interpolation without the constant term or zero-sum constraint.
    pub fn unregularized() -> Self {
        Self {
            constant_term: false,
            ..Self::default()
        }
    }
}

/// Fitted interpolant for one angular slice.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfSliceModel<T> {
    centers: Vec<T>,
    lambda: Vec<T>,
    constant: T,
    epsilon: T,
    kernel: Kernel,
    norm_lo: T,
    /// Distance unit of the fit: the smallest gap between adjacent centers.
    norm_unit: T,
}

impl<T: Scalar> RbfSliceModel<T> {
    /// Center radii in meters.
    pub fn centers(&self) -> &[T] {
        &self.centers
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn constant(&self) -> T {
        self.constant
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// Sum of the kernel weights; zero (up to solver accuracy) for
    /// constant-term fits.
    pub fn lambda_sum(&self) -> T {
        self.lambda.iter().copied().sum()
    }
}

/// Solves the interpolation system for one slice.
///
/// With the constant term the conditions are `Phi lambda + c 1 = gamma` and
/// `1^T lambda = 0`, solved as one bordered linear system by LU with partial
/// pivoting. A condition estimate above `1e14` is reported as an error
/// naming the slice.
pub fn fit_slice<T: Scalar>(meas: &SliceMeasurements<T>, cfg: &RbfConfig<T>) -> Result<RbfSliceModel<T>> {
    if cfg.kernel.has_shape_parameter() && cfg.epsilon <= T::zero() {
        return Err(Error::invalid("kernel shape parameter must be positive"));
    }
    let k = meas.len();
    let radii = meas.radii();
    let lo = radii[0];
    let unit = min_gap(radii);
    let x: Vec<T> = radii.iter().map(|&r| (r - lo) / unit).collect();

    let n = if cfg.constant_term { k + 1 } else { k };
    let mut a = DMatrix::<T>::zeros(n, n);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] = cfg.kernel.eval((x[i] - x[j]).abs(), cfg.epsilon);
        }
    }
    if cfg.constant_term {
        for i in 0..k {
            a[(i, k)] = T::one();
            a[(k, i)] = T::one();
        }
    }
    let mut b = DVector::<T>::zeros(n);
    for (i, &v) in meas.values().iter().enumerate() {
        b[i] = v;
    }

    let sv = a.clone().singular_values();
    let (mut s_max, mut s_min) = (T::zero(), T::zero());
    for (idx, &s) in sv.iter().enumerate() {
        if idx == 0 {
            s_max = s;
            s_min = s;
        } else {
            s_max = s_max.max(s);
            s_min = s_min.min(s);
        }
    }
    let cond = if s_min > T::zero() {
        (s_max / s_min).to_f64().unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    if cond > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            slice: meas.theta_index(),
            cond,
        });
    }

    let sol = a.clone().lu().solve(&b).ok_or(Error::IllConditioned {
        slice: meas.theta_index(),
        cond,
    })?;
    let gamma_norm = b.norm();
    let residual = (&a * &sol - &b).norm();
    if residual > cast::<T>(1e-8) * (T::one() + gamma_norm) {
        return Err(Error::IllConditioned {
            slice: meas.theta_index(),
            cond,
        });
    }

    let lambda: Vec<T> = (0..k).map(|i| sol[i]).collect();
    let constant = if cfg.constant_term { sol[k] } else { T::zero() };
    Ok(RbfSliceModel {
        centers: radii.to_vec(),
        lambda,
        constant,
        epsilon: cfg.epsilon,
        kernel: cfg.kernel,
        norm_lo: lo,
        norm_unit: unit,
    })
}

/// Smallest gap between adjacent sorted radii.
fn min_gap<T: Scalar>(radii: &[T]) -> T {
    let mut gap = radii[1] - radii[0];
    for w in radii.windows(2) {
        gap = gap.min(w[1] - w[0]);
    }
    gap
}

/// Evaluates the slice interpolant at radius `d` (meters).
pub fn evaluate<T: Scalar>(model: &RbfSliceModel<T>, d: T) -> T {
    let u = (d - model.norm_lo) / model.norm_unit;
    let mut acc = model.constant;
    for (&c, &l) in model.centers.iter().zip(&model.lambda) {
        let uc = (c - model.norm_lo) / model.norm_unit;
        acc += l * model.kernel.eval((u - uc).abs(), model.epsilon);
    }
    acc
}

/// Interpolates every angular slice onto the full radial grid, producing the
/// prior matrix. Fully observed slices are returned as measured.
pub fn interpolate_map<T: Scalar>(
    obs: &Observations<T>,
    grid: &GridSpec<T>,
    cfg: &RbfConfig<T>,
) -> Result<DMatrix<T>> {
    interpolate_map_with(obs, grid, |meas| {
        let model = fit_slice(meas, cfg)?;
        Ok(move |d| evaluate(&model, d))
    })
}

/// Shared slice-interpolation driver: `make_predictor` turns one slice's
/// measurements into a radial predictor.
pub(crate) fn interpolate_map_with<T, F, P>(
    obs: &Observations<T>,
    grid: &GridSpec<T>,
    make_predictor: F,
) -> Result<DMatrix<T>>
where
    T: Scalar,
    F: Fn(&SliceMeasurements<T>) -> Result<P> + Sync,
    P: Fn(T) -> T,
{
    let mask = obs.mask();
    if mask.n_theta() != grid.n_theta || mask.n_r() != grid.n_r {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} grid", grid.n_theta, grid.n_r),
            actual: format!("{}x{} mask", mask.n_theta(), mask.n_r()),
        });
    }
    let radii = grid.radii();
    let rows: Vec<Vec<T>> = (0..grid.n_theta)
        .into_par_iter()
        .map(|i| -> Result<Vec<T>> {
            if mask.slice(i).len() == grid.n_r {
                return Ok(obs.slice_values(i).to_vec());
            }
            let meas = obs.slice_measurements(i, grid)?;
            let predict = make_predictor(&meas)?;
            Ok(radii.iter().map(|&r| predict(r)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(grid.n_theta, grid.n_r, |i, j| rows[i][j]))
}

/// Leave-one-out prediction errors `e_k = gamma_k - rho_{-k}(r_k)` for one
/// slice; requires at least three samples so every reduced fit keeps two.
pub fn loocv_residuals<T: Scalar>(meas: &SliceMeasurements<T>, cfg: &RbfConfig<T>) -> Result<Vec<T>> {
    if meas.len() < 3 {
        return Err(Error::DegenerateSlice {
            slice: meas.theta_index(),
            len: meas.len(),
            min: 3,
        });
    }
    (0..meas.len())
        .map(|k| {
            let reduced = meas.without(k)?;
            let model = fit_slice(&reduced, cfg)?;
            Ok(meas.values()[k] - evaluate(&model, meas.radii()[k]))
        })
        .collect()
}

/// Leave-one-out residuals pooled over all angular slices.
#[derive(Debug, Clone, PartialEq)]
pub struct LoocvPool<T> {
    /// Residuals in slice order, then sample order within the slice.
    pub residuals: Vec<T>,
    /// Slices with exactly two samples contribute no residuals.
    pub skipped_slices: Vec<usize>,
}

/// Runs leave-one-out cross-validation on every slice and pools the errors.
pub fn pool_loocv<T: Scalar>(
    obs: &Observations<T>,
    grid: &GridSpec<T>,
    cfg: &RbfConfig<T>,
) -> Result<LoocvPool<T>> {
    let mask = obs.mask();
    let per_slice: Vec<(usize, Option<Vec<T>>)> = (0..mask.n_theta())
        .into_par_iter()
        .map(|i| -> Result<(usize, Option<Vec<T>>)> {
            if mask.slice(i).len() == 2 {
                return Ok((i, None));
            }
            let meas = obs.slice_measurements(i, grid)?;
            Ok((i, Some(loocv_residuals(&meas, cfg)?)))
        })
        .collect::<Result<_>>()?;
    let mut pool = LoocvPool {
        residuals: Vec::new(),
        skipped_slices: Vec::new(),
    };
    for (i, res) in per_slice {
        match res {
            Some(r) => pool.residuals.extend(r),
            None => pool.skipped_slices.push(i),
        }
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_slice(k: usize, seed: u64) -> SliceMeasurements<f64> {
        let mut rng = stream_rng(seed, 0xBF, 0);
        let mut radii: Vec<f64> = (0..k).map(|_| 0.5 + 9.0 * rng.random::<f64>()).collect();
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // keep nodes separated so the system stays comfortably conditioned
        let mut kept: Vec<f64> = Vec::new();
        for r in radii {
            if kept.last().map_or(true, |&p| r - p > 0.05) {
                kept.push(r);
            }
        }
        let values = kept.iter().map(|r| -80.0 - 10.0 * r.ln() + (r * 2.1).sin()).collect();
        SliceMeasurements::new(0, kept, values).unwrap()
    }

    /// Dense solve of the closed-form weight equations using an explicit
    /// kernel-matrix inverse, in the same normalized coordinates as the
    /// production fit.
    fn closed_form_fit(meas: &SliceMeasurements<f64>, epsilon: f64) -> (Vec<f64>, f64) {
        let k = meas.len();
        let radii = meas.radii();
        let lo = radii[0];
        let unit = radii
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let x: Vec<f64> = radii.iter().map(|&r| (r - lo) / unit).collect();
        let phi = DMatrix::<f64>::from_fn(k, k, |i, j| {
            let d: f64 = (x[i] - x[j]).abs();
            (1.0 + epsilon * d * d).sqrt()
        });
        let phi_inv = phi.try_inverse().unwrap();
        let ones = DVector::<f64>::from_element(k, 1.0);
        let gamma = DVector::<f64>::from_column_slice(meas.values());
        let denom = (ones.transpose() * &phi_inv * &ones)[(0, 0)];
        let c = (ones.transpose() * &phi_inv * &gamma)[(0, 0)] / denom;
        let lambda = &phi_inv * (&gamma - &ones * c);
        (lambda.iter().copied().collect(), c)
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_multiquadric(0.0, 1.0), 1.0);
        assert_relative_eq!(kernel_multiquadric(3.0f64.sqrt(), 1.0), 2.0, max_relative = 1e-15);
        let mut rng = stream_rng(1, 0xBF, 1);
        for _ in 0..100 {
            let d = -5.0 + 10.0 * rng.random::<f64>();
            assert_eq!(kernel_multiquadric(d, 1.3), kernel_multiquadric(-d, 1.3));
            assert!(kernel_multiquadric(d, 1.3) >= 1.0);
        }
        assert_eq!(Kernel::ThinPlateSpline.eval(0.0, 1.0), 0.0);
        assert_relative_eq!(Kernel::Gaussian.eval(1.0, 2.0), (-2.0f64).exp());
    }

    #[test]
    fn constant_data_gives_zero_weights() {
        let meas = SliceMeasurements::<f64>::new(0, vec![1.0, 2.0, 4.0, 7.0], vec![3.5; 4]).unwrap();
        let model = fit_slice(&meas, &RbfConfig::default()).unwrap();
        assert!(model.lambda().iter().all(|&l| l.abs() < 1e-10));
        assert_relative_eq!(model.constant(), 3.5, max_relative = 1e-12);
        assert_relative_eq!(evaluate(&model, 3.3), 3.5, epsilon = 1e-10);
    }

    #[test]
    fn two_node_fit_reproduces_values() {
        let meas = SliceMeasurements::<f64>::new(0, vec![1.0, 2.0], vec![5.0, 9.0]).unwrap();
        let model = fit_slice(&meas, &RbfConfig::default()).unwrap();
        assert!((evaluate(&model, 1.0) - 5.0).abs() < 1e-7);
        assert!((evaluate(&model, 2.0) - 9.0).abs() < 1e-7);
        assert!(model.lambda_sum().abs() < 1e-8);
    }

    #[test]
    fn fit_matches_closed_form_oracle() {
        for seed in 0..30 {
            let meas = random_slice(5 + (seed % 8) as usize, seed);
            let model = fit_slice(&meas, &RbfConfig::default()).unwrap();
            let (lambda_cf, c_cf) = closed_form_fit(&meas, 1.0);
            // agreement is relative to the coefficient scale
            let scale = 1.0
                + c_cf
                    .abs()
                    .max(lambda_cf.iter().fold(0.0f64, |m, l| m.max(l.abs())));
            assert!(
                (model.constant() - c_cf).abs() <= 1e-8 * scale,
                "constant {} vs {}",
                model.constant(),
                c_cf
            );
            for (l, lc) in model.lambda().iter().zip(&lambda_cf) {
                assert!((l - lc).abs() <= 1e-8 * scale, "lambda {l} vs {lc}");
            }
        }
    }

    #[test]
    fn midpoint_matches_oracle_on_three_nodes() {
        let meas = SliceMeasurements::<f64>::new(0, vec![1.0, 2.5, 4.0], vec![5.0, 7.5, 6.0]).unwrap();
        let model = fit_slice(&meas, &RbfConfig::default()).unwrap();
        let (lambda_cf, c_cf) = closed_form_fit(&meas, 1.0);
        let mid = (meas.radii()[0] + meas.radii()[1]) / 2.0;
        let lo = meas.radii()[0];
        let unit = 1.5; // smallest node gap of {1.0, 2.5, 4.0}
        let u = (mid - lo) / unit;
        let oracle_val: f64 = c_cf
            + meas
                .radii()
                .iter()
                .zip(&lambda_cf)
                .map(|(&r, &l)| {
                    let d: f64 = (u - (r - lo) / unit).abs();
                    l * (1.0 + d * d).sqrt()
                })
                .sum::<f64>();
        assert!((evaluate(&model, mid) - oracle_val).abs() < 1e-8);
    }

    #[test]
    fn node_exactness_and_zero_sum() {
        for seed in 100..130 {
            let meas = random_slice(4 + (seed % 20) as usize, seed);
            let model = fit_slice(&meas, &RbfConfig::default()).unwrap();
            assert!(model.lambda_sum().abs() < 1e-8, "zero-sum {}", model.lambda_sum());
            for (&r, &v) in meas.radii().iter().zip(meas.values()) {
                assert!(
                    (evaluate(&model, r) - v).abs() < 1e-7,
                    "node value off by {}",
                    (evaluate(&model, r) - v).abs()
                );
            }
        }
    }

    #[test]
    fn unregularized_fit_reproduces_nodes() {
        let meas = random_slice(8, 7);
        let model = fit_slice(&meas, &RbfConfig::unregularized()).unwrap();
        assert_eq!(model.constant(), 0.0);
        for (&r, &v) in meas.radii().iter().zip(meas.values()) {
            assert!((evaluate(&model, r) - v).abs() < 1e-7);
        }
    }

    #[test]
    fn near_duplicate_radii_reported_ill_conditioned() {
        let meas = SliceMeasurements::<f64>::new(
            3,
            vec![1.0, 1.0 + 1e-13, 2.0],
            vec![5.0, 5.0, 9.0],
        )
        .unwrap();
        match fit_slice(&meas, &RbfConfig::default()) {
            Err(Error::IllConditioned { slice, .. }) => assert_eq!(slice, 3),
            other => panic!("expected ill-conditioned error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_radii_rejected() {
        assert!(SliceMeasurements::<f64>::new(0, vec![1.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]).is_err());
        assert!(SliceMeasurements::<f64>::new(0, vec![2.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(SliceMeasurements::<f64>::new(0, vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn loocv_constant_slice_is_zero() {
        let meas = SliceMeasurements::<f64>::new(0, vec![1.0, 2.0, 3.0, 5.0], vec![2.0; 4]).unwrap();
        let res = loocv_residuals(&meas, &RbfConfig::default()).unwrap();
        assert_eq!(res.len(), 4);
        assert!(res.iter().all(|e| e.abs() < 1e-9));
    }

    #[test]
    fn loocv_three_nodes_matches_refit_oracle() {
        let meas = SliceMeasurements::<f64>::new(0, vec![1.0, 2.0, 4.0], vec![5.0, 7.0, 6.0]).unwrap();
        let res = loocv_residuals(&meas, &RbfConfig::default()).unwrap();
        for k in 0..3 {
            let mut radii = vec![1.0, 2.0, 4.0];
            let mut values = vec![5.0, 7.0, 6.0];
            let held_r = radii.remove(k);
            let held_v = values.remove(k);
            let reduced = SliceMeasurements::new(0, radii, values).unwrap();
            let (lambda, c) = closed_form_fit(&reduced, 1.0);
            let lo = reduced.radii()[0];
            let unit = reduced.radii()[1] - lo;
            let u = (held_r - lo) / unit;
            let pred: f64 = c
                + reduced
                    .radii()
                    .iter()
                    .zip(&lambda)
                    .map(|(&r, &l)| {
                        let d: f64 = (u - (r - lo) / unit).abs();
                        l * (1.0 + d * d).sqrt()
                    })
                    .sum::<f64>();
            assert!((res[k] - (held_v - pred)).abs() < 1e-9);
        }
    }

    #[test]
    fn loocv_needs_three_samples() {
        let meas = SliceMeasurements::<f64>::new(5, vec![1.0, 2.0], vec![5.0, 9.0]).unwrap();
        match loocv_residuals(&meas, &RbfConfig::default()) {
            Err(Error::DegenerateSlice { slice: 5, len: 2, .. }) => {}
            other => panic!("expected degenerate-slice error, got {other:?}"),
        }
    }
}
