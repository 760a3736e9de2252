//! First-order local polynomial regression baseline and its two-stage
//! completion pipeline.
//!
//! At each query radius a weighted least-squares line `a + b (d - query)` is
//! fit to the slice with Gaussian weights centered at the query; the local
//! intercept `a` is the prediction. The bandwidth comes either from a fixed
//! setting or per-slice leave-one-out selection over a candidate grid.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::GridSpec;
use crate::error::{Error, Result};
use crate::lowrank::{solve_box_nnm, CompletionResult, SolverConfig};
use crate::rbf::{interpolate_map_with, SliceMeasurements};
use crate::robust::{select_delta, DeltaSelection, HuberConfig};
use crate::sampling::Observations;
use crate::scalar::{cast, Scalar};

/// Bandwidth candidates used by leave-one-out selection, in meters.
pub const DEFAULT_BANDWIDTH_GRID: [f64; 5] = [0.1, 0.2, 0.4, 0.8, 1.6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth<T> {
    Fixed(T),
    /// Per-slice leave-one-out selection over the candidate grid.
    AutoLoocv(Vec<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LprConfig<T> {
    pub bandwidth: Bandwidth<T>,
}

impl<T: Scalar> Default for LprConfig<T> {
    fn default() -> Self {
        Self {
            bandwidth: Bandwidth::AutoLoocv(
                DEFAULT_BANDWIDTH_GRID.iter().map(|&h| cast::<T>(h)).collect(),
            ),
        }
    }
}

impl<T: Scalar> LprConfig<T> {
    pub fn fixed(bandwidth: T) -> Self {
        Self {
            bandwidth: Bandwidth::Fixed(bandwidth),
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.bandwidth {
            Bandwidth::Fixed(h) => {
                if !(*h > T::zero()) {
                    return Err(Error::invalid("bandwidth must be positive"));
                }
            }
            Bandwidth::AutoLoocv(grid) => {
                if grid.is_empty() {
                    return Err(Error::invalid("bandwidth candidate grid is empty"));
                }
                if grid.iter().any(|h| !(*h > T::zero())) {
                    return Err(Error::invalid("bandwidth candidates must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Weighted least squares of `a + b (d - query)`; returns `(a, ok)` where
/// `ok` reports whether the normal equations were solvable at this
/// bandwidth.
fn weighted_line<T: Scalar>(radii: &[T], values: &[T], query: T, bandwidth: T) -> (T, bool) {
    let two = cast::<T>(2.0);
    let mut s0 = T::zero();
    let mut s1 = T::zero();
    let mut s2 = T::zero();
    let mut t0 = T::zero();
    let mut t1 = T::zero();
    let mut carriers = 0usize;
    for (&r, &v) in radii.iter().zip(values) {
        let x = r - query;
        let w = (-(x * x) / (two * bandwidth * bandwidth)).exp();
        if w > cast::<T>(1e-12) {
            carriers += 1;
        }
        s0 += w;
        s1 += w * x;
        s2 += w * x * x;
        t0 += w * v;
        t1 += w * x * v;
    }
    let det = s0 * s2 - s1 * s1;
    if carriers < 2 || !(det.abs() > T::zero()) || !det.is_finite() {
        return (T::zero(), false);
    }
    let a = (s2 * t0 - s1 * t1) / det;
    if !a.is_finite() {
        return (T::zero(), false);
    }
    (a, true)
}

/// Local linear prediction at `query` meters, doubling the bandwidth until
/// at least two samples carry weight.
pub fn lpr_predict<T: Scalar>(
    slice: &SliceMeasurements<T>,
    query: T,
    cfg: &LprConfig<T>,
) -> Result<T> {
    cfg.validate()?;
    let bandwidth = resolve_bandwidth(slice, cfg)?;
    predict_with_bandwidth(slice.radii(), slice.values(), query, bandwidth)
}

fn predict_with_bandwidth<T: Scalar>(radii: &[T], values: &[T], query: T, bandwidth: T) -> Result<T> {
    let mut h = bandwidth;
    for _ in 0..64 {
        let (a, ok) = weighted_line(radii, values, query, h);
        if ok {
            return Ok(a);
        }
        h *= cast::<T>(2.0);
    }
    Err(Error::invalid(
        "local regression degenerate even after widening the bandwidth",
    ))
}

/// Mean squared leave-one-out residual of the slice at one bandwidth.
fn loocv_score<T: Scalar>(slice: &SliceMeasurements<T>, bandwidth: T) -> Result<T> {
    let k = slice.len();
    let mut acc = T::zero();
    for i in 0..k {
        let reduced = slice.without(i)?;
        let pred = predict_with_bandwidth(
            reduced.radii(),
            reduced.values(),
            slice.radii()[i],
            bandwidth,
        )?;
        let e = slice.values()[i] - pred;
        acc += e * e;
    }
    Ok(acc / cast::<T>(k as f64))
}

fn resolve_bandwidth<T: Scalar>(slice: &SliceMeasurements<T>, cfg: &LprConfig<T>) -> Result<T> {
    match &cfg.bandwidth {
        Bandwidth::Fixed(h) => Ok(*h),
        Bandwidth::AutoLoocv(grid) => {
            if slice.len() < 3 {
                // leave-one-out needs a residual per point; fall back to the
                // widest candidate
                return Ok(grid[grid.len() - 1]);
            }
            let mut best = (grid[0], loocv_score(slice, grid[0])?);
            for &h in &grid[1..] {
                let score = loocv_score(slice, h)?;
                if score < best.1 {
                    best = (h, score);
                }
            }
            Ok(best.0)
        }
    }
}

/// Leave-one-out residuals of the local linear fit on one slice.
pub fn lpr_loocv_residuals<T: Scalar>(
    slice: &SliceMeasurements<T>,
    cfg: &LprConfig<T>,
) -> Result<Vec<T>> {
    if slice.len() < 3 {
        return Err(Error::DegenerateSlice {
            slice: slice.theta_index(),
            len: slice.len(),
            min: 3,
        });
    }
    let bandwidth = resolve_bandwidth(slice, cfg)?;
    (0..slice.len())
        .map(|k| {
            let reduced = slice.without(k)?;
            let pred = predict_with_bandwidth(
                reduced.radii(),
                reduced.values(),
                slice.radii()[k],
                bandwidth,
            )?;
            Ok(slice.values()[k] - pred)
        })
        .collect()
}

/// Local-regression prior over the full grid, slice by slice.
pub fn lpr_map<T: Scalar>(
    obs: &Observations<T>,
    grid: &GridSpec<T>,
    cfg: &LprConfig<T>,
) -> Result<DMatrix<T>> {
    cfg.validate()?;
    interpolate_map_with(obs, grid, |meas| {
        let bandwidth = resolve_bandwidth(meas, cfg)?;
        let radii = meas.radii().to_vec();
        let values = meas.values().to_vec();
        Ok(move |d| {
            predict_with_bandwidth(&radii, &values, d, bandwidth)
                .expect("bandwidth widening handles degenerate weights")
        })
    })
}

/// Two-stage reconstruction: local-regression prior refined by the
/// box-constrained nuclear-norm solve, with the tolerance chosen from the
/// prior's own leave-one-out residuals.
pub fn lpr_mc<T: Scalar>(
    obs: &Observations<T>,
    grid: &GridSpec<T>,
    lpr_cfg: &LprConfig<T>,
    huber_cfg: &HuberConfig<T>,
    solver_cfg: &SolverConfig<T>,
) -> Result<(CompletionResult<T>, DeltaSelection<T>)> {
    let prior = lpr_map(obs, grid, lpr_cfg)?;
    let mask = obs.mask();
    let mut residuals = Vec::new();
    for i in 0..mask.n_theta() {
        if mask.slice(i).len() < 3 {
            continue;
        }
        let meas = obs.slice_measurements(i, grid)?;
        residuals.extend(lpr_loocv_residuals(&meas, lpr_cfg)?);
    }
    if residuals.is_empty() {
        return Err(Error::invalid(
            "every slice is too small for leave-one-out tolerance selection",
        ));
    }
    let selection = select_delta(&residuals, huber_cfg)?;
    let result = solve_box_nnm(&prior, selection.delta, solver_cfg)?;
    Ok((result, selection))
}
