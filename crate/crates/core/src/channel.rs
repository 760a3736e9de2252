//! Spherical-wavefront channel model for an extremely large uniform linear
//! array, and the ground-truth RSS map generator built on it.
//!
//! The transmit array lies on the y-axis with element `n` at
//! `(0, delta_n * wavelength / 2)`. A receiver at distance `d` and spatial
//! angle `theta` (degrees, measured from the array axis) sees per-element
//! distances `d_n = sqrt(d^2 + delta_n^2 lambda^2/4 - d cos(theta) delta_n lambda)`,
//! and the received signal strength in dB follows from the coherent sum of
//! the per-element phasors.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{cell_stream, stream_rng, DOMAIN_SHADOWING};
use crate::scalar::{cast, Scalar};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Linear-scale floor below which a cell is clamped instead of mapping to
/// negative infinity dB. Only degenerate phase cancellations get near it.
const LINEAR_FLOOR: f64 = 1e-300;
/// dB value assigned to clamped cells.
const FLOOR_DB: f64 = -400.0;

/// Uniform linear array along the y-axis, centered at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry<T> {
    n_elements: usize,
    carrier_freq: T,
    wavelength: T,
    element_offsets: Vec<T>,
}

impl<T: Scalar> ArrayGeometry<T> {
    /// Builds the array from its element count and carrier frequency in Hz.
    pub fn new(n_elements: usize, carrier_freq: T) -> Result<Self> {
        if carrier_freq <= T::zero() {
            return Err(Error::invalid("carrier frequency must be positive"));
        }
        let offsets = element_offsets(n_elements)?;
        Ok(Self {
            n_elements,
            carrier_freq,
            wavelength: cast::<T>(SPEED_OF_LIGHT) / carrier_freq,
            element_offsets: offsets,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn carrier_freq(&self) -> T {
        self.carrier_freq
    }

    pub fn wavelength(&self) -> T {
        self.wavelength
    }

    /// Dimensionless element offsets `delta_n = (2n - N - 1)/2`, `n = 1..N`.
    pub fn element_offsets(&self) -> &[T] {
        &self.element_offsets
    }

    /// Physical aperture `N * wavelength / 2` in meters.
    pub fn aperture(&self) -> T {
        cast::<T>(self.n_elements as f64) * self.wavelength / cast::<T>(2.0)
    }
}

/// Transmit beamforming weights, unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer<T> {
    weights: Vec<Complex<T>>,
}

impl<T: Scalar> Beamformer<T> {
    /// Validates that `weights` has unit Euclidean norm.
    pub fn new(weights: Vec<Complex<T>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("beamformer must have at least one weight"));
        }
        let norm_sq: T = weights.iter().map(|w| w.norm_sqr()).sum();
        // 1e-12 at f64; loosened in proportion to epsilon for narrower types.
        let tol = cast::<T>(1e-12).max(T::machine_eps() * cast::<T>(16.0 * weights.len() as f64));
        if (norm_sq - T::one()).abs() > tol {
            return Err(Error::invalid("beamformer weights must have unit norm"));
        }
        Ok(Self { weights })
    }

    /// All-equal weights `1/sqrt(N)`: an omnidirectional transmitter.
    pub fn omnidirectional(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("beamformer must have at least one weight"));
        }
        let w = T::one() / cast::<T>(n as f64).sqrt();
        Ok(Self {
            weights: vec![Complex::new(w, T::zero()); n],
        })
    }

    pub fn weights(&self) -> &[Complex<T>] {
        &self.weights
    }
}

/// Angular-radial discretization of the region of interest.
///
/// Cell `(i, j)` maps to `theta_i = theta_min + i*(theta_max-theta_min)/(I-1)`
/// and `r_j = r_min + j*(r_max-r_min)/(J-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub theta_min: T,
    pub theta_max: T,
    pub r_min: T,
    pub r_max: T,
    pub n_theta: usize,
    pub n_r: usize,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(theta_min: T, theta_max: T, r_min: T, r_max: T, n_theta: usize, n_r: usize) -> Result<Self> {
        let spec = Self {
            theta_min,
            theta_max,
            r_min,
            r_max,
            n_theta,
            n_r,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_min < self.theta_max) {
            return Err(Error::invalid("grid requires theta_min < theta_max"));
        }
        if !(T::zero() < self.r_min && self.r_min < self.r_max) {
            return Err(Error::invalid("grid requires 0 < r_min < r_max"));
        }
        if self.n_theta < 2 || self.n_r < 2 {
            return Err(Error::invalid("grid requires at least 2 points per axis"));
        }
        Ok(())
    }

    /// Spatial angle of row `i`, degrees.
    pub fn theta(&self, i: usize) -> T {
        let step = (self.theta_max - self.theta_min) / cast::<T>((self.n_theta - 1) as f64);
        self.theta_min + cast::<T>(i as f64) * step
    }

    /// Radial distance of column `j`, meters.
    pub fn radius(&self, j: usize) -> T {
        let step = (self.r_max - self.r_min) / cast::<T>((self.n_r - 1) as f64);
        self.r_min + cast::<T>(j as f64) * step
    }

    pub fn radii(&self) -> Vec<T> {
        (0..self.n_r).map(|j| self.radius(j)).collect()
    }
}

/// A gridded RSS field in dB with the provenance needed to regenerate it.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap<T> {
    pub grid: GridSpec<T>,
    pub values: DMatrix<T>,
    pub seed: u64,
    pub sigma_shadow: T,
}

/// Dimensionless ULA element offsets `delta_n = (2n - N - 1)/2` for `n = 1..N`.
pub fn element_offsets<T: Scalar>(n: usize) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::invalid("element count must be at least 1"));
    }
    Ok((1..=n)
        .map(|k| cast::<T>((2 * k) as f64 - (n as f64) - 1.0) / cast::<T>(2.0))
        .collect())
}

/// Distance from a receiver at `(d, theta)` to the element with offset `delta_n`.
pub fn element_distance<T: Scalar>(d: T, theta_deg: T, delta_n: T, wavelength: T) -> Result<T> {
    if d <= T::zero() {
        return Err(Error::invalid("receiver distance must be positive"));
    }
    let theta = theta_deg * T::pi() / cast::<T>(180.0);
    let quarter = cast::<T>(0.25);
    let radicand = d * d + delta_n * delta_n * wavelength * wavelength * quarter
        - d * theta.cos() * delta_n * wavelength;
    // Nonnegative geometrically; guard against rounding at near-zero distances.
    Ok(radicand.max(T::zero()).sqrt())
}

/// Near-field array factor `S(d, theta) = lambda/(4 pi d) * sum_n v_n exp(-j 2 pi d_n / lambda)`.
pub fn array_factor<T: Scalar>(
    d: T,
    theta_deg: T,
    geom: &ArrayGeometry<T>,
    bf: &Beamformer<T>,
) -> Result<Complex<T>> {
    if d <= T::zero() {
        return Err(Error::invalid("receiver distance must be positive"));
    }
    if bf.weights().len() != geom.n_elements() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} beamformer weights", geom.n_elements()),
            actual: format!("{}", bf.weights().len()),
        });
    }
    let lambda = geom.wavelength();
    let two_pi = T::two_pi();
    let mut acc = Complex::new(T::zero(), T::zero());
    for (w, &delta) in bf.weights().iter().zip(geom.element_offsets()) {
        let dist = element_distance(d, theta_deg, delta, lambda)?;
        let (s, c) = (-two_pi * dist / lambda).sin_cos();
        acc += w * Complex::new(c, s);
    }
    let prefactor = lambda / (cast::<T>(4.0) * T::pi() * d);
    Ok(acc * prefactor)
}

/// Received signal strength in dB at `(d, theta)` for transmit power `power`
/// (linear watts) and shadowing realization `shadow_db`.
///
/// Exact phase cancellations are clamped to a finite floor instead of
/// returning negative infinity.
pub fn rss_db<T: Scalar>(
    d: T,
    theta_deg: T,
    geom: &ArrayGeometry<T>,
    bf: &Beamformer<T>,
    power: T,
    shadow_db: T,
) -> Result<T> {
    if power <= T::zero() {
        return Err(Error::invalid("transmit power must be positive"));
    }
    let s = array_factor(d, theta_deg, geom, bf)?;
    let linear = power / cast::<T>(geom.n_elements() as f64) * s.norm_sqr();
    if linear <= cast::<T>(LINEAR_FLOOR) {
        return Ok(cast::<T>(FLOOR_DB) + shadow_db);
    }
    Ok(cast::<T>(10.0) * linear.log10() + shadow_db)
}

/// Generates the ground-truth RSS map over `grid` with i.i.d. `N(0, sigma^2)`
/// dB shadowing per cell, reproducible from `seed`.
pub fn generate_map<T: Scalar>(
    grid: &GridSpec<T>,
    geom: &ArrayGeometry<T>,
    bf: &Beamformer<T>,
    power: T,
    sigma: T,
    seed: u64,
) -> Result<RadioMap<T>> {
    grid.validate()?;
    if sigma < T::zero() {
        return Err(Error::invalid("shadowing sigma must be nonnegative"));
    }
    let (ni, nj) = (grid.n_theta, grid.n_r);
    let normal = Normal::new(0.0f64, 1.0).expect("unit normal");
    let rows: Vec<Vec<T>> = (0..ni)
        .into_par_iter()
        .map(|i| -> Result<Vec<T>> {
            let theta = grid.theta(i);
            let mut row = Vec::with_capacity(nj);
            for j in 0..nj {
                // One stream per cell keeps the draw independent of traversal order.
                let mut rng = stream_rng(seed, DOMAIN_SHADOWING, cell_stream(i, j));
                let eps = sigma * cast::<T>(normal.sample(&mut rng));
                row.push(rss_db(grid.radius(j), theta, geom, bf, power, eps)?);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let values = DMatrix::from_fn(ni, nj, |i, j| rows[i][j]);
    Ok(RadioMap {
        grid: grid.clone(),
        values,
        seed,
        sigma_shadow: sigma,
    })
}

/// Smallest distance from the receiver at `(d, theta)` to any array element.
pub fn min_element_distance<T: Scalar>(d: T, theta_deg: T, geom: &ArrayGeometry<T>) -> Result<T> {
    let lambda = geom.wavelength();
    let mut d_min = element_distance(d, theta_deg, geom.element_offsets()[0], lambda)?;
    for &delta in &geom.element_offsets()[1..] {
        d_min = d_min.min(element_distance(d, theta_deg, delta, lambda)?);
    }
    Ok(d_min)
}

/// Envelope bounds on the angular (per radian) and radial (per meter)
/// derivatives of the array factor magnitude, with the phase-alignment
/// factor set to 1:
/// `(5 lambda |sin theta| N^2 / (16 d_min), (lambda/(4 pi d^2) + 1/(2d)) N)`.
pub fn sensitivity_bounds<T: Scalar>(
    d: T,
    theta_deg: T,
    geom: &ArrayGeometry<T>,
) -> Result<(T, T)> {
    if d <= T::zero() {
        return Err(Error::invalid("receiver distance must be positive"));
    }
    let lambda = geom.wavelength();
    let n = cast::<T>(geom.n_elements() as f64);
    let theta = theta_deg * T::pi() / cast::<T>(180.0);
    let d_min = min_element_distance(d, theta_deg, geom)?;
    if d_min <= T::zero() {
        return Err(Error::invalid("receiver coincides with an array element"));
    }
    let angular = cast::<T>(5.0) * lambda * theta.sin().abs() * n * n / (cast::<T>(16.0) * d_min);
    let radial = (lambda / (cast::<T>(4.0) * T::pi() * d * d) + T::one() / (cast::<T>(2.0) * d)) * n;
    Ok((angular, radial))
}

/// Draws `count` uniform points in `(d, theta)` over the given ranges;
/// shared by the sensitivity-bound verification tests.
pub fn sample_points<T: Scalar>(
    count: usize,
    d_range: (T, T),
    theta_range: (T, T),
    seed: u64,
) -> Vec<(T, T)> {
    let mut rng = stream_rng(seed, DOMAIN_RADII_POINTS, 0);
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            let d = d_range.0 + cast::<T>(u) * (d_range.1 - d_range.0);
            let t = theta_range.0 + cast::<T>(v) * (theta_range.1 - theta_range.0);
            (d, t)
        })
        .collect()
}

const DOMAIN_RADII_POINTS: u64 = 0xD0;
