//! Observation mask construction and fill-distance analysis.
//!
//! Masks are built per angular slice: each row of the grid receives exactly
//! `K = round(rho * J)` distinct radial indices, drawn either uniformly
//! without replacement or by inverse mu-law companding, which concentrates
//! samples at small radii where the field varies fastest.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{GridSpec, RadioMap};
use crate::error::{Error, Result};
use crate::rbf::SliceMeasurements;
use crate::rng::{stream_rng, DOMAIN_MASK, DOMAIN_RADII};
use crate::scalar::{cast, Scalar};

/// Inverse mu-law companding parameters over the target interval `[z0, z1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuLawParams<T> {
    pub mu: T,
    pub z0: T,
    pub z1: T,
}

impl<T: Scalar> MuLawParams<T> {
    pub fn new(mu: T, z0: T, z1: T) -> Result<Self> {
        if mu <= T::zero() {
            return Err(Error::invalid("mu must be positive"));
        }
        if !(z0 < z1) {
            return Err(Error::invalid("mu-law interval requires z0 < z1"));
        }
        Ok(Self { mu, z0, z1 })
    }

    /// Default companding strength over the radial extent of `grid`.
    pub fn for_grid(grid: &GridSpec<T>, mu: T) -> Result<Self> {
        Self::new(mu, grid.r_min, grid.r_max)
    }
}

/// Radial sampling strategy for mask construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplingStrategy<T> {
    Uniform,
    MuLaw { params: MuLawParams<T> },
}

impl<T: Scalar> SamplingStrategy<T> {
    pub fn mu_law(params: MuLawParams<T>) -> Self {
        SamplingStrategy::MuLaw { params }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SamplingStrategy::Uniform => "uniform",
            SamplingStrategy::MuLaw { .. } => "mulaw",
        }
    }

    pub fn mu(&self) -> Option<T> {
        match self {
            SamplingStrategy::Uniform => None,
            SamplingStrategy::MuLaw { params } => Some(params.mu),
        }
    }
}

/// Observed index set, organized per angular slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMask {
    per_angle: Vec<Vec<usize>>,
    n_r: usize,
    target_ratio: f64,
}

impl SampleMask {
    /// Builds a mask from per-slice radial indices; indices are sorted and
    /// must be distinct and within `0..n_r`.
    pub fn from_slices(per_angle: Vec<Vec<usize>>, n_r: usize, target_ratio: f64) -> Result<Self> {
        let mut per_angle = per_angle;
        for (i, slice) in per_angle.iter_mut().enumerate() {
            slice.sort_unstable();
            if slice.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid(format!("slice {i}: duplicate radial indices")));
            }
            if slice.iter().any(|&j| j >= n_r) {
                return Err(Error::invalid(format!("slice {i}: radial index out of bounds")));
            }
        }
        Ok(Self {
            per_angle,
            n_r,
            target_ratio,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.per_angle.len()
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn target_ratio(&self) -> f64 {
        self.target_ratio
    }

    /// Sorted radial indices observed at angular slice `i`.
    pub fn slice(&self, i: usize) -> &[usize] {
        &self.per_angle[i]
    }

    /// Total number of observed entries `M`.
    pub fn len(&self) -> usize {
        self.per_angle.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All `(i, j)` index pairs in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.per_angle
            .iter()
            .enumerate()
            .flat_map(|(i, js)| js.iter().map(move |&j| (i, j)))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.per_angle.len() && self.per_angle[i].binary_search(&j).is_ok()
    }
}

/// Observed entries of a radio map: a mask plus the measured dB values.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations<T> {
    mask: SampleMask,
    values: Vec<Vec<T>>,
}

impl<T: Scalar> Observations<T> {
    /// Extracts the masked entries of `map`.
    pub fn from_map(map: &RadioMap<T>, mask: &SampleMask) -> Result<Self> {
        if mask.n_theta() != map.grid.n_theta || mask.n_r() != map.grid.n_r {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} mask", map.grid.n_theta, map.grid.n_r),
                actual: format!("{}x{}", mask.n_theta(), mask.n_r()),
            });
        }
        let values = (0..mask.n_theta())
            .map(|i| mask.slice(i).iter().map(|&j| map.values[(i, j)]).collect())
            .collect();
        Ok(Self {
            mask: mask.clone(),
            values,
        })
    }

    /// Assembles observations from `(i, j, value)` triples.
    pub fn from_triples(
        triples: &[(usize, usize, T)],
        n_theta: usize,
        n_r: usize,
        target_ratio: f64,
    ) -> Result<Self> {
        let mut per_angle = vec![Vec::new(); n_theta];
        let mut per_value = vec![Vec::new(); n_theta];
        for &(i, j, v) in triples {
            if i >= n_theta || j >= n_r {
                return Err(Error::invalid(format!("triple ({i}, {j}) out of bounds")));
            }
            per_angle[i].push(j);
            per_value[i].push(v);
        }
        for (js, vs) in per_angle.iter_mut().zip(per_value.iter_mut()) {
            let mut paired: Vec<(usize, T)> = js.iter().copied().zip(vs.iter().copied()).collect();
            paired.sort_by_key(|&(j, _)| j);
            *js = paired.iter().map(|&(j, _)| j).collect();
            *vs = paired.iter().map(|&(_, v)| v).collect();
        }
        let mask = SampleMask::from_slices(per_angle, n_r, target_ratio)?;
        Ok(Self {
            mask,
            values: per_value,
        })
    }

    pub fn mask(&self) -> &SampleMask {
        &self.mask
    }

    /// Measured values at slice `i`, aligned with `mask().slice(i)`.
    pub fn slice_values(&self, i: usize) -> &[T] {
        &self.values[i]
    }

    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.mask
            .per_angle
            .iter()
            .enumerate()
            .zip(self.values.iter())
            .flat_map(|((i, js), vs)| {
                js.iter().zip(vs.iter()).map(move |(&j, &v)| (i, j, v))
            })
    }

    /// Measurements of slice `i` with physical radii from `grid`.
    pub fn slice_measurements(&self, i: usize, grid: &GridSpec<T>) -> Result<SliceMeasurements<T>> {
        let radii: Vec<T> = self.mask.slice(i).iter().map(|&j| grid.radius(j)).collect();
        SliceMeasurements::new(i, radii, self.values[i].clone())
    }
}

/// Forward mu-law companding `F(x) = ln(1 + mu x) / ln(1 + mu)` on `[0, 1]`.
pub fn mu_law_forward<T: Scalar>(x: T, mu: T) -> Result<T> {
    if mu <= T::zero() {
        return Err(Error::invalid("mu must be positive"));
    }
    if x < T::zero() || x > T::one() {
        return Err(Error::invalid("mu-law input must lie in [0, 1]"));
    }
    Ok(Scalar::ln_1p(mu * x) / Scalar::ln_1p(mu))
}

/// Inverse mu-law `F^{-1}(y) = ((1 + mu)^y - 1) / mu` on `[0, 1]`.
pub fn mu_law_inverse<T: Scalar>(y: T, mu: T) -> Result<T> {
    if mu <= T::zero() {
        return Err(Error::invalid("mu must be positive"));
    }
    if y < T::zero() || y > T::one() {
        return Err(Error::invalid("mu-law input must lie in [0, 1]"));
    }
    Ok(Scalar::exp_m1(y * Scalar::ln_1p(mu)) / mu)
}

/// Draws `count` radii in `[z0, z1]` concentrated toward `z0` by passing
/// uniform variates through the inverse mu-law.
pub fn draw_nonuniform_radii<T: Scalar>(
    count: usize,
    params: &MuLawParams<T>,
    seed: u64,
) -> Result<Vec<T>> {
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut rng = stream_rng(seed, DOMAIN_RADII, 0);
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let y = mu_law_inverse(cast::<T>(u), params.mu)?;
            Ok(params.z0 + y * (params.z1 - params.z0))
        })
        .collect()
}

/// Builds an observation mask with exactly `round(rho * J)` distinct radial
/// indices per angular slice.
pub fn build_mask<T: Scalar>(
    grid: &GridSpec<T>,
    rho: f64,
    strategy: &SamplingStrategy<T>,
    seed: u64,
) -> Result<SampleMask> {
    grid.validate()?;
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::invalid("sampling ratio must lie in (0, 1]"));
    }
    let j_total = grid.n_r;
    let k = (rho * j_total as f64).round() as usize;
    if k < 2 {
        return Err(Error::invalid(format!(
            "sampling ratio {rho} gives {k} samples per slice; interpolation needs at least 2"
        )));
    }
    if k > j_total {
        return Err(Error::invalid(format!(
            "sampling ratio {rho} asks for {k} of {j_total} radial points"
        )));
    }
    let per_angle = (0..grid.n_theta)
        .map(|i| {
            let mut rng = stream_rng(seed, DOMAIN_MASK, i as u64);
            match strategy {
                SamplingStrategy::Uniform => {
                    let mut idx = rand::seq::index::sample(&mut rng, j_total, k).into_vec();
                    idx.sort_unstable();
                    idx
                }
                SamplingStrategy::MuLaw { params } => {
                    mu_law_slice_indices(grid, params, k, &mut rng)
                }
            }
        })
        .collect();
    SampleMask::from_slices(per_angle, j_total, rho)
}

/// Draws continuous mu-law radii and snaps them to grid indices, redrawing
/// on collisions up to `10 k` extra attempts, then filling the largest
/// remaining gaps deterministically.
fn mu_law_slice_indices<T: Scalar>(
    grid: &GridSpec<T>,
    params: &MuLawParams<T>,
    k: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let j_total = grid.n_r;
    let span = grid.r_max - grid.r_min;
    let steps = cast::<T>((j_total - 1) as f64);
    let mut chosen = std::collections::BTreeSet::new();
    let mut attempts = 0usize;
    let max_attempts = k + 10 * k;
    while chosen.len() < k && attempts < max_attempts {
        attempts += 1;
        let u: f64 = rng.random();
        let y = mu_law_inverse(cast::<T>(u), params.mu).expect("uniform variate in [0,1]");
        let r = params.z0 + y * (params.z1 - params.z0);
        let frac = ((r - grid.r_min) / span * steps).round();
        let j = frac.to_f64().unwrap_or(0.0).clamp(0.0, (j_total - 1) as f64) as usize;
        chosen.insert(j);
    }
    // Fallback: place remaining samples at the points farthest from the
    // already chosen ones (largest empty gaps first).
    while chosen.len() < k {
        let best = (0..j_total)
            .filter(|j| !chosen.contains(j))
            .max_by_key(|&j| {
                chosen
                    .iter()
                    .map(|&c| (j as isize - c as isize).unsigned_abs())
                    .min()
                    .unwrap_or(usize::MAX)
            })
            .expect("k <= j_total leaves a free index");
        chosen.insert(best);
    }
    chosen.into_iter().collect()
}

/// Fill distance of a point set within `[a, b]`: the radius of the largest
/// empty interval around any domain point,
/// `max(r_first - a, b - r_last, max_i (r_{i+1} - r_i) / 2)`.
pub fn fill_distance<T: Scalar>(points: &[T], domain: (T, T)) -> Result<T> {
    let (a, b) = domain;
    if points.is_empty() {
        return Err(Error::invalid("fill distance of an empty point set"));
    }
    if !(a < b) {
        return Err(Error::invalid("domain requires a < b"));
    }
    if points.iter().any(|&p| p < a || p > b) {
        return Err(Error::invalid("fill distance points must lie in the domain"));
    }
    let mut sorted: Vec<T> = points.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite points"));
    let mut h = (sorted[0] - a).max(b - sorted[sorted.len() - 1]);
    for w in sorted.windows(2) {
        h = h.max((w[1] - w[0]) / cast::<T>(2.0));
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_map, ArrayGeometry, Beamformer};
    use approx::assert_relative_eq;

    fn grid_100() -> GridSpec<f64> {
        GridSpec::new(-80.0, 80.0, 0.1, 10.0, 100, 100).unwrap()
    }

    #[test]
    fn mu_law_known_values() {
        assert_eq!(mu_law_forward(0.0, 15.0).unwrap(), 0.0);
        assert_relative_eq!(mu_law_forward(1.0, 15.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(mu_law_forward(0.2, 15.0).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(mu_law_inverse(0.5, 15.0).unwrap(), 0.2, max_relative = 1e-14);
        assert_eq!(mu_law_inverse(0.0, 15.0).unwrap(), 0.0);
        assert_relative_eq!(mu_law_inverse(1.0, 15.0).unwrap(), 1.0, max_relative = 1e-15);
        assert!(mu_law_forward(-0.1, 15.0).is_err());
        assert!(mu_law_forward(1.1, 15.0).is_err());
        assert!(mu_law_forward(0.5, 0.0).is_err());
        assert!(mu_law_inverse(2.0, 15.0).is_err());
    }

    #[test]
    fn mu_law_round_trip() {
        let mut rng = stream_rng(3, 77, 0);
        for _ in 0..1000 {
            let x: f64 = rng.random();
            for mu in [0.5, 15.0, 255.0] {
                let y = mu_law_forward(x, mu).unwrap();
                let back = mu_law_inverse(y, mu).unwrap();
                assert!((back - x).abs() < 1e-12, "mu={mu} x={x} back={back}");
            }
        }
    }

    #[test]
    fn nonuniform_radii_distribution() {
        // As mu -> 0 the transform degenerates to the identity; the empirical
        // CDF should be uniform.
        let params = MuLawParams::<f64>::new(1e-9, 0.0, 1.0).unwrap();
        let draws = draw_nonuniform_radii(10_000, &params, 11).unwrap();
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ks = sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let lo = i as f64 / sorted.len() as f64;
                let hi = (i + 1) as f64 / sorted.len() as f64;
                (x - lo).abs().max((x - hi).abs())
            })
            .fold(0.0f64, f64::max);
        assert!(ks < 0.05, "KS statistic {ks}");

        // Median of (16^U - 1)/15 is exactly 0.2.
        let params = MuLawParams::<f64>::new(15.0, 0.0, 1.0).unwrap();
        let mut draws = draw_nonuniform_radii(10_000, &params, 12).unwrap();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = (draws[4999] + draws[5000]) / 2.0;
        assert!((median - 0.2).abs() < 0.02, "median {median}");

        let again = draw_nonuniform_radii(10_000, &params, 12).unwrap();
        let mut again_sorted = again;
        again_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(draws, again_sorted);
    }

    #[test]
    fn radii_stay_in_interval() {
        let params = MuLawParams::<f64>::new(15.0, 0.5, 9.5).unwrap();
        let draws = draw_nonuniform_radii(500, &params, 4).unwrap();
        assert!(draws.iter().all(|&r| (0.5..=9.5).contains(&r)));
    }

    #[test]
    fn mask_cardinality_and_determinism() {
        let grid = grid_100();
        for strategy in [
            SamplingStrategy::Uniform,
            SamplingStrategy::mu_law(MuLawParams::for_grid(&grid, 15.0).unwrap()),
        ] {
            let mask = build_mask(&grid, 0.1, &strategy, 7).unwrap();
            assert_eq!(mask.n_theta(), 100);
            for i in 0..100 {
                assert_eq!(mask.slice(i).len(), 10, "slice {i}");
                assert!(mask.slice(i).windows(2).all(|w| w[0] < w[1]));
            }
            assert_eq!(mask.len(), 1000);
            let mask2 = build_mask(&grid, 0.1, &strategy, 7).unwrap();
            assert_eq!(mask, mask2);
            let mask3 = build_mask(&grid, 0.1, &strategy, 8).unwrap();
            assert_ne!(mask, mask3);
        }
    }

    #[test]
    fn full_observation_mask() {
        let grid = grid_100();
        let mask = build_mask(&grid, 1.0, &SamplingStrategy::Uniform, 7).unwrap();
        assert_eq!(mask.len(), 100 * 100);
    }

    #[test]
    fn mask_ratio_bounds() {
        let grid = grid_100();
        assert!(build_mask(&grid, 0.001, &SamplingStrategy::Uniform, 7).is_err());
        assert!(build_mask(&grid, 0.0, &SamplingStrategy::Uniform, 7).is_err());
        assert!(build_mask(&grid, 1.5, &SamplingStrategy::Uniform, 7).is_err());
    }

    #[test]
    fn mu_law_mask_concentrates_near_transmitter() {
        let grid = grid_100();
        let params = MuLawParams::for_grid(&grid, 15.0).unwrap();
        let strategy = SamplingStrategy::mu_law(params);
        let mut near = 0usize;
        let mut far = 0usize;
        for seed in 0..20 {
            let mask = build_mask(&grid, 0.1, &strategy, seed).unwrap();
            for (_, j) in mask.entries() {
                if j < 25 {
                    near += 1;
                } else if j >= 75 {
                    far += 1;
                }
            }
        }
        assert!(
            near > far,
            "near-quartile {near} should dominate far-quartile {far}"
        );
    }

    #[test]
    fn fill_distance_known_cases() {
        assert_relative_eq!(fill_distance(&[0.0, 0.5, 1.0], (0.0, 1.0)).unwrap(), 0.25);
        assert_relative_eq!(fill_distance(&[0.5], (0.0, 1.0)).unwrap(), 0.5);
        assert_relative_eq!(fill_distance(&[0.0, 1.0], (0.0, 1.0)).unwrap(), 0.5);
        assert!(fill_distance::<f64>(&[], (0.0, 1.0)).is_err());
        assert!(fill_distance(&[2.0], (0.0, 1.0)).is_err());
    }

    #[test]
    fn fill_distance_matches_dense_scan() {
        let mut rng = stream_rng(9, 55, 0);
        for _ in 0..20 {
            let n = 1 + (rng.random::<u64>() % 12) as usize;
            let pts: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
            let exact = fill_distance(&pts, (0.0, 10.0)).unwrap();
            let scan = (0..100_000)
                .map(|i| {
                    let d = i as f64 * 10.0 / 99_999.0;
                    pts.iter().map(|&p| (d - p).abs()).fold(f64::INFINITY, f64::min)
                })
                .fold(0.0f64, f64::max);
            assert!(
                (exact - scan).abs() <= 10.0 / 99_999.0,
                "exact {exact} scan {scan}"
            );
        }
    }

    #[test]
    fn mu_law_improves_near_region_fill_distance() {
        // Fill distance over the near-transmitter fifth of the domain,
        // mu-law vs uniform draws, strict majority over 500 seeds.
        let (z0, z1) = (0.0, 1.0);
        let sub = (z0, z0 + 0.2 * (z1 - z0));
        let params = MuLawParams::new(15.0, z0, z1).unwrap();
        let mut wins = 0usize;
        let k = 12;
        for seed in 0..500u64 {
            let mu_pts: Vec<f64> = draw_nonuniform_radii(k, &params, seed)
                .unwrap()
                .into_iter()
                .filter(|&r| r >= sub.0 && r <= sub.1)
                .collect();
            let mut rng = stream_rng(seed, DOMAIN_RADII, 1);
            let uni_pts: Vec<f64> = (0..k)
                .map(|_| rng.random::<f64>())
                .filter(|&r| r >= sub.0 && r <= sub.1)
                .collect();
            let h_mu = if mu_pts.is_empty() {
                sub.1 - sub.0
            } else {
                fill_distance(&mu_pts, sub).unwrap()
            };
            let h_uni = if uni_pts.is_empty() {
                sub.1 - sub.0
            } else {
                fill_distance(&uni_pts, sub).unwrap()
            };
            if h_mu < h_uni {
                wins += 1;
            }
        }
        assert!(wins > 250, "mu-law wins {wins}/500");
    }

    #[test]
    fn observations_round_trip_map_values() {
        let geom = ArrayGeometry::<f64>::new(16, 100e9).unwrap();
        let bf = Beamformer::omnidirectional(16).unwrap();
        let grid = GridSpec::new(-80.0, 80.0, 0.1, 10.0, 20, 50).unwrap();
        let map = generate_map(&grid, &geom, &bf, 1.0, 0.0, 3).unwrap();
        let mask = build_mask(&grid, 0.2, &SamplingStrategy::Uniform, 3).unwrap();
        let obs = Observations::from_map(&map, &mask).unwrap();
        for (i, j, v) in obs.triples() {
            assert_eq!(v, map.values[(i, j)]);
        }
        let triples: Vec<_> = obs.triples().collect();
        let rebuilt = Observations::from_triples(&triples, 20, 50, 0.2).unwrap();
        assert_eq!(obs, rebuilt);
    }
}
