//! Experiment orchestration: scene presets, end-to-end method pipelines,
//! and Monte Carlo sweeps with one metrics record per (point, trial,
//! method).

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_map, ArrayGeometry, Beamformer, GridSpec, RadioMap};
use crate::error::{Error, Result};
use crate::lowrank::{solve_box_nnm, solve_observed_nnm, SolverConfig};
use crate::lpr::{lpr_map, lpr_mc, LprConfig};
use crate::metrics::{nmse, singular_energy};
use crate::rbf::{interpolate_map, pool_loocv, Kernel, RbfConfig};
use crate::robust::{select_delta, HuberConfig};
use crate::sampling::{build_mask, MuLawParams, Observations, SamplingStrategy};
use crate::scalar::{cast, Scalar};

/// Physical scene: grid, array, transmit power, shadowing level, and the
/// seed used when a single map is generated from this config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig<T> {
    pub grid: GridSpec<T>,
    pub n_elements: usize,
    pub carrier_freq: T,
    pub power: T,
    pub sigma: T,
    pub seed: u64,
}

impl<T: Scalar> SceneConfig<T> {
    /// The benchmark scene: 256-element array at 100 GHz over a 100x100
    /// grid spanning -80..80 degrees and 0.1..10 m, unit power.
    pub fn default_scene() -> Self {
        Self {
            grid: GridSpec {
                theta_min: cast::<T>(-80.0),
                theta_max: cast::<T>(80.0),
                r_min: cast::<T>(0.1),
                r_max: cast::<T>(10.0),
                n_theta: 100,
                n_r: 100,
            },
            n_elements: 256,
            carrier_freq: cast::<T>(100e9),
            power: T::one(),
            sigma: cast::<T>(3.0),
            seed: 1,
        }
    }

    pub fn geometry(&self) -> Result<ArrayGeometry<T>> {
        ArrayGeometry::new(self.n_elements, self.carrier_freq)
    }

    pub fn beamformer(&self) -> Result<Beamformer<T>> {
        Beamformer::omnidirectional(self.n_elements)
    }

    /// Generates the ground-truth map for this scene at `sigma` and `seed`.
    pub fn generate(&self, sigma: T, seed: u64) -> Result<RadioMap<T>> {
        generate_map(
            &self.grid,
            &self.geometry()?,
            &self.beamformer()?,
            self.power,
            sigma,
            seed,
        )
    }
}

/// Reconstruction methods runnable by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Method<T> {
    /// Regularized multiquadric interpolation only.
    Rbf,
    /// Interpolation without the constant term, for the regularization
    /// comparison.
    RbfUnregularized,
    /// Interpolation with an alternative kernel; Gaussian resolves its shape
    /// parameter per map by leave-one-out selection.
    RbfKernel { kernel: Kernel },
    /// Full pipeline: interpolation prior, Huberized leave-one-out
    /// tolerance, box-constrained nuclear-norm refinement.
    RbfMcHuber,
    /// Box-constrained refinement at an externally fixed tolerance.
    RbfMcFixed { delta: T },
    /// Nuclear-norm completion from the observed entries alone.
    McNnm,
    /// Local polynomial regression only.
    Lpr,
    /// Local polynomial prior with box-constrained refinement.
    LprMc,
}

impl<T: Scalar> Method<T> {
    pub fn label(&self) -> String {
        match self {
            Method::Rbf => "rbf".into(),
            Method::RbfUnregularized => "rbf_unreg".into(),
            Method::RbfKernel { kernel } => format!("rbf_{}", kernel.label()),
            Method::RbfMcHuber => "rbf_mc_huber".into(),
            Method::RbfMcFixed { .. } => "rbf_mc_fixed".into(),
            Method::McNnm => "mc_nnm".into(),
            Method::Lpr => "lpr".into(),
            Method::LprMc => "lpr_mc".into(),
        }
    }
}

impl<T: Scalar> FromStr for Method<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rbf" => Method::Rbf,
            "rbf_unreg" => Method::RbfUnregularized,
            "rbf_multiquadric" => Method::RbfKernel { kernel: Kernel::Multiquadric },
            "rbf_gaussian" => Method::RbfKernel { kernel: Kernel::Gaussian },
            "rbf_tps" => Method::RbfKernel { kernel: Kernel::ThinPlateSpline },
            "rbf_mc_huber" => Method::RbfMcHuber,
            "mc_nnm" => Method::McNnm,
            "lpr" => Method::Lpr,
            "lpr_mc" => Method::LprMc,
            other => {
                return Err(Error::invalid(format!(
                    "unknown method '{other}' (rbf_mc_fixed needs an explicit delta)"
                )))
            }
        })
    }
}

/// Shared knobs for every pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig<T> {
    pub rbf: RbfConfig<T>,
    pub lpr: LprConfig<T>,
    pub huber: HuberConfig<T>,
    pub solver: SolverConfig<T>,
    /// Shape-parameter candidates for the Gaussian kernel comparison.
    pub gaussian_eps_grid: Vec<T>,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            rbf: RbfConfig::default(),
            lpr: LprConfig::default(),
            huber: HuberConfig::default(),
            solver: SolverConfig::default(),
            gaussian_eps_grid: [0.5, 1.0, 2.0, 4.0].iter().map(|&e| cast::<T>(e)).collect(),
        }
    }
}

/// Per-method diagnostics attached to a reconstruction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodDiagnostics {
    pub delta: Option<f64>,
    pub huber_threshold: Option<f64>,
    pub huber_iterations: Option<usize>,
    pub huber_converged: Option<bool>,
    pub solver_iterations: Option<usize>,
    pub solver_converged: Option<bool>,
    pub max_violation: Option<f64>,
    pub final_nuclear_norm: Option<f64>,
    /// Slices too small to contribute leave-one-out residuals.
    pub skipped_slices: usize,
    pub gaussian_epsilon: Option<f64>,
}

fn to_f64<T: ToPrimitive>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Runs one reconstruction method end to end on a set of observations.
pub fn run_method<T: Scalar>(
    method: &Method<T>,
    obs: &Observations<T>,
    grid: &GridSpec<T>,
    cfg: &PipelineConfig<T>,
) -> Result<(DMatrix<T>, MethodDiagnostics)> {
    let mut diag = MethodDiagnostics::default();
    let estimate = match method {
        Method::Rbf => interpolate_map(obs, grid, &cfg.rbf)?,
        Method::RbfUnregularized => {
            let rbf = RbfConfig {
                constant_term: false,
                ..cfg.rbf
            };
            interpolate_map(obs, grid, &rbf)?
        }
        Method::RbfKernel { kernel } => match kernel {
            Kernel::Gaussian => {
                let (eps, _) = select_gaussian_epsilon(obs, grid, cfg)?;
                diag.gaussian_epsilon = Some(to_f64(eps));
                interpolate_map(obs, grid, &RbfConfig::with_kernel(Kernel::Gaussian, eps))?
            }
            k => interpolate_map(obs, grid, &RbfConfig::with_kernel(*k, cfg.rbf.epsilon))?,
        },
        Method::RbfMcHuber => {
            let prior = interpolate_map(obs, grid, &cfg.rbf)?;
            let pool = pool_loocv(obs, grid, &cfg.rbf)?;
            diag.skipped_slices = pool.skipped_slices.len();
            if pool.residuals.is_empty() {
                return Err(Error::invalid(
                    "no slice is large enough for leave-one-out tolerance selection",
                ));
            }
            let sel = select_delta(&pool.residuals, &cfg.huber)?;
            diag.delta = Some(to_f64(sel.delta));
            diag.huber_threshold = Some(to_f64(sel.threshold));
            diag.huber_iterations = Some(sel.iterations);
            diag.huber_converged = Some(sel.converged);
            let res = solve_box_nnm(&prior, sel.delta, &cfg.solver)?;
            diag.solver_iterations = Some(res.iterations);
            diag.solver_converged = Some(res.converged);
            diag.max_violation = Some(to_f64(res.max_violation));
            diag.final_nuclear_norm = Some(to_f64(res.final_nuclear_norm));
            res.solution
        }
        Method::RbfMcFixed { delta } => {
            let prior = interpolate_map(obs, grid, &cfg.rbf)?;
            diag.delta = Some(to_f64(*delta));
            let res = solve_box_nnm(&prior, *delta, &cfg.solver)?;
            diag.solver_iterations = Some(res.iterations);
            diag.solver_converged = Some(res.converged);
            diag.max_violation = Some(to_f64(res.max_violation));
            diag.final_nuclear_norm = Some(to_f64(res.final_nuclear_norm));
            res.solution
        }
        Method::McNnm => {
            let res = solve_observed_nnm(obs, &cfg.solver)?;
            diag.solver_iterations = Some(res.iterations);
            diag.solver_converged = Some(res.converged);
            diag.max_violation = Some(to_f64(res.max_violation));
            diag.final_nuclear_norm = Some(to_f64(res.final_nuclear_norm));
            res.solution
        }
        Method::Lpr => lpr_map(obs, grid, &cfg.lpr)?,
        Method::LprMc => {
            let (res, sel) = lpr_mc(obs, grid, &cfg.lpr, &cfg.huber, &cfg.solver)?;
            diag.delta = Some(to_f64(sel.delta));
            diag.huber_threshold = Some(to_f64(sel.threshold));
            diag.huber_iterations = Some(sel.iterations);
            diag.huber_converged = Some(sel.converged);
            diag.solver_iterations = Some(res.iterations);
            diag.solver_converged = Some(res.converged);
            diag.max_violation = Some(to_f64(res.max_violation));
            diag.final_nuclear_norm = Some(to_f64(res.final_nuclear_norm));
            res.solution
        }
    };
    Ok((estimate, diag))
}

/// Picks the Gaussian shape parameter minimizing the pooled mean squared
/// leave-one-out residual over the candidate grid.
pub fn select_gaussian_epsilon<T: Scalar>(
    obs: &Observations<T>,
    grid: &GridSpec<T>,
    cfg: &PipelineConfig<T>,
) -> Result<(T, T)> {
    if cfg.gaussian_eps_grid.is_empty() {
        return Err(Error::invalid("Gaussian shape-parameter grid is empty"));
    }
    let mut best: Option<(T, T)> = None;
    for &eps in &cfg.gaussian_eps_grid {
        let pool = pool_loocv(obs, grid, &RbfConfig::with_kernel(Kernel::Gaussian, eps))?;
        if pool.residuals.is_empty() {
            continue;
        }
        let mse: T = pool.residuals.iter().map(|&e| e * e).sum::<T>()
            / cast::<T>(pool.residuals.len() as f64);
        if best.map_or(true, |(_, b)| mse < b) {
            best = Some((eps, mse));
        }
    }
    best.ok_or_else(|| Error::invalid("no slice large enough to tune the Gaussian kernel"))
}

/// One sweep point: sampling condition plus the methods evaluated on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint<T> {
    pub rho: f64,
    pub sigma: T,
    pub strategy: SamplingStrategy<T>,
    pub methods: Vec<Method<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ExperimentKind<T> {
    /// Monte Carlo reconstruction sweep.
    Reconstruction { points: Vec<SweepPoint<T>> },
    /// Singular-energy profile of the scene's noiseless map.
    SingularEnergy { ks: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig<T> {
    pub scene: SceneConfig<T>,
    pub pipeline: PipelineConfig<T>,
    pub kind: ExperimentKind<T>,
    pub trials: u32,
    pub base_seed: u64,
}

/// One reconstruction outcome, flattened for CSV persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub method: String,
    pub rho: f64,
    pub sigma: f64,
    pub mu: Option<f64>,
    pub strategy: String,
    pub seed: u64,
    pub trial: u32,
    pub nmse: f64,
    pub wall_time_s: f64,
    pub delta: Option<f64>,
    pub solver_iterations: Option<u64>,
    pub solver_converged: Option<bool>,
    pub max_violation: Option<f64>,
}

impl MetricsRecord {
    /// Copy with the timing field cleared; everything else is a
    /// deterministic function of the experiment config.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub k: usize,
    pub energy: f64,
}

/// A recorded per-trial failure; the sweep continues past these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub point: usize,
    pub trial: u32,
    pub method: String,
    pub message: String,
}

impl fmt::Display for TrialFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "point {} trial {} method {}: {}",
            self.point, self.trial, self.method, self.message
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutcome {
    pub records: Vec<MetricsRecord>,
    pub energy: Vec<EnergyRecord>,
    pub failures: Vec<TrialFailure>,
}

/// Runs an experiment: every (sweep point, trial) pair generates a fresh map
/// and mask from `base_seed + trial`, runs each method end to end, and emits
/// one record per method. Per-trial failures are recorded, not fatal; the
/// run errors only when nothing succeeds.
pub fn run_experiment<T: Scalar>(cfg: &ExperimentConfig<T>) -> Result<ExperimentOutcome> {
    if cfg.trials == 0 {
        return Err(Error::invalid("experiment needs at least one trial"));
    }
    match &cfg.kind {
        ExperimentKind::SingularEnergy { ks } => run_singular_energy(cfg, ks),
        ExperimentKind::Reconstruction { points } => run_reconstruction(cfg, points),
    }
}

fn run_singular_energy<T: Scalar>(
    cfg: &ExperimentConfig<T>,
    ks: &[usize],
) -> Result<ExperimentOutcome> {
    let map = cfg.scene.generate(cfg.scene.sigma, cfg.scene.seed)?;
    let energy = ks
        .iter()
        .map(|&k| {
            Ok(EnergyRecord {
                k,
                energy: to_f64(singular_energy(&map.values, k)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutcome {
        energy,
        ..Default::default()
    })
}

fn run_reconstruction<T: Scalar>(
    cfg: &ExperimentConfig<T>,
    points: &[SweepPoint<T>],
) -> Result<ExperimentOutcome> {
    if points.is_empty() {
        return Err(Error::invalid("experiment has no sweep points"));
    }
    let geom = cfg.scene.geometry()?;
    let bf = cfg.scene.beamformer()?;
    let grid = &cfg.scene.grid;

    let jobs: Vec<(usize, u32)> = (0..points.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();

    let per_job: Vec<(Vec<MetricsRecord>, Vec<TrialFailure>)> = jobs
        .par_iter()
        .map(|&(p, trial)| {
            let point = &points[p];
            let seed = cfg.base_seed + trial as u64;
            let mut records = Vec::new();
            let mut failures = Vec::new();
            let prepared = (|| -> Result<Observations<T>> {
                let map = generate_map(grid, &geom, &bf, cfg.scene.power, point.sigma, seed)?;
                let mask = build_mask(grid, point.rho, &point.strategy, seed)?;
                Observations::from_map(&map, &mask)
            })();
            match prepared {
                Err(e) => {
                    for m in &point.methods {
                        failures.push(TrialFailure {
                            point: p,
                            trial,
                            method: m.label(),
                            message: e.to_string(),
                        });
                    }
                }
                Ok(obs) => {
                    // regenerate the truth for scoring (obs holds samples only)
                    let truth = generate_map(grid, &geom, &bf, cfg.scene.power, point.sigma, seed)
                        .expect("map generation succeeded above");
                    for m in &point.methods {
                        let t0 = Instant::now();
                        match run_method(m, &obs, grid, &cfg.pipeline) {
                            Ok((estimate, diag)) => {
                                match nmse(&truth.values, &estimate) {
                                    Ok(err) => records.push(MetricsRecord {
                                        method: m.label(),
                                        rho: point.rho,
                                        sigma: to_f64(point.sigma),
                                        mu: point.strategy.mu().map(to_f64),
                                        strategy: point.strategy.label().to_string(),
                                        seed,
                                        trial,
                                        nmse: to_f64(err),
                                        wall_time_s: t0.elapsed().as_secs_f64(),
                                        delta: diag.delta,
                                        solver_iterations: diag.solver_iterations.map(|i| i as u64),
                                        solver_converged: diag.solver_converged,
                                        max_violation: diag.max_violation,
                                    }),
                                    Err(e) => failures.push(TrialFailure {
                                        point: p,
                                        trial,
                                        method: m.label(),
                                        message: e.to_string(),
                                    }),
                                }
                            }
                            Err(e) => failures.push(TrialFailure {
                                point: p,
                                trial,
                                method: m.label(),
                                message: e.to_string(),
                            }),
                        }
                    }
                }
            }
            (records, failures)
        })
        .collect();

    let mut outcome = ExperimentOutcome::default();
    for (records, failures) in per_job {
        outcome.records.extend(records);
        outcome.failures.extend(failures);
    }
    if outcome.records.is_empty() {
        let detail = outcome
            .failures
            .first()
            .map(|f| f.to_string())
            .unwrap_or_else(|| "no sweep points".into());
        return Err(Error::invalid(format!("every trial failed; first failure: {detail}")));
    }
    Ok(outcome)
}

/// Named benchmark presets at desk scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig2b,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Fig11,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "fig2b" => Preset::Fig2b,
            "fig5" => Preset::Fig5,
            "fig6" => Preset::Fig6,
            "fig7" => Preset::Fig7,
            "fig8" => Preset::Fig8,
            "fig9" => Preset::Fig9,
            "fig10" => Preset::Fig10,
            "fig11" => Preset::Fig11,
            other => return Err(Error::invalid(format!("unknown preset '{other}'"))),
        })
    }
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Fig2b,
        Preset::Fig5,
        Preset::Fig6,
        Preset::Fig7,
        Preset::Fig8,
        Preset::Fig9,
        Preset::Fig10,
        Preset::Fig11,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2b => "fig2b",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::Fig8 => "fig8",
            Preset::Fig9 => "fig9",
            Preset::Fig10 => "fig10",
            Preset::Fig11 => "fig11",
        }
    }
}

/// The fixed tolerance grid swept by the fig8 preset.
pub fn fig8_delta_grid<T: Scalar>() -> Vec<T> {
    (0..=16).map(|i| cast::<T>(i as f64 * 0.5)).collect()
}

const BASELINE_METHODS: usize = 5;

fn comparison_methods<T: Scalar>() -> Vec<Method<T>> {
    let m = vec![
        Method::RbfMcHuber,
        Method::Rbf,
        Method::McNnm,
        Method::Lpr,
        Method::LprMc,
    ];
    debug_assert_eq!(m.len(), BASELINE_METHODS);
    m
}

/// Builds the configuration reproducing one benchmark figure.
pub fn preset<T: Scalar>(p: Preset) -> ExperimentConfig<T> {
    let mut scene = SceneConfig::default_scene();
    let uniform = SamplingStrategy::Uniform;
    let trials = 20;
    let base_seed = 42;
    let kind = match p {
        Preset::Fig2b => {
            scene.sigma = T::zero();
            ExperimentKind::SingularEnergy {
                ks: (1..=20).collect(),
            }
        }
        Preset::Fig5 => ExperimentKind::Reconstruction {
            points: [0.05, 0.10, 0.15, 0.20]
                .iter()
                .map(|&rho| SweepPoint {
                    rho,
                    sigma: T::zero(),
                    strategy: uniform,
                    methods: vec![
                        Method::Rbf,
                        Method::RbfKernel { kernel: Kernel::Gaussian },
                        Method::RbfKernel { kernel: Kernel::ThinPlateSpline },
                        Method::Lpr,
                    ],
                })
                .collect(),
        },
        Preset::Fig6 => ExperimentKind::Reconstruction {
            points: [0.10, 0.15, 0.20]
                .iter()
                .map(|&rho| SweepPoint {
                    rho,
                    sigma: T::zero(),
                    strategy: uniform,
                    methods: vec![Method::Rbf, Method::RbfUnregularized],
                })
                .collect(),
        },
        Preset::Fig7 => {
            let grid = SceneConfig::<T>::default_scene().grid;
            let mu_law = SamplingStrategy::mu_law(
                MuLawParams::for_grid(&grid, cast::<T>(15.0)).expect("grid is valid"),
            );
            ExperimentKind::Reconstruction {
                points: [1.0, 2.0, 3.0, 4.0]
                    .iter()
                    .flat_map(|&sigma| {
                        [uniform, mu_law].into_iter().map(move |strategy| SweepPoint {
                            rho: 0.1,
                            sigma: cast::<T>(sigma),
                            strategy,
                            methods: vec![Method::Rbf],
                        })
                    })
                    .collect(),
            }
        }
        Preset::Fig8 => {
            let mut methods = vec![Method::Rbf, Method::RbfMcHuber];
            methods.extend(
                fig8_delta_grid::<T>()
                    .into_iter()
                    .map(|delta| Method::RbfMcFixed { delta }),
            );
            ExperimentKind::Reconstruction {
                points: vec![SweepPoint {
                    rho: 0.2,
                    sigma: cast::<T>(4.0),
                    strategy: uniform,
                    methods,
                }],
            }
        }
        Preset::Fig9 => ExperimentKind::Reconstruction {
            points: [0.06, 0.08, 0.10, 0.12, 0.14, 0.16]
                .iter()
                .map(|&rho| SweepPoint {
                    rho,
                    sigma: cast::<T>(3.0),
                    strategy: uniform,
                    methods: comparison_methods(),
                })
                .collect(),
        },
        Preset::Fig10 => ExperimentKind::Reconstruction {
            points: (1..=5)
                .map(|sigma| SweepPoint {
                    rho: 0.1,
                    sigma: cast::<T>(sigma as f64),
                    strategy: uniform,
                    methods: comparison_methods(),
                })
                .collect(),
        },
        Preset::Fig11 => ExperimentKind::Reconstruction {
            points: vec![SweepPoint {
                rho: 0.1,
                sigma: cast::<T>(4.0),
                strategy: uniform,
                methods: comparison_methods(),
            }],
        },
    };
    ExperimentConfig {
        scene,
        pipeline: PipelineConfig::default(),
        kind,
        trials,
        base_seed,
    }
}

/// Mean NMSE per `(method, key)` group of a record list.
pub fn mean_nmse_by<K, F>(records: &[MetricsRecord], key: F) -> std::collections::BTreeMap<(String, K), f64>
where
    K: Ord + Clone,
    F: Fn(&MetricsRecord) -> K,
{
    let mut sums: std::collections::BTreeMap<(String, K), (f64, usize)> = Default::default();
    for r in records {
        let entry = sums.entry((r.method.clone(), key(r))).or_insert((0.0, 0));
        entry.0 += r.nmse;
        entry.1 += 1;
    }
    sums.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}
