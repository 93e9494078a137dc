//! Synthetic functional data with measurement error and an instrument, and
//! Monte Carlo scoring of estimators by integrated squared error.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::dist::standard_normal;
use crate::bayes::rng::{stream_id, stream_rng, StreamRole};
use crate::delta::DeltaEstimate;
use crate::fda::{FunctionalDataset, Grid};
use crate::model::{fit_naive, run_chain, McmcConfig, PosteriorDraws};
use crate::pipeline::{prepare, prepare_with_delta, PipelineError, PipelineSettings, Prepared};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("need at least 2 replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("estimate matrix has {actual} columns, truth has {expected} points")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("replicate {rep}, estimator {estimator}: {source}")]
    Replicate {
        rep: usize,
        estimator: EstimatorId,
        source: PipelineError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrueBeta {
    /// `sin(2πt)`
    Sine,
    /// `4(t − 0.5)²`
    Quadratic,
    Zero,
}

impl TrueBeta {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            TrueBeta::Sine => (2.0 * PI * t).sin(),
            TrueBeta::Quadratic => 4.0 * (t - 0.5).powi(2),
            TrueBeta::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorDist {
    Normal,
    /// `0.5 N(−0.5, σ²/2) + 0.5 N(0.5, σ²/2)`, shifted to mean zero.
    SkewMixture,
}

/// Mean function of the latent curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentMean {
    /// `sin(2πt)` for everyone.
    Sine,
    /// `+sin(2πt)` for even-indexed curves, `−sin(2πt)` for odd ones.
    TwoGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorId {
    /// The measurement-error model with the scaled instrument.
    BayesIv,
    /// The same regression with `W` plugged in for `X`.
    NaiveW,
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorId::BayesIv => "bayes_iv",
            EstimatorId::NaiveW => "naive_w",
        })
    }
}

impl FromStr for EstimatorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bayes_iv" => Ok(EstimatorId::BayesIv),
            "naive_w" => Ok(EstimatorId::NaiveW),
            other => Err(format!("unknown estimator `{other}`")),
        }
    }
}

/// Settings used to fit each replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub pipeline: PipelineSettings,
    pub mcmc: McmcConfig,
    /// Scale the instrument by the generating `δ(t)` instead of its estimate.
    pub known_delta: bool,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            pipeline: PipelineSettings::default(),
            mcmc: McmcConfig {
                n_iter: 2_000,
                burn_in: 500,
                thin: 1,
                snapshot_every: 0,
                keep_allocations: false,
                ..McmcConfig::default()
            },
            known_delta: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    pub n_grid: usize,
    pub sigma_x: f64,
    pub sigma_u: f64,
    pub sigma_w: f64,
    pub sigma_e: f64,
    pub rho_x: f64,
    pub rho_u: f64,
    pub rho_w: f64,
    pub delta: f64,
    pub n_reps: usize,
    pub seed: u64,
    /// Number of error-free scalar covariates; their coefficients are zero.
    pub n_covariates: usize,
    pub true_beta: TrueBeta,
    pub error_dist: ErrorDist,
    pub latent_mean: LatentMean,
    pub fit: FitSettings,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            n: 500,
            n_grid: 50,
            sigma_x: 4.0,
            sigma_u: 4.0,
            sigma_w: 1.0,
            sigma_e: 1.0,
            rho_x: 0.25,
            rho_u: 0.25,
            rho_w: 0.25,
            delta: 2.0,
            n_reps: 100,
            seed: 1,
            n_covariates: 1,
            true_beta: TrueBeta::Sine,
            error_dist: ErrorDist::Normal,
            latent_mean: LatentMean::Sine,
            fit: FitSettings::default(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if self.n < 2 || self.n_grid < 2 {
            return bad(format!(
                "need n >= 2 and n_grid >= 2 (n = {}, n_grid = {})",
                self.n, self.n_grid
            ));
        }
        for (name, s) in [
            ("sigma_x", self.sigma_x),
            ("sigma_u", self.sigma_u),
            ("sigma_w", self.sigma_w),
            ("sigma_e", self.sigma_e),
            ("delta", self.delta),
        ] {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("{name} must be positive, got {s}"));
            }
        }
        for (name, r) in [("rho_x", self.rho_x), ("rho_u", self.rho_u), ("rho_w", self.rho_w)] {
            if !(0.0..1.0).contains(&r) {
                return bad(format!("{name} must lie in [0, 1), got {r}"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::uniform(0.0, 1.0, self.n_grid).expect("validated grid size")
    }

    /// `δ(t) = (δ/2)(1 + sin 2πt) + min(δ, 0.02)`.
    pub fn delta_function(&self, t: f64) -> f64 {
        0.5 * self.delta * (1.0 + (2.0 * PI * t).sin()) + self.delta.min(0.02)
    }

    pub fn beta_curve(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n_grid,
            self.grid().points().iter().map(|&t| self.true_beta.eval(t)),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
    pub w: FunctionalDataset,
    pub m: FunctionalDataset,
    pub x: FunctionalDataset,
    pub beta_true: DVector<f64>,
    pub delta_true: DVector<f64>,
    /// Latent mean group of each curve (all zero unless two groups are simulated).
    pub groups: Vec<usize>,
}

/// `σ(√ρ a + √(1−ρ) e_t)`: an exchangeable Gaussian process on the grid.
fn exchangeable_rows<R: Rng + ?Sized>(rng: &mut R, n: usize, t: usize, sigma: f64, rho: f64) -> DMatrix<f64> {
    let (shared, own) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut out = DMatrix::zeros(n, t);
    for i in 0..n {
        let a = standard_normal(rng);
        for j in 0..t {
            out[(i, j)] = sigma * (shared * a + own * standard_normal(rng));
        }
    }
    out
}

pub fn simulate_dataset<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<SimulatedData, SimError> {
    scenario.validate()?;
    let (n, t) = (scenario.n, scenario.n_grid);
    let grid = scenario.grid();
    let pts = grid.points().to_vec();
    let groups: Vec<usize> = match scenario.latent_mean {
        LatentMean::Sine => vec![0; n],
        LatentMean::TwoGroup => (0..n).map(|i| i % 2).collect(),
    };
    let mean = |i: usize, s: f64| {
        let base = (2.0 * PI * s).sin();
        if groups[i] == 1 {
            -base
        } else {
            base
        }
    };

    let mut x = exchangeable_rows(rng, n, t, scenario.sigma_x, scenario.rho_x);
    for i in 0..n {
        for j in 0..t {
            x[(i, j)] += mean(i, pts[j]);
        }
    }
    let u = exchangeable_rows(rng, n, t, scenario.sigma_u, scenario.rho_u);
    let omega = exchangeable_rows(rng, n, t, scenario.sigma_w, scenario.rho_w);
    let delta_true = DVector::from_iterator(t, pts.iter().map(|&s| scenario.delta_function(s)));
    let w = &x + u;
    let mut m = omega;
    for i in 0..n {
        for j in 0..t {
            m[(i, j)] += delta_true[j] * x[(i, j)];
        }
    }

    let beta_true = scenario.beta_curve();
    let weights = grid.trapezoid_weights();
    let signal = &x * beta_true.component_mul(&weights);
    let z = DMatrix::from_fn(n, scenario.n_covariates, |_, _| standard_normal(rng));
    let y = DVector::from_fn(n, |i, _| {
        let e = match scenario.error_dist {
            ErrorDist::Normal => scenario.sigma_e * standard_normal(rng),
            ErrorDist::SkewMixture => {
                let centre = if rng.random::<f64>() < 0.5 { -0.5 } else { 0.5 };
                // The two centres have equal weight, so the mixture mean is already zero.
                centre + scenario.sigma_e * std::f64::consts::FRAC_1_SQRT_2 * standard_normal(rng)
            }
        };
        signal[i] + e
    });

    let wrap = |v: DMatrix<f64>| FunctionalDataset::with_default_ids(grid.clone(), v).expect("finite simulated curves");
    Ok(SimulatedData {
        y,
        z,
        w: wrap(w),
        m: wrap(m),
        x: wrap(x),
        beta_true,
        delta_true,
        groups,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimator: EstimatorId,
    pub abias2: f64,
    pub avar: f64,
    pub msie: f64,
    /// Monte Carlo standard error of `msie` from the per-replicate errors.
    pub msie_se: f64,
    /// `(1/T) Σ_t (β̂_r(t) − β(t))²` for each replicate.
    pub per_rep_ise: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsieReport {
    pub scenario: Scenario,
    pub n_reps: usize,
    pub estimators: Vec<EstimatorReport>,
}

impl MsieReport {
    pub fn get(&self, id: EstimatorId) -> Option<&EstimatorReport> {
        self.estimators.iter().find(|e| e.estimator == id)
    }
}

/// Squared bias and variance of replicate curves (rows of `estimates`).
pub fn compute_msie(
    estimator: EstimatorId,
    estimates: &DMatrix<f64>,
    truth: &DVector<f64>,
) -> Result<EstimatorReport, SimError> {
    let (reps, t) = estimates.shape();
    if reps < 2 {
        return Err(SimError::TooFewReplicates(reps));
    }
    if t != truth.len() {
        return Err(SimError::LengthMismatch {
            expected: truth.len(),
            actual: t,
        });
    }
    let mean = estimates.row_mean().transpose();
    let abias2 = (&mean - truth).norm_squared() / t as f64;
    let mut avar = 0.0;
    for r in 0..reps {
        for j in 0..t {
            avar += (estimates[(r, j)] - mean[j]).powi(2);
        }
    }
    avar /= (reps * t) as f64;
    let per_rep_ise: Vec<f64> = (0..reps)
        .map(|r| (estimates.row(r).transpose() - truth).norm_squared() / t as f64)
        .collect();
    let ise_mean = per_rep_ise.iter().sum::<f64>() / reps as f64;
    let ise_var = per_rep_ise.iter().map(|e| (e - ise_mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    Ok(EstimatorReport {
        estimator,
        abias2,
        avar,
        msie: abias2 + avar,
        msie_se: (ise_var / reps as f64).sqrt(),
        per_rep_ise,
    })
}

/// Posterior-mean `β(t)` on the grid.
pub fn beta_posterior_mean(draws: &PosteriorDraws, basis: &crate::fda::BasisSystem) -> DVector<f64> {
    basis.basis_values() * draws.gamma_mean()
}

/// Pipeline inputs for a simulated data set, honouring `known_delta`.
pub fn prepare_data(data: &SimulatedData, settings: &FitSettings) -> Result<Prepared, PipelineError> {
    let (y, z) = (data.y.clone(), data.z.clone());
    if settings.known_delta {
        let delta = DeltaEstimate {
            grid: data.w.grid().clone(),
            raw: data.delta_true.clone(),
            smoothed: data.delta_true.clone(),
            bandwidth: 0.0,
        };
        prepare_with_delta(&data.w, &data.m, y, z, delta, &settings.pipeline)
    } else {
        prepare(&data.w, &data.m, y, z, &settings.pipeline)
    }
}

/// Fits one estimator to a simulated data set and returns `β̂` on the grid.
pub fn fit_estimator<R: Rng + ?Sized>(
    data: &SimulatedData,
    estimator: EstimatorId,
    settings: &FitSettings,
    rng: &mut R,
) -> Result<DVector<f64>, PipelineError> {
    let prepared = prepare_data(data, settings)?;
    let draws = match estimator {
        EstimatorId::BayesIv => run_chain(&prepared.inputs, &settings.mcmc, rng)?,
        EstimatorId::NaiveW => fit_naive(&prepared.inputs, &settings.mcmc, rng)?,
    };
    Ok(beta_posterior_mean(&draws, &prepared.basis))
}

fn estimator_stream(index: usize) -> StreamRole {
    StreamRole::Fit(index as u32)
}

/// Curves `β̂_r` for replicate `rep`, one per estimator. Every random draw
/// comes from streams keyed by `(seed, rep)`, so the result does not depend
/// on which thread runs it.
pub fn run_replicate(
    scenario: &Scenario,
    estimators: &[EstimatorId],
    rep: usize,
) -> Result<Vec<DVector<f64>>, SimError> {
    let mut data_rng = stream_rng(scenario.seed, stream_id(rep as u64, StreamRole::Data));
    let data = simulate_dataset(scenario, &mut data_rng)?;
    estimators
        .iter()
        .enumerate()
        .map(|(k, &est)| {
            let mut rng = stream_rng(scenario.seed, stream_id(rep as u64, estimator_stream(k)));
            fit_estimator(&data, est, &scenario.fit, &mut rng).map_err(|source| SimError::Replicate {
                rep,
                estimator: est,
                source,
            })
        })
        .collect()
}

/// Runs `scenario.n_reps` replicates in parallel and scores each estimator.
/// Any failing replicate aborts the study.
pub fn run_study(scenario: &Scenario, estimators: &[EstimatorId]) -> Result<MsieReport, SimError> {
    scenario.validate()?;
    if scenario.n_reps < 2 {
        return Err(SimError::TooFewReplicates(scenario.n_reps));
    }
    let curves = (0..scenario.n_reps)
        .into_par_iter()
        .map(|rep| run_replicate(scenario, estimators, rep))
        .collect::<Result<Vec<_>, _>>()?;
    let truth = scenario.beta_curve();
    let reports = estimators
        .iter()
        .enumerate()
        .map(|(k, &est)| {
            let m = DMatrix::from_fn(scenario.n_reps, scenario.n_grid, |r, j| curves[r][k][j]);
            compute_msie(est, &m, &truth)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MsieReport {
        scenario: scenario.clone(),
        n_reps: scenario.n_reps,
        estimators: reports,
    })
}
