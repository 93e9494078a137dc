//! Truncated Dirichlet-process mixtures of normals.
//!
//! A block holds `K_comp` components with weights `π ~ Dir(α/K_comp, …)`,
//! conjugate component priors (normal–inverse-gamma in one dimension,
//! normal–inverse-Wishart in several) and one allocation per observation.
//! A Gibbs sweep over a block is
//!
//! 1. allocations, `P(z_i = k) ∝ π_k N(r_i | μ_k, Σ_k)`;
//! 2. component parameters from their conjugate posteriors;
//! 3. weights from `Dir(α/K_comp + n_k)`;
//! 4. optionally, recentering so that `Σ_k π_k μ_k = 0`. The shift is
//!    returned so the caller can move it into another parameter.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::{
    categorical, log_sum_exp, mvn_log_pdf, normal_log_pdf, normalize_log_weights, sample_dirichlet,
    sample_inverse_gamma, sample_inverse_wishart, standard_normal, standard_normal_vector,
};
use super::BayesError;
use crate::linalg::{log_det, spd_cholesky};

/// `σ² ~ Inv-Gamma(shape, scale)`, `μ | σ² ~ N(mean, σ²/kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NigPrior {
    pub mean: f64,
    pub kappa: f64,
    pub shape: f64,
    pub scale: f64,
}

impl Default for NigPrior {
    fn default() -> Self {
        Self {
            mean: 0.0,
            kappa: 0.01,
            shape: 1.0,
            scale: 1.0,
        }
    }
}

impl NigPrior {
    fn validate(&self) -> Result<(), BayesError> {
        let ok = self.mean.is_finite()
            && self.kappa > 0.0
            && self.shape > 0.0
            && self.scale > 0.0
            && self.kappa.is_finite()
            && self.shape.is_finite()
            && self.scale.is_finite();
        if ok {
            Ok(())
        } else {
            Err(BayesError::InvalidPrior(format!("{self:?}")))
        }
    }

    /// Conjugate update with the observations in `data`.
    pub fn posterior(&self, data: &[f64]) -> NigPrior {
        let m = data.len() as f64;
        if data.is_empty() {
            return *self;
        }
        let xbar = data.iter().sum::<f64>() / m;
        let ss: f64 = data.iter().map(|x| (x - xbar) * (x - xbar)).sum();
        let kappa = self.kappa + m;
        NigPrior {
            mean: (self.kappa * self.mean + m * xbar) / kappa,
            kappa,
            shape: self.shape + 0.5 * m,
            scale: self.scale + 0.5 * ss + 0.5 * self.kappa * m * (xbar - self.mean).powi(2) / kappa,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let var = sample_inverse_gamma(rng, self.shape, self.scale);
        let mean = self.mean + (var / self.kappa).sqrt() * standard_normal(rng);
        (mean, var)
    }
}

/// `Σ ~ Inv-W(dof, scale)`, `μ | Σ ~ N(mean, Σ/kappa)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwPrior {
    pub mean: DVector<f64>,
    pub kappa: f64,
    pub dof: f64,
    pub scale: DMatrix<f64>,
}

impl NiwPrior {
    pub fn new(mean: DVector<f64>, kappa: f64, dof: f64, scale: DMatrix<f64>) -> Result<Self, BayesError> {
        let dim = mean.len();
        if scale.nrows() != dim || scale.ncols() != dim {
            return Err(BayesError::DimensionMismatch {
                expected: dim,
                actual: scale.nrows(),
            });
        }
        if !(dof > dim as f64 - 1.0) {
            return Err(BayesError::InvalidDegreesOfFreedom { dof, dim });
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(BayesError::InvalidPrior(format!("kappa = {kappa}")));
        }
        spd_cholesky(&scale).ok_or(BayesError::NonSpdScale)?;
        Ok(Self {
            mean,
            kappa,
            dof,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Conjugate update from the sufficient statistics of `count`
    /// observations with sample mean `xbar` and centred scatter `scatter`.
    pub fn posterior_from_stats(&self, count: usize, xbar: &DVector<f64>, scatter: &DMatrix<f64>) -> NiwPrior {
        if count == 0 {
            return self.clone();
        }
        let m = count as f64;
        let kappa = self.kappa + m;
        let diff = xbar - &self.mean;
        let scale = &self.scale + scatter + (&diff * diff.transpose()) * (self.kappa * m / kappa);
        NiwPrior {
            mean: (&self.mean * self.kappa + xbar * m) / kappa,
            kappa,
            dof: self.dof + m,
            scale,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(DVector<f64>, DMatrix<f64>), BayesError> {
        let cov = sample_inverse_wishart(rng, self.dof, &self.scale)?;
        let chol = spd_cholesky(&cov).ok_or(BayesError::NumericalFailure("inverse-Wishart draw is not SPD".into()))?;
        let z = standard_normal_vector(rng, self.dim());
        let mean = &self.mean + chol.l() * z / self.kappa.sqrt();
        Ok((mean, cov))
    }
}

/// Anything with a mixture density.
pub trait MixtureBlock {
    type Value: ?Sized;
    fn log_density(&self, value: &Self::Value) -> f64;
}

/// `ln Σ_k π_k f_k(value)`.
pub fn log_density_mixture<B: MixtureBlock>(block: &B, value: &B::Value) -> f64 {
    block.log_density(value)
}

fn check_weights(weights: &[f64]) -> Result<(), BayesError> {
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || (total - 1.0).abs() > 1e-9 {
        return Err(BayesError::InvariantViolation(format!(
            "weights {weights:?} are not a simplex vector"
        )));
    }
    Ok(())
}

fn dirichlet_update<R: Rng + ?Sized>(
    rng: &mut R,
    concentration: f64,
    truncation: usize,
    allocations: &[usize],
) -> Result<Vec<f64>, BayesError> {
    let mut alpha = vec![concentration / truncation as f64; truncation];
    for &z in allocations {
        alpha[z] += 1.0;
    }
    sample_dirichlet(rng, &alpha)
}

/// One-dimensional block, used for the response error.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMixtureBlock {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Zero-based component index per observation.
    pub allocations: Vec<usize>,
    pub concentration: f64,
    pub prior: NigPrior,
}

impl ScalarMixtureBlock {
    /// Block with parameters and allocations drawn from the prior.
    pub fn from_prior<R: Rng + ?Sized>(
        truncation: usize,
        concentration: f64,
        prior: NigPrior,
        n_obs: usize,
        rng: &mut R,
    ) -> Result<Self, BayesError> {
        if truncation == 0 {
            return Err(BayesError::InvalidPrior("truncation must be at least 1".into()));
        }
        prior.validate()?;
        let weights = sample_dirichlet(rng, &vec![concentration / truncation as f64; truncation])?;
        let (means, variances) = (0..truncation).map(|_| prior.sample(rng)).unzip();
        let allocations = (0..n_obs).map(|_| categorical(rng, &weights)).collect();
        Ok(Self {
            weights,
            means,
            variances,
            allocations,
            concentration,
            prior,
        })
    }

    pub fn from_parts(
        weights: Vec<f64>,
        means: Vec<f64>,
        variances: Vec<f64>,
        allocations: Vec<usize>,
        concentration: f64,
        prior: NigPrior,
    ) -> Result<Self, BayesError> {
        prior.validate()?;
        let block = Self {
            weights,
            means,
            variances,
            allocations,
            concentration,
            prior,
        };
        block.check_shape()?;
        check_weights(&block.weights)?;
        Ok(block)
    }

    fn check_shape(&self) -> Result<(), BayesError> {
        let k = self.weights.len();
        if k == 0 || self.means.len() != k || self.variances.len() != k {
            return Err(BayesError::DimensionMismatch {
                expected: k,
                actual: self.means.len().min(self.variances.len()),
            });
        }
        if let Some(&z) = self.allocations.iter().find(|&&z| z >= k) {
            return Err(BayesError::InvariantViolation(format!("allocation {z} out of range")));
        }
        if !(self.concentration > 0.0) {
            return Err(BayesError::NonPositiveConcentration(self.concentration));
        }
        Ok(())
    }

    pub fn truncation(&self) -> usize {
        self.weights.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.truncation()];
        for &z in &self.allocations {
            c[z] += 1;
        }
        c
    }

    pub fn mixture_mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    pub fn component_log_density(&self, k: usize, x: f64) -> f64 {
        normal_log_pdf(x, self.means[k], self.variances[k])
    }

    /// Normalized allocation probabilities for a single residual.
    pub fn allocation_probabilities(&self, x: f64) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.truncation())
            .map(|k| self.weights[k].ln() + self.component_log_density(k, x))
            .collect();
        normalize_log_weights(&logs)
    }

    pub fn update_allocations<R: Rng + ?Sized>(&mut self, residuals: &[f64], rng: &mut R) -> Result<(), BayesError> {
        self.check_residuals(residuals.len())?;
        let k_comp = self.truncation();
        let log_w: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();
        let mut logs = vec![0.0; k_comp];
        for (i, &r) in residuals.iter().enumerate() {
            for k in 0..k_comp {
                logs[k] = log_w[k] + normal_log_pdf(r, self.means[k], self.variances[k]);
            }
            let probs = normalize_log_weights(&logs);
            debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            self.allocations[i] = categorical(rng, &probs);
        }
        Ok(())
    }

    pub fn update_components<R: Rng + ?Sized>(&mut self, residuals: &[f64], rng: &mut R) -> Result<(), BayesError> {
        self.check_residuals(residuals.len())?;
        let mut groups: Vec<Vec<f64>> = vec![Vec::new(); self.truncation()];
        for (&z, &r) in self.allocations.iter().zip(residuals) {
            groups[z].push(r);
        }
        for (k, data) in groups.iter().enumerate() {
            let (mean, var) = self.prior.posterior(data).sample(rng);
            self.means[k] = mean;
            self.variances[k] = var;
        }
        Ok(())
    }

    pub fn update_weights<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), BayesError> {
        self.weights = dirichlet_update(rng, self.concentration, self.truncation(), &self.allocations)?;
        Ok(())
    }

    /// Shifts every component mean by `−Σ_k π_k μ_k`; returns that shift.
    pub fn recenter(&mut self) -> f64 {
        let shift = self.mixture_mean();
        for m in &mut self.means {
            *m -= shift;
        }
        shift
    }

    /// Draws one value per observation from its allocated component.
    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.allocations
            .iter()
            .map(|&z| self.means[z] + self.variances[z].sqrt() * standard_normal(rng))
            .collect()
    }

    fn check_residuals(&self, len: usize) -> Result<(), BayesError> {
        if len == 0 {
            return Err(BayesError::EmptyResiduals);
        }
        if len != self.allocations.len() {
            return Err(BayesError::DimensionMismatch {
                expected: self.allocations.len(),
                actual: len,
            });
        }
        Ok(())
    }

    pub fn check_invariants(&self, zero_mean: bool) -> Result<(), BayesError> {
        self.check_shape()?;
        check_weights(&self.weights)?;
        if self.variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(BayesError::InvariantViolation("non-positive component variance".into()));
        }
        if zero_mean {
            let scale: f64 = self.weights.iter().zip(&self.means).map(|(w, m)| (w * m).abs()).sum();
            if self.mixture_mean().abs() > 1e-10 * scale.max(1.0) {
                return Err(BayesError::InvariantViolation("mixture mean is not zero".into()));
            }
        }
        Ok(())
    }
}

impl MixtureBlock for ScalarMixtureBlock {
    type Value = f64;

    fn log_density(&self, value: &f64) -> f64 {
        let logs: Vec<f64> = (0..self.truncation())
            .map(|k| self.weights[k].ln() + self.component_log_density(k, *value))
            .collect();
        log_sum_exp(&logs)
    }
}

/// One full sweep over a scalar block. Returns the recentering shift (zero
/// when `enforce_zero_mean` is off).
pub fn gibbs_update_scalar_mixture<R: Rng + ?Sized>(
    block: &mut ScalarMixtureBlock,
    residuals: &[f64],
    rng: &mut R,
    enforce_zero_mean: bool,
) -> Result<f64, BayesError> {
    block.update_allocations(residuals, rng)?;
    block.update_components(residuals, rng)?;
    block.update_weights(rng)?;
    Ok(if enforce_zero_mean { block.recenter() } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq)]
struct ComponentCache {
    chol_lower: DMatrix<f64>,
    log_det: f64,
    precision: DMatrix<f64>,
    precision_mean: DVector<f64>,
    /// `L⁻¹` and `L⁻¹μ`, where `Σ = L Lᵀ`.
    whitener: DMatrix<f64>,
    white_mean: DVector<f64>,
}

impl ComponentCache {
    fn new(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Self, BayesError> {
        let chol =
            spd_cholesky(cov).ok_or_else(|| BayesError::NumericalFailure("component covariance is not SPD".into()))?;
        let precision = chol.inverse();
        let precision = (&precision + precision.transpose()) * 0.5;
        let chol_lower = chol.l();
        let dim = mean.len();
        let whitener = chol_lower
            .solve_lower_triangular(&DMatrix::identity(dim, dim))
            .ok_or_else(|| BayesError::NumericalFailure("singular covariance factor".into()))?;
        Ok(Self {
            log_det: log_det(&chol),
            precision_mean: &precision * mean,
            white_mean: &whitener * mean,
            whitener,
            precision,
            chol_lower,
        })
    }

    fn shift_mean(&mut self, mean: &DVector<f64>) {
        self.precision_mean = &self.precision * mean;
        self.white_mean = &self.whitener * mean;
    }
}

/// Multivariate block, used for the score-space measurement errors and the
/// latent scores.
#[derive(Debug, Clone, PartialEq)]
pub struct MvMixtureBlock {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    allocations: Vec<usize>,
    concentration: f64,
    prior: NiwPrior,
    cache: Vec<ComponentCache>,
}

impl MvMixtureBlock {
    pub fn from_prior<R: Rng + ?Sized>(
        truncation: usize,
        concentration: f64,
        prior: NiwPrior,
        n_obs: usize,
        rng: &mut R,
    ) -> Result<Self, BayesError> {
        if truncation == 0 {
            return Err(BayesError::InvalidPrior("truncation must be at least 1".into()));
        }
        let weights = sample_dirichlet(rng, &vec![concentration / truncation as f64; truncation])?;
        let mut means = Vec::with_capacity(truncation);
        let mut covariances = Vec::with_capacity(truncation);
        for _ in 0..truncation {
            let (m, c) = prior.sample(rng)?;
            means.push(m);
            covariances.push(c);
        }
        let allocations = (0..n_obs).map(|_| categorical(rng, &weights)).collect();
        Self::from_parts(weights, means, covariances, allocations, concentration, prior)
    }

    pub fn from_parts(
        weights: Vec<f64>,
        means: Vec<DVector<f64>>,
        covariances: Vec<DMatrix<f64>>,
        allocations: Vec<usize>,
        concentration: f64,
        prior: NiwPrior,
    ) -> Result<Self, BayesError> {
        let k = weights.len();
        if k == 0 || means.len() != k || covariances.len() != k {
            return Err(BayesError::DimensionMismatch {
                expected: k,
                actual: means.len().min(covariances.len()),
            });
        }
        let dim = prior.dim();
        if means.iter().any(|m| m.len() != dim) || covariances.iter().any(|c| c.nrows() != dim || c.ncols() != dim) {
            return Err(BayesError::DimensionMismatch {
                expected: dim,
                actual: 0,
            });
        }
        if let Some(&z) = allocations.iter().find(|&&z| z >= k) {
            return Err(BayesError::InvariantViolation(format!("allocation {z} out of range")));
        }
        if !(concentration > 0.0) {
            return Err(BayesError::NonPositiveConcentration(concentration));
        }
        check_weights(&weights)?;
        let cache = means
            .iter()
            .zip(&covariances)
            .map(|(m, c)| ComponentCache::new(m, c))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            weights,
            means,
            covariances,
            allocations,
            concentration,
            prior,
            cache,
        })
    }

    pub fn truncation(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    pub fn allocations(&self) -> &[usize] {
        &self.allocations
    }

    pub fn prior(&self) -> &NiwPrior {
        &self.prior
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }

    pub fn precision(&self, k: usize) -> &DMatrix<f64> {
        &self.cache[k].precision
    }

    /// `Σ_k⁻¹ μ_k`.
    pub fn precision_mean(&self, k: usize) -> &DVector<f64> {
        &self.cache[k].precision_mean
    }

    /// Replaces component `k` and refreshes its cached factorization.
    pub fn set_component(&mut self, k: usize, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<(), BayesError> {
        self.cache[k] = ComponentCache::new(&mean, &cov)?;
        self.means[k] = mean;
        self.covariances[k] = cov;
        Ok(())
    }

    pub fn set_allocations(&mut self, allocations: Vec<usize>) -> Result<(), BayesError> {
        if let Some(&z) = allocations.iter().find(|&&z| z >= self.truncation()) {
            return Err(BayesError::InvariantViolation(format!("allocation {z} out of range")));
        }
        self.allocations = allocations;
        Ok(())
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.truncation()];
        for &z in &self.allocations {
            c[z] += 1;
        }
        c
    }

    pub fn mixture_mean(&self) -> DVector<f64> {
        self.weights
            .iter()
            .zip(&self.means)
            .fold(DVector::zeros(self.dim()), |acc, (w, m)| acc + m * *w)
    }

    pub fn component_log_density(&self, k: usize, x: &[f64]) -> f64 {
        let mut scratch = vec![0.0; x.len()];
        let c = &self.cache[k];
        mvn_log_pdf(x, self.means[k].as_slice(), &c.chol_lower, c.log_det, &mut scratch)
    }

    /// Allocation step. `residuals` holds one observation per column.
    pub fn update_allocations<R: Rng + ?Sized>(
        &mut self,
        residuals: &DMatrix<f64>,
        rng: &mut R,
    ) -> Result<(), BayesError> {
        self.check_residuals(residuals)?;
        let k_comp = self.truncation();
        let (dim, n) = residuals.shape();
        let log_norm = dim as f64 * (2.0 * std::f64::consts::PI).ln();
        let mut logs = DMatrix::from_element(k_comp, n, f64::NEG_INFINITY);
        let mut white = DMatrix::zeros(dim, n);
        for k in 0..k_comp {
            let log_w = self.weights[k].ln();
            if log_w == f64::NEG_INFINITY {
                continue;
            }
            let c = &self.cache[k];
            // L⁻¹(r − μ) = L⁻¹r − L⁻¹μ for every observation in one product.
            white.gemm(1.0, &c.whitener, residuals, 0.0);
            let offset = log_w - 0.5 * (log_norm + c.log_det);
            let wm = c.white_mean.as_slice();
            for (i, col) in white.as_slice().chunks_exact(dim).enumerate() {
                let quad: f64 = col.iter().zip(wm).map(|(a, b)| (a - b) * (a - b)).sum();
                logs[(k, i)] = offset - 0.5 * quad;
            }
        }
        for i in 0..n {
            let probs = normalize_log_weights(logs.column(i).as_slice());
            debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            self.allocations[i] = categorical(rng, &probs);
        }
        Ok(())
    }

    /// Conjugate component update. `residuals` holds one observation per column.
    pub fn update_components<R: Rng + ?Sized>(
        &mut self,
        residuals: &DMatrix<f64>,
        rng: &mut R,
    ) -> Result<(), BayesError> {
        self.check_residuals(residuals)?;
        let dim = self.dim();
        let k_comp = self.truncation();
        let counts = self.counts();
        let data = residuals.as_slice();
        let mut means = Vec::with_capacity(k_comp);
        let mut scatters = Vec::with_capacity(k_comp);
        for (k, &count) in counts.iter().enumerate().take(k_comp) {
            // Centred members as rows, so the scatter is one `EᵀE` product.
            let mut members = DMatrix::zeros(count, dim);
            let mut sum = DVector::zeros(dim);
            let mut row = 0;
            for (i, x) in data.chunks_exact(dim).enumerate() {
                if self.allocations[i] == k {
                    for (j, v) in x.iter().enumerate() {
                        members[(row, j)] = *v;
                        sum[j] += v;
                    }
                    row += 1;
                }
            }
            let mean = if count > 0 { sum / count as f64 } else { sum };
            for mut r in members.row_iter_mut() {
                r -= &mean.transpose();
            }
            scatters.push(members.tr_mul(&members));
            means.push(mean);
        }
        for k in 0..k_comp {
            let post = self.prior.posterior_from_stats(counts[k], &means[k], &scatters[k]);
            let (mean, cov) = post.sample(rng)?;
            self.set_component(k, mean, cov)?;
        }
        Ok(())
    }

    pub fn update_weights<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), BayesError> {
        self.weights = dirichlet_update(rng, self.concentration, self.truncation(), &self.allocations)?;
        Ok(())
    }

    /// Shifts every component mean by `−Σ_k π_k μ_k`; returns that shift.
    pub fn recenter(&mut self) -> DVector<f64> {
        let shift = self.mixture_mean();
        for k in 0..self.truncation() {
            self.means[k] -= &shift;
            self.cache[k].shift_mean(&self.means[k]);
        }
        shift
    }

    /// One draw per observation from its allocated component, as columns.
    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, self.allocations.len());
        for (i, &z) in self.allocations.iter().enumerate() {
            let xi = standard_normal_vector(rng, dim);
            out.set_column(i, &(&self.means[z] + &self.cache[z].chol_lower * xi));
        }
        out
    }

    fn check_residuals(&self, residuals: &DMatrix<f64>) -> Result<(), BayesError> {
        if residuals.ncols() == 0 {
            return Err(BayesError::EmptyResiduals);
        }
        if residuals.nrows() != self.dim() {
            return Err(BayesError::DimensionMismatch {
                expected: self.dim(),
                actual: residuals.nrows(),
            });
        }
        if residuals.ncols() != self.allocations.len() {
            return Err(BayesError::DimensionMismatch {
                expected: self.allocations.len(),
                actual: residuals.ncols(),
            });
        }
        Ok(())
    }

    pub fn check_invariants(&self, zero_mean: bool) -> Result<(), BayesError> {
        check_weights(&self.weights)?;
        if !(self.prior.dof > self.dim() as f64 - 1.0) {
            return Err(BayesError::InvalidDegreesOfFreedom {
                dof: self.prior.dof,
                dim: self.dim(),
            });
        }
        for c in &self.covariances {
            if spd_cholesky(c).is_none() {
                return Err(BayesError::InvariantViolation("component covariance is not SPD".into()));
            }
        }
        if zero_mean {
            let mean = self.mixture_mean();
            let scale = self
                .weights
                .iter()
                .zip(&self.means)
                .map(|(w, m)| w * m.amax())
                .sum::<f64>()
                .max(1.0);
            if mean.amax() > 1e-10 * scale {
                return Err(BayesError::InvariantViolation("mixture mean is not zero".into()));
            }
        }
        Ok(())
    }
}

impl MixtureBlock for MvMixtureBlock {
    type Value = [f64];

    fn log_density(&self, value: &[f64]) -> f64 {
        let logs: Vec<f64> = (0..self.truncation())
            .map(|k| self.weights[k].ln() + self.component_log_density(k, value))
            .collect();
        log_sum_exp(&logs)
    }
}

/// One full sweep over a multivariate block. `residual_vectors` is `n × K`
/// (one observation per row). Returns the recentering shift (zero when
/// `enforce_zero_mean` is off).
pub fn gibbs_update_mv_mixture<R: Rng + ?Sized>(
    block: &mut MvMixtureBlock,
    residual_vectors: &DMatrix<f64>,
    rng: &mut R,
    enforce_zero_mean: bool,
) -> Result<DVector<f64>, BayesError> {
    if residual_vectors.ncols() != block.dim() {
        return Err(BayesError::DimensionMismatch {
            expected: block.dim(),
            actual: residual_vectors.ncols(),
        });
    }
    let columns = residual_vectors.transpose();
    sweep_mv_columns(block, &columns, rng, enforce_zero_mean)
}

/// Same as [`gibbs_update_mv_mixture`] with observations stored as columns.
pub(crate) fn sweep_mv_columns<R: Rng + ?Sized>(
    block: &mut MvMixtureBlock,
    columns: &DMatrix<f64>,
    rng: &mut R,
    enforce_zero_mean: bool,
) -> Result<DVector<f64>, BayesError> {
    block.update_allocations(columns, rng)?;
    block.update_components(columns, rng)?;
    block.update_weights(rng)?;
    Ok(if enforce_zero_mean {
        block.recenter()
    } else {
        DVector::zeros(block.dim())
    })
}
