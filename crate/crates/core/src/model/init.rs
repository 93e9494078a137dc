use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::sweep::McmcState;
use super::{intercept_design, McmcConfig, ModelError, ModelInputs, MvBlockConfig};
use crate::bayes::dist::categorical;
use crate::bayes::{MvMixtureBlock, NigPrior, NiwPrior, ScalarMixtureBlock};
use crate::linalg::spd_cholesky;

const KMEANS_ITERS: usize = 25;

/// Lloyd's algorithm with k-means++ seeding on the columns of `data`.
/// Clusters may end up empty when there are fewer distinct points than `k`.
pub(crate) fn kmeans<R: Rng + ?Sized>(data: &DMatrix<f64>, k: usize, rng: &mut R) -> Vec<usize> {
    let n = data.ncols();
    if n == 0 {
        return Vec::new();
    }
    let dist2 = |i: usize, c: &DVector<f64>| (data.column(i) - c).norm_squared();
    let mut centres: Vec<DVector<f64>> = vec![data.column(rng.random_range(0..n)).into_owned()];
    let mut best: Vec<f64> = (0..n).map(|i| dist2(i, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = best.iter().sum();
        let next = if total > 0.0 {
            let probs: Vec<f64> = best.iter().map(|d| d / total).collect();
            categorical(rng, &probs)
        } else {
            rng.random_range(0..n)
        };
        let c = data.column(next).into_owned();
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(dist2(i, &c));
        }
        centres.push(c);
    }
    let mut labels = vec![0; n];
    for _ in 0..KMEANS_ITERS {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let mut arg = 0;
            let mut min = f64::INFINITY;
            for (j, c) in centres.iter().enumerate() {
                let d = dist2(i, c);
                if d < min {
                    min = d;
                    arg = j;
                }
            }
            changed |= *label != arg;
            *label = arg;
        }
        let mut sums = vec![DVector::zeros(data.nrows()); k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            sums[l] += data.column(i);
            counts[l] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centres[j] = &sums[j] / counts[j] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

fn init_weights(labels: &[usize], k: usize, concentration: f64) -> Vec<f64> {
    let mut w = vec![concentration / k as f64; k];
    for &l in labels {
        w[l] += 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

/// `tr Cov(a, b)` over paired columns.
fn cross_covariance_trace(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.ncols() as f64;
    let (ma, mb) = (a.column_mean(), b.column_mean());
    a.column_iter()
        .zip(b.column_iter())
        .map(|(x, y)| (x - &ma).dot(&(y - &mb)))
        .sum::<f64>()
        / (n - 1.0).max(1.0)
}

/// NIW priors for the `(u, w, x)` blocks. Unset scales are moment
/// estimates per score: `C = tr Cov(W̃, M̃)/K` for the latent block, since
/// the errors are independent of each other and of `X̃`, then
/// `tr Cov(W̃)/K − C` and `tr Cov(M̃)/K − C` for the two error blocks. Each is
/// floored at a tiny fraction of the smaller observed score variance.
pub(crate) fn default_priors(inputs: &ModelInputs, config: &McmcConfig) -> Result<[NiwPrior; 3], ModelError> {
    let k = inputs.n_basis();
    let kf = k as f64;
    let (w, m) = (inputs.w_cols(), inputs.m_cols());
    let var_w = cross_covariance_trace(w, w) / kf;
    let var_m = cross_covariance_trace(m, m) / kf;
    let shared = cross_covariance_trace(w, m) / kf;
    let mut floor = 1e-6 * var_w.min(var_m);
    if !(floor > 0.0) {
        floor = 1e-10;
    }
    // Var(W̃) and Var(M̃) both bound the latent variance; a noisy instrument
    // can push the sample cross-covariance past them.
    let x_scale = shared.min(var_w).min(var_m).max(floor);
    let u_scale = (var_w - shared).max(floor);
    let w_scale = (var_m - shared).max(floor);
    let build = |cfg: &MvBlockConfig, default_scale: f64| {
        let dof = cfg.dof.unwrap_or(kf + 2.0);
        let scale = cfg.scale.unwrap_or(default_scale);
        NiwPrior::new(DVector::zeros(k), cfg.kappa, dof, DMatrix::identity(k, k) * scale)
    };
    Ok([
        build(&config.u, u_scale)?,
        build(&config.w, w_scale)?,
        build(&config.x, x_scale)?,
    ])
}

/// Mixture block whose first components are the k-means clusters of `data`
/// (columns). Covariances are the within-cluster scatter shrunk towards the
/// prior scale, or the prior mean covariance when `prior_covariance` is set.
/// Components beyond `init_clusters` start empty at the prior mean.
fn mv_block_from_clusters<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    cfg: &MvBlockConfig,
    prior: NiwPrior,
    init_clusters: usize,
    prior_covariance: bool,
    rng: &mut R,
) -> Result<MvMixtureBlock, ModelError> {
    let k_comp = cfg.truncation;
    let dim = prior.dim();
    let labels = kmeans(data, init_clusters.clamp(1, k_comp), rng);
    let mut means = Vec::with_capacity(k_comp);
    let mut covs = Vec::with_capacity(k_comp);
    for j in 0..k_comp {
        let members: Vec<usize> = (0..data.ncols()).filter(|&i| labels[i] == j).collect();
        let m = members.len();
        let mean = if m > 0 {
            members.iter().fold(DVector::zeros(dim), |acc, &i| acc + data.column(i)) / m as f64
        } else {
            prior.mean.clone()
        };
        if prior_covariance {
            means.push(mean);
            covs.push(&prior.scale / (prior.dof - dim as f64 - 1.0).max(1.0));
            continue;
        }
        let mut scatter = prior.scale.clone();
        for &i in &members {
            let d = data.column(i) - &mean;
            scatter.ger(1.0, &d, &d, 1.0);
        }
        let denom = (m as f64 + prior.dof - dim as f64 - 1.0).max(1.0);
        means.push(mean);
        covs.push(scatter / denom);
    }
    let weights = init_weights(&labels, k_comp, cfg.concentration);
    Ok(MvMixtureBlock::from_parts(
        weights,
        means,
        covs,
        labels,
        cfg.concentration,
        prior,
    )?)
}

fn scalar_block_from_clusters<R: Rng + ?Sized>(
    residuals: &[f64],
    truncation: usize,
    concentration: f64,
    prior: NigPrior,
    init_clusters: usize,
    rng: &mut R,
) -> Result<ScalarMixtureBlock, ModelError> {
    let data = DMatrix::from_row_slice(1, residuals.len(), residuals);
    let labels = kmeans(&data, init_clusters.clamp(1, truncation), rng);
    let mut means = vec![prior.mean; truncation];
    let mut variances = vec![prior.scale / prior.shape; truncation];
    for j in 0..truncation {
        let xs: Vec<f64> = residuals
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == j)
            .map(|(r, _)| *r)
            .collect();
        if xs.is_empty() {
            continue;
        }
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        means[j] = mean;
        variances[j] = (prior.scale + 0.5 * ss) / (prior.shape + 0.5 * m);
    }
    let weights = init_weights(&labels, truncation, concentration);
    Ok(ScalarMixtureBlock::from_parts(
        weights,
        means,
        variances,
        labels,
        concentration,
        prior,
    )?)
}

/// Penalized least squares for `γ` on centred data, then ordinary least
/// squares of `Y − X̃γ` on `[1, Z]` for the intercept and covariates.
fn initial_regression(
    inputs: &ModelInputs,
    latent: &DMatrix<f64>,
) -> Result<(f64, DVector<f64>, DVector<f64>), ModelError> {
    let x = latent.transpose();
    let y = inputs.y();
    let x_mean = x.row_mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &x_mean;
    }
    let yc = y.add_scalar(-y.mean());
    let mut lhs = xc.tr_mul(&xc) + inputs.basis().penalty();
    let chol = match spd_cholesky(&lhs) {
        Some(c) => c,
        None => {
            let jitter = 1e-8 * lhs.trace().max(1.0);
            lhs += DMatrix::identity(lhs.nrows(), lhs.ncols()) * jitter;
            spd_cholesky(&lhs).ok_or_else(|| ModelError::NumericalFailure("initial ridge system is singular".into()))?
        }
    };
    let gamma = chol.solve(&xc.tr_mul(&yc));
    let resid = y - &x * &gamma;
    let d = intercept_design(inputs.z());
    let coef = spd_cholesky(&d.tr_mul(&d))
        .ok_or(ModelError::RankDeficientZ)?
        .solve(&d.tr_mul(&resid));
    let p = inputs.n_covariates();
    Ok((coef[0], coef.rows(1, p).into_owned(), gamma))
}

/// Starting state: latent scores at `(W̃ + M̃)/2`, regression coefficients
/// from penalized least squares and `τ = 1`. The error blocks are seeded by
/// k-means on their residuals with `config.init_clusters` clusters and prior
/// mean covariances; the latent block by k-means on `W̃` with one cluster per
/// component.
pub fn initialize<R: Rng + ?Sized>(
    inputs: &ModelInputs,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<McmcState, ModelError> {
    config.validate()?;
    let latent = (inputs.w_cols() + inputs.m_cols()) * 0.5;
    let (alpha0, beta_z, gamma) = initial_regression(inputs, &latent)?;
    let [u_prior, w_prior, x_prior] = default_priors(inputs, config)?;

    let fitted = latent.tr_mul(&gamma) + inputs.z() * &beta_z;
    let resid: Vec<f64> = inputs
        .y()
        .iter()
        .zip(fitted.iter())
        .map(|(y, f)| y - alpha0 - f)
        .collect();
    let mut eps_block = scalar_block_from_clusters(
        &resid,
        config.eps.truncation,
        config.eps.concentration,
        config.eps.prior,
        config.init_clusters,
        rng,
    )?;
    let shift = eps_block.recenter();

    // The error blocks start at their prior covariance: residuals from the
    // crude starting scores mostly reflect instrument noise.
    let mut u_block = mv_block_from_clusters(
        &(inputs.w_cols() - &latent),
        &config.u,
        u_prior,
        config.init_clusters,
        true,
        rng,
    )?;
    u_block.recenter();
    let mut w_block = mv_block_from_clusters(
        &(inputs.m_cols() - &latent),
        &config.w,
        w_prior,
        config.init_clusters,
        true,
        rng,
    )?;
    w_block.recenter();
    let x_block = mv_block_from_clusters(inputs.w_cols(), &config.x, x_prior, config.x.truncation, false, rng)?;

    let state = McmcState {
        alpha0: alpha0 + shift,
        beta_z,
        gamma,
        tau: 1.0,
        latent,
        eps_block,
        u_block,
        w_block,
        x_block,
    };
    state.check_invariants()?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::rng::stream_rng;

    #[test]
    fn kmeans_separates_obvious_groups() {
        let mut rng = stream_rng(3, 0);
        let data = DMatrix::from_fn(
            2,
            40,
            |r, c| if c < 20 { r as f64 } else { 10.0 + r as f64 } + 0.01 * c as f64,
        );
        let labels = kmeans(&data, 2, &mut rng);
        assert!(labels[..20].iter().all(|&l| l == labels[0]));
        assert!(labels[20..].iter().all(|&l| l == labels[20]));
        assert_ne!(labels[0], labels[20]);
    }

    #[test]
    fn kmeans_on_identical_points() {
        let mut rng = stream_rng(4, 0);
        let labels = kmeans(&DMatrix::zeros(3, 10), 4, &mut rng);
        assert!(labels.iter().all(|&l| l == labels[0]));
    }
}
