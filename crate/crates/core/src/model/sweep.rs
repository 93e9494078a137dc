use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{McmcConfig, ModelError, ModelInputs};
use crate::bayes::dist::{sample_inverse_gamma, standard_normal};
use crate::bayes::mixture::sweep_mv_columns;
use crate::bayes::{gibbs_update_scalar_mixture, MvMixtureBlock, ScalarMixtureBlock};
use crate::linalg::{matvec_add, precision_draw, precision_draw_into, spd_cholesky};

/// Full parameter state of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcState {
    pub alpha0: f64,
    pub beta_z: DVector<f64>,
    pub gamma: DVector<f64>,
    pub tau: f64,
    /// Latent scores stored `K × n`, one observation per column.
    pub latent: DMatrix<f64>,
    pub eps_block: ScalarMixtureBlock,
    pub u_block: MvMixtureBlock,
    pub w_block: MvMixtureBlock,
    pub x_block: MvMixtureBlock,
}

impl McmcState {
    /// Latent scores as an `n × K` matrix.
    pub fn latent_scores(&self) -> DMatrix<f64> {
        self.latent.transpose()
    }

    /// `Y_i − α0 − β_zᵀ Z_i − γᵀ X_i` with `X` given as `K × n` columns.
    pub fn response_residuals(&self, inputs: &ModelInputs, x_cols: &DMatrix<f64>) -> Vec<f64> {
        let fitted = x_cols.tr_mul(&self.gamma) + inputs.z() * &self.beta_z;
        inputs
            .y()
            .iter()
            .zip(fitted.iter())
            .map(|(y, f)| y - self.alpha0 - f)
            .collect()
    }

    pub fn check_invariants(&self) -> Result<(), ModelError> {
        self.eps_block.check_invariants(true)?;
        self.u_block.check_invariants(true)?;
        self.w_block.check_invariants(true)?;
        self.x_block.check_invariants(false)?;
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(ModelError::NumericalFailure(format!("tau = {}", self.tau)));
        }
        let finite = self.alpha0.is_finite()
            && self.beta_z.iter().all(|v| v.is_finite())
            && self.gamma.iter().all(|v| v.is_finite())
            && self.latent.iter().all(|v| v.is_finite());
        if !finite {
            return Err(ModelError::NumericalFailure(
                "non-finite regression or latent state".into(),
            ));
        }
        Ok(())
    }
}

/// Response-error block on the current residuals; its recentering shift
/// moves into the intercept.
pub fn update_eps<R: Rng + ?Sized>(
    state: &mut McmcState,
    inputs: &ModelInputs,
    x_cols: &DMatrix<f64>,
    rng: &mut R,
) -> Result<(), ModelError> {
    let r = state.response_residuals(inputs, x_cols);
    let shift = gibbs_update_scalar_mixture(&mut state.eps_block, &r, rng, true)?;
    state.alpha0 += shift;
    Ok(())
}

/// Measurement-error block for `W̃`; the recentering shift is dropped.
pub fn update_u<R: Rng + ?Sized>(state: &mut McmcState, inputs: &ModelInputs, rng: &mut R) -> Result<(), ModelError> {
    let r = inputs.w_cols() - &state.latent;
    sweep_mv_columns(&mut state.u_block, &r, rng, true)?;
    Ok(())
}

/// Instrument-error block for `M̃`; the recentering shift is dropped.
pub fn update_w<R: Rng + ?Sized>(state: &mut McmcState, inputs: &ModelInputs, rng: &mut R) -> Result<(), ModelError> {
    let r = inputs.m_cols() - &state.latent;
    sweep_mv_columns(&mut state.w_block, &r, rng, true)?;
    Ok(())
}

pub fn update_x<R: Rng + ?Sized>(state: &mut McmcState, rng: &mut R) -> Result<(), ModelError> {
    sweep_mv_columns(&mut state.x_block, &state.latent, rng, false)?;
    Ok(())
}

/// Draws every `X̃_i` from its Gaussian full conditional. The precision
/// depends on observation `i` only through its four allocations, so one
/// Cholesky factor per distinct allocation tuple is enough.
pub fn update_latent<R: Rng + ?Sized>(
    state: &mut McmcState,
    inputs: &ModelInputs,
    rng: &mut R,
) -> Result<(), ModelError> {
    let k = inputs.n_basis();
    let gamma = &state.gamma;
    let zb = inputs.z() * &state.beta_z;
    let (ku, kw, kx, ke) = (
        state.u_block.truncation(),
        state.w_block.truncation(),
        state.x_block.truncation(),
        state.eps_block.truncation(),
    );
    // Factors of the full conditional precision, one per allocation tuple seen.
    let mut factors: Vec<Option<DMatrix<f64>>> = vec![None; ku * kw * kx * ke];
    let mut b = vec![0.0; k];
    let mut xi = vec![0.0; k];
    let (w_data, m_data) = (inputs.w_cols().as_slice(), inputs.m_cols().as_slice());
    for i in 0..inputs.n_obs() {
        let (zu, zw, zx) = (
            state.u_block.allocations()[i],
            state.w_block.allocations()[i],
            state.x_block.allocations()[i],
        );
        let ze = state.eps_block.allocations[i];
        let var_e = state.eps_block.variances[ze];
        let slot = ((zu * kw + zw) * kx + zx) * ke + ze;
        if factors[slot].is_none() {
            let mut q = state.u_block.precision(zu) + state.w_block.precision(zw) + state.x_block.precision(zx);
            q.ger(1.0 / var_e, gamma, gamma, 1.0);
            let chol = spd_cholesky(&q).ok_or_else(|| {
                ModelError::NumericalFailure(format!(
                    "latent precision for allocations {:?} is not SPD",
                    [zu, zw, zx, ze]
                ))
            })?;
            factors[slot] = Some(chol.unpack());
        }
        let l = factors[slot].as_ref().expect("factor cached above");
        let scalar = (inputs.y()[i] - state.alpha0 - zb[i] - state.eps_block.means[ze]) / var_e;
        for (j, v) in b.iter_mut().enumerate() {
            *v = state.x_block.precision_mean(zx)[j]
                - state.u_block.precision_mean(zu)[j]
                - state.w_block.precision_mean(zw)[j]
                + scalar * gamma[j];
        }
        matvec_add(state.u_block.precision(zu), &w_data[i * k..(i + 1) * k], &mut b);
        matvec_add(state.w_block.precision(zw), &m_data[i * k..(i + 1) * k], &mut b);
        for v in xi.iter_mut() {
            *v = standard_normal(rng);
        }
        precision_draw_into(l, &mut b, &mut xi);
        state.latent.column_mut(i).copy_from_slice(&b);
    }
    Ok(())
}

/// Joint draw of `(α0, β_z, γ)` from the weighted normal regression of
/// `Y_i − μ_{ε,z_i}` on `[1, Z_i, X_i]` with weights `1/σ²_{ε,z_i}`, flat
/// prior on `(α0, β_z)` and precision `P/τ` on `γ`.
pub fn update_regression<R: Rng + ?Sized>(
    state: &mut McmcState,
    inputs: &ModelInputs,
    x_cols: &DMatrix<f64>,
    rng: &mut R,
) -> Result<(), ModelError> {
    let n = inputs.n_obs();
    let p = inputs.n_covariates();
    let k = inputs.n_basis();
    let q = 1 + p + k;
    let mut design = DMatrix::zeros(n, q);
    let mut target = DVector::zeros(n);
    for i in 0..n {
        let z = state.eps_block.allocations[i];
        let sd_inv = 1.0 / state.eps_block.variances[z].sqrt();
        design[(i, 0)] = sd_inv;
        for j in 0..p {
            design[(i, 1 + j)] = inputs.z()[(i, j)] * sd_inv;
        }
        for j in 0..k {
            design[(i, 1 + p + j)] = x_cols[(j, i)] * sd_inv;
        }
        target[i] = (inputs.y()[i] - state.eps_block.means[z]) * sd_inv;
    }
    let mut precision = design.tr_mul(&design);
    let penalty = inputs.basis().penalty() / state.tau;
    let mut block = precision.view_mut((1 + p, 1 + p), (k, k));
    block += &penalty;
    let b = design.tr_mul(&target);
    let chol = spd_cholesky(&precision)
        .ok_or_else(|| ModelError::NumericalFailure("regression precision is not SPD".into()))?;
    let mut xi: Vec<f64> = (0..q).map(|_| standard_normal(rng)).collect();
    let draw = precision_draw(&chol, &b, &mut xi);
    state.alpha0 = draw[0];
    state.beta_z = draw.rows(1, p).into_owned();
    state.gamma = draw.rows(1 + p, k).into_owned();
    Ok(())
}

/// `τ ~ Inv-Gamma(a + rank(P)/2, b + γᵀPγ/2)`.
pub fn update_tau<R: Rng + ?Sized>(state: &mut McmcState, inputs: &ModelInputs, config: &McmcConfig, rng: &mut R) {
    let basis = inputs.basis();
    let quad = state.gamma.dot(&(basis.penalty() * &state.gamma));
    let shape = config.tau_shape + 0.5 * basis.penalty_rank() as f64;
    state.tau = sample_inverse_gamma(rng, shape, config.tau_scale + 0.5 * quad);
}

/// One Gibbs sweep of the measurement-error model.
pub fn sweep<R: Rng + ?Sized>(
    state: &mut McmcState,
    inputs: &ModelInputs,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<(), ModelError> {
    let latent = std::mem::replace(&mut state.latent, DMatrix::zeros(0, 0));
    let res = update_eps(state, inputs, &latent, rng);
    state.latent = latent;
    res?;
    update_u(state, inputs, rng)?;
    update_w(state, inputs, rng)?;
    update_x(state, rng)?;
    update_latent(state, inputs, rng)?;
    let latent = std::mem::replace(&mut state.latent, DMatrix::zeros(0, 0));
    let res = update_regression(state, inputs, &latent, rng);
    state.latent = latent;
    res?;
    update_tau(state, inputs, config, rng);
    #[cfg(debug_assertions)]
    state.check_invariants()?;
    Ok(())
}

/// Sweep with the latent scores held at `W̃`: response error, regression
/// and smoothing variance only.
pub fn sweep_naive<R: Rng + ?Sized>(
    state: &mut McmcState,
    inputs: &ModelInputs,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<(), ModelError> {
    update_eps(state, inputs, inputs.w_cols(), rng)?;
    update_regression(state, inputs, inputs.w_cols(), rng)?;
    update_tau(state, inputs, config, rng);
    Ok(())
}
