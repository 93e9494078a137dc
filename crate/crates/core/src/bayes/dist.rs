//! Random draws and densities used by the Gibbs steps.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::BayesError;
use crate::linalg::{spd_cholesky, symmetrize};

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `ln G` for `G ~ Gamma(shape, 1)`. Small shapes use the
/// `Gamma(a + 1) · U^{1/a}` identity so the result does not underflow.
pub(crate) fn log_gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g.ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        g.ln() + u.ln() / shape
    }
}

pub(crate) fn gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0 / rate)
        .expect("positive shape and rate")
        .sample(rng);
    g
}

/// `Inv-Gamma(shape, scale)`, i.e. `1 / Gamma(shape, rate = scale)`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    1.0 / gamma_draw(rng, shape, scale)
}

pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, concentration: &[f64]) -> Result<Vec<f64>, BayesError> {
    if concentration.is_empty() {
        return Err(BayesError::NonPositiveConcentration(0.0));
    }
    if let Some(&c) = concentration.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(BayesError::NonPositiveConcentration(c));
    }
    let logs: Vec<f64> = concentration.iter().map(|&a| log_gamma_draw(rng, a)).collect();
    Ok(normalize_log_weights(&logs))
}

/// `exp(l_k − logsumexp(l))`.
pub(crate) fn normalize_log_weights(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

pub(crate) fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

pub(crate) fn categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Round-off can leave `acc` a hair below 1.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Bartlett factor `T` with `T Tᵀ ~ Wishart(dof, I)`.
fn bartlett_factor<R: Rng + ?Sized>(rng: &mut R, dim: usize, dof: f64) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let chi2 = gamma_draw(rng, 0.5 * (dof - i as f64), 0.5);
        t[(i, i)] = chi2.sqrt();
        for j in 0..i {
            t[(i, j)] = standard_normal(rng);
        }
    }
    t
}

/// Draw from `Inv-W(dof, scale)`; the mean is `scale / (dof − dim − 1)`.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(
    rng: &mut R,
    dof: f64,
    scale: &DMatrix<f64>,
) -> Result<DMatrix<f64>, BayesError> {
    let dim = scale.nrows();
    if scale.ncols() != dim || dim == 0 {
        return Err(BayesError::NonSpdScale);
    }
    if !(dof > dim as f64 - 1.0) {
        return Err(BayesError::InvalidDegreesOfFreedom { dof, dim });
    }
    let l = spd_cholesky(scale).ok_or(BayesError::NonSpdScale)?.unpack();
    let t = bartlett_factor(rng, dim, dof);
    // Σ = L T⁻ᵀ T⁻¹ Lᵀ = Xᵀ X with X = T⁻¹ Lᵀ.
    let x = t
        .solve_lower_triangular(&l.transpose())
        .ok_or(BayesError::NonSpdScale)?;
    Ok(symmetrize(&x.tr_mul(&x)))
}

/// Log density of `N(mean, var)` at `x`.
pub(crate) fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -LN_SQRT_2PI - 0.5 * var.ln() - 0.5 * d * d / var
}

/// `ln N(x | mean, Σ)` given the lower Cholesky factor of Σ and `ln det Σ`.
pub(crate) fn mvn_log_pdf(
    x: &[f64],
    mean: &[f64],
    chol_lower: &DMatrix<f64>,
    log_det: f64,
    scratch: &mut [f64],
) -> f64 {
    let dim = x.len();
    for i in 0..dim {
        scratch[i] = x[i] - mean[i];
    }
    crate::linalg::forward_substitute(chol_lower, scratch);
    let quad: f64 = scratch.iter().map(|v| v * v).sum();
    -0.5 * (dim as f64 * (2.0 * PI).ln() + log_det + quad)
}

pub(crate) fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| standard_normal(rng))
}
