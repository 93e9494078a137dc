//! Instrument-quality scaling function.
//!
//! The instrument satisfies `M(s) = δ(s) X(s) + ω(s)` while `W(s) = X(s) + U(s)`,
//! so `δ(s) = E M(s) / E W(s)` wherever `E X(s) ≠ 0`. The raw estimate is the
//! pointwise ratio of column sums; the smoothed estimate is a Gaussian-kernel
//! Nadaraya–Watson average of the raw ratios in which each grid point is also
//! weighted by `(Σ_i W_i(t))²`, the inverse of the ratio's approximate variance.
//! Ratios taken where the mean curve crosses zero are therefore discounted.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::fda::{FunctionalDataset, Grid};

/// Default kernel bandwidth in units of the smallest grid spacing.
pub const DEFAULT_BANDWIDTH_SPACINGS: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeltaError {
    #[error("W and M must share the grid and the number of curves")]
    GridMismatch,
    #[error("Σ_i W_i(s) vanishes at s = {0}; δ(s) is not identified there")]
    ZeroDenominator(f64),
    #[error("δ̂ is zero or non-finite at grid index {0}")]
    ZeroDelta(usize),
    #[error("bandwidth must be finite and non-negative, got {0}")]
    InvalidBandwidth(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEstimate {
    pub grid: Grid,
    pub raw: DVector<f64>,
    pub smoothed: DVector<f64>,
    pub bandwidth: f64,
}

/// Bandwidth used when none is configured: two grid spacings.
pub fn default_bandwidth(grid: &Grid) -> f64 {
    DEFAULT_BANDWIDTH_SPACINGS * grid.min_spacing()
}

/// Pointwise ratio `Σ_i M_i(s) / Σ_i W_i(s)` followed by kernel smoothing.
/// A bandwidth of zero returns the raw ratios unchanged.
pub fn estimate_delta(
    w: &FunctionalDataset,
    m: &FunctionalDataset,
    bandwidth: f64,
) -> Result<DeltaEstimate, DeltaError> {
    if w.grid() != m.grid() || w.n_curves() != m.n_curves() {
        return Err(DeltaError::GridMismatch);
    }
    if !(bandwidth.is_finite() && bandwidth >= 0.0) {
        return Err(DeltaError::InvalidBandwidth(bandwidth));
    }
    let n = w.n_curves() as f64;
    let w_sum = w.column_sums();
    let m_sum = m.column_sums();
    let points = w.grid().points();

    for (t, &den) in w_sum.iter().enumerate() {
        let col = w.values().column(t);
        let rms = (col.norm_squared() / n).sqrt();
        if den == 0.0 || den.abs() < 1e-12 * n * rms {
            return Err(DeltaError::ZeroDenominator(points[t]));
        }
    }
    let raw = m_sum.component_div(&w_sum);
    let smoothed = if bandwidth == 0.0 {
        raw.clone()
    } else {
        weighted_kernel_smooth(points, &raw, &w_sum.map(|s| s * s), bandwidth)
    };
    Ok(DeltaEstimate {
        grid: w.grid().clone(),
        raw,
        smoothed,
        bandwidth,
    })
}

/// `Σ_j K_h(x_t − x_j) ω_j y_j / Σ_j K_h(x_t − x_j) ω_j` with a Gaussian kernel.
fn weighted_kernel_smooth(x: &[f64], y: &DVector<f64>, obs_weights: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |t, _| {
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..x.len() {
            let z = (x[t] - x[j]) / h;
            let k = (-0.5 * z * z).exp() * obs_weights[j];
            num += k * y[j];
            den += k;
        }
        if den > 0.0 {
            num / den
        } else {
            y[t]
        }
    })
}

/// `M*(s) = M(s) / δ̂(s)` using the smoothed estimate.
pub fn scale_instrument(m: &FunctionalDataset, delta: &DeltaEstimate) -> Result<FunctionalDataset, DeltaError> {
    if m.grid() != &delta.grid {
        return Err(DeltaError::GridMismatch);
    }
    if let Some(t) = delta.smoothed.iter().position(|d| *d == 0.0 || !d.is_finite()) {
        return Err(DeltaError::ZeroDelta(t));
    }
    let mut values: DMatrix<f64> = m.values().clone();
    for (t, mut col) in values.column_iter_mut().enumerate() {
        col /= delta.smoothed[t];
    }
    m.with_values(values).map_err(|_| DeltaError::ZeroDelta(0))
}
