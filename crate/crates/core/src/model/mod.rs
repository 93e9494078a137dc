//! The joint measurement-error model in score space and its Gibbs sampler.
//!
//! With `K` basis functions and scores `X̃_i = ∫ B(s) X_i(s) ds`,
//!
//! ```text
//! Y_i = α0 + β_zᵀ Z_i + γᵀ X̃_i + ε_i
//! W̃_i = X̃_i + Ũ_i
//! M̃_i = X̃_i + ω̃_i
//! ```
//!
//! where ε, Ũ and ω̃ are mean-zero truncated DP mixtures of normals and
//! `X̃_i` itself follows an unconstrained one. `β(t) = Σ_k γ_k B_k(t)`, and
//! `γ` carries a second-difference smoothing prior with variance `τ`.

mod chain;
mod config;
mod init;
mod sweep;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use chain::{fit_naive, run_chain, run_chains, DrawRecord, LatentSnapshot, PosteriorDraws};
pub use config::{McmcConfig, MvBlockConfig, ScalarBlockConfig};
pub use init::initialize;
pub use sweep::{sweep, sweep_naive, McmcState};

/// Individual Gibbs steps, exposed for testing against closed forms.
pub mod steps {
    pub use super::sweep::{update_eps, update_latent, update_regression, update_tau, update_u, update_w, update_x};
}

use crate::bayes::BayesError;
use crate::fda::{BasisSystem, FdaError, ScoreMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("covariate matrix [1, Z] is rank deficient")]
    RankDeficientZ,
    #[error("{what}: expected {expected} rows, got {actual}")]
    RowMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("score dimension {actual} does not match basis size {expected}")]
    BasisMismatch { expected: usize, actual: usize },
    #[error("invalid MCMC configuration: {0}")]
    InvalidConfig(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("sweep {iteration} of chain {chain} failed: {source}")]
    Sweep {
        chain: usize,
        iteration: usize,
        source: Box<ModelError>,
    },
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Fda(#[from] FdaError),
}

/// Everything the sampler conditions on.
#[derive(Debug, Clone)]
pub struct ModelInputs {
    y: DVector<f64>,
    z: DMatrix<f64>,
    wt: ScoreMatrix,
    mt: ScoreMatrix,
    basis: BasisSystem,
    // K × n copies; the sampler walks observations column by column.
    wt_cols: DMatrix<f64>,
    mt_cols: DMatrix<f64>,
}

impl ModelInputs {
    /// `z` is `n × p` and may have zero columns.
    pub fn new(
        y: DVector<f64>,
        z: DMatrix<f64>,
        wt: ScoreMatrix,
        mt: ScoreMatrix,
        basis: BasisSystem,
    ) -> Result<Self, ModelError> {
        let n = y.len();
        for (what, rows) in [("Z", z.nrows()), ("W scores", wt.n_rows()), ("M* scores", mt.n_rows())] {
            if rows != n {
                return Err(ModelError::RowMismatch {
                    what,
                    expected: n,
                    actual: rows,
                });
            }
        }
        for s in [&wt, &mt] {
            if s.scores.ncols() != basis.size() {
                return Err(ModelError::BasisMismatch {
                    expected: basis.size(),
                    actual: s.scores.ncols(),
                });
            }
        }
        let finite = y
            .iter()
            .chain(z.iter())
            .chain(wt.scores.iter())
            .chain(mt.scores.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(ModelError::InvalidConfig("inputs contain non-finite values".into()));
        }
        if n < 2 {
            return Err(ModelError::RowMismatch {
                what: "observations",
                expected: 2,
                actual: n,
            });
        }
        if !full_column_rank(&intercept_design(&z)) {
            return Err(ModelError::RankDeficientZ);
        }
        Ok(Self {
            wt_cols: wt.scores.transpose(),
            mt_cols: mt.scores.transpose(),
            y,
            z,
            wt,
            mt,
            basis,
        })
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn w_scores(&self) -> &ScoreMatrix {
        &self.wt
    }

    pub fn m_scores(&self) -> &ScoreMatrix {
        &self.mt
    }

    pub fn basis(&self) -> &BasisSystem {
        &self.basis
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.z.ncols()
    }

    pub fn n_basis(&self) -> usize {
        self.basis.size()
    }

    pub(crate) fn w_cols(&self) -> &DMatrix<f64> {
        &self.wt_cols
    }

    pub(crate) fn m_cols(&self) -> &DMatrix<f64> {
        &self.mt_cols
    }
}

/// `[1, Z]`.
pub(crate) fn intercept_design(z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::from_element(z.nrows(), z.ncols() + 1, 1.0);
    d.view_mut((0, 1), (z.nrows(), z.ncols())).copy_from(z);
    d
}

fn full_column_rank(d: &DMatrix<f64>) -> bool {
    if d.nrows() < d.ncols() {
        return false;
    }
    let sv = d.clone().svd(false, false).singular_values;
    let max = sv.max();
    max > 0.0 && sv.min() > max * 1e-10 * d.nrows().max(d.ncols()) as f64
}
