//! Conjugate building blocks for the Gibbs sampler.

pub mod dist;
pub mod mixture;
pub mod rng;

use thiserror::Error;

pub use dist::{sample_dirichlet, sample_inverse_gamma, sample_inverse_wishart};
pub use mixture::{
    gibbs_update_mv_mixture, gibbs_update_scalar_mixture, log_density_mixture, MixtureBlock, MvMixtureBlock, NigPrior,
    NiwPrior, ScalarMixtureBlock,
};
pub use rng::{stream_id, stream_rng, StreamRng, StreamRole};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BayesError {
    #[error("Dirichlet concentration must be positive and finite, got {0}")]
    NonPositiveConcentration(f64),
    #[error("inverse-Wishart needs dof > dim - 1 (dof = {dof}, dim = {dim})")]
    InvalidDegreesOfFreedom { dof: f64, dim: usize },
    #[error("scale matrix is not symmetric positive definite")]
    NonSpdScale,
    #[error("no residuals supplied")]
    EmptyResiduals,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}
