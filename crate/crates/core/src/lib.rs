//! Bayesian scalar-on-function regression with a mismeasured functional
//! covariate and a functional instrumental variable.
//!
//! The pipeline estimates the instrument's multiplicative bias `δ(t)`,
//! rescales the instrument, projects both curve sets onto a B-spline basis
//! and runs a blocked Gibbs sampler in which every error distribution is a
//! truncated Dirichlet process mixture of normals.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod delta;
pub mod fda;
pub mod io;
mod linalg;
pub mod model;
pub mod pipeline;
pub mod posterior;
pub mod simulate;

pub use delta::{estimate_delta, scale_instrument, DeltaEstimate};
pub use fda::{build_bspline_basis, BasisSystem, FunctionalDataset, Grid};
pub use model::{run_chain, run_chains, McmcConfig, ModelInputs, PosteriorDraws};
pub use pipeline::{prepare, PipelineSettings, Prepared};
pub use posterior::{cluster_contrast, extract_clusters, summarize_beta, summarize_scalars};
pub use simulate::{run_study, MsieReport, Scenario};
