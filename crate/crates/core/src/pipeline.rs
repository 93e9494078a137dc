//! From raw curves to sampler inputs: estimate `δ`, rescale the instrument,
//! build the basis and project both curve sets onto it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delta::{default_bandwidth, estimate_delta, scale_instrument, DeltaError, DeltaEstimate};
use crate::fda::{
    build_bspline_basis, project, BasisSystem, FdaError, FunctionalDataset, ScoreSource, DEFAULT_BASIS_SIZE,
    DEFAULT_DEGREE,
};
use crate::model::{ModelError, ModelInputs};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Delta(#[from] DeltaError),
    #[error(transparent)]
    Fda(#[from] FdaError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    pub n_basis: usize,
    pub degree: usize,
    /// Kernel bandwidth for `δ̂`; two grid spacings when unset, `0` for the raw ratio.
    pub bandwidth: Option<f64>,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            n_basis: DEFAULT_BASIS_SIZE,
            degree: DEFAULT_DEGREE,
            bandwidth: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub delta: DeltaEstimate,
    pub m_star: FunctionalDataset,
    pub basis: BasisSystem,
    pub inputs: ModelInputs,
}

pub fn prepare(
    w: &FunctionalDataset,
    m: &FunctionalDataset,
    y: DVector<f64>,
    z: DMatrix<f64>,
    settings: &PipelineSettings,
) -> Result<Prepared, PipelineError> {
    let bandwidth = settings.bandwidth.unwrap_or_else(|| default_bandwidth(w.grid()));
    let delta = estimate_delta(w, m, bandwidth)?;
    prepare_with_delta(w, m, y, z, delta, settings)
}

/// Same as [`prepare`] with `δ` supplied instead of estimated, e.g. when it
/// is known from a simulation or calibrated elsewhere.
pub fn prepare_with_delta(
    w: &FunctionalDataset,
    m: &FunctionalDataset,
    y: DVector<f64>,
    z: DMatrix<f64>,
    delta: DeltaEstimate,
    settings: &PipelineSettings,
) -> Result<Prepared, PipelineError> {
    let m_star = scale_instrument(m, &delta)?;
    let basis = build_bspline_basis(w.grid(), settings.n_basis, settings.degree)?;
    let wt = project(w, &basis, ScoreSource::W)?;
    let mt = project(&m_star, &basis, ScoreSource::MStar)?;
    let inputs = ModelInputs::new(y, z, wt, mt, basis.clone())?;
    Ok(Prepared {
        delta,
        m_star,
        basis,
        inputs,
    })
}
