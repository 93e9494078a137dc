use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use super::sweep::{sweep, sweep_naive, McmcState};
use super::{initialize, McmcConfig, ModelError, ModelInputs};
use crate::bayes::rng::{stream_id, stream_rng, StreamRole};

/// One retained iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawRecord {
    pub chain: usize,
    pub iteration: usize,
    pub alpha0: f64,
    pub beta_z: DVector<f64>,
    pub gamma: DVector<f64>,
    pub tau: f64,
    /// Latent-score mixture allocations (zero-based); empty when not kept.
    pub x_allocations: Vec<u32>,
}

/// Latent scores (`n × K`) at one retained iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSnapshot {
    pub chain: usize,
    pub iteration: usize,
    pub scores: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub records: Vec<DrawRecord>,
    pub snapshots: Vec<LatentSnapshot>,
    /// Posterior mean of the latent scores, `n × K`.
    pub latent_mean: DMatrix<f64>,
    /// Truncation level of the latent-score mixture.
    pub x_truncation: usize,
}

impl PosteriorDraws {
    pub fn draw_count(&self) -> usize {
        self.records.len()
    }

    /// `D × K` matrix of the `γ` draws.
    pub fn gamma_matrix(&self) -> DMatrix<f64> {
        let k = self.records.first().map_or(0, |r| r.gamma.len());
        DMatrix::from_fn(self.records.len(), k, |d, j| self.records[d].gamma[j])
    }

    pub fn gamma_mean(&self) -> DVector<f64> {
        let g = self.gamma_matrix();
        g.row_mean().transpose()
    }

    /// Concatenates chains in the order given; the latent mean is weighted
    /// by each chain's number of draws.
    pub fn merge(chains: Vec<PosteriorDraws>) -> PosteriorDraws {
        let total: usize = chains.iter().map(|c| c.records.len()).sum();
        let mut iter = chains.into_iter();
        let mut out = match iter.next() {
            Some(first) => first,
            None => {
                return PosteriorDraws {
                    records: Vec::new(),
                    snapshots: Vec::new(),
                    latent_mean: DMatrix::zeros(0, 0),
                    x_truncation: 0,
                }
            }
        };
        let mut weighted = &out.latent_mean * out.records.len() as f64;
        for c in iter {
            weighted += &c.latent_mean * c.records.len() as f64;
            out.records.extend(c.records);
            out.snapshots.extend(c.snapshots);
        }
        if total > 0 {
            out.latent_mean = weighted / total as f64;
        }
        out
    }
}

fn record(state: &McmcState, chain: usize, iteration: usize, keep_allocations: bool) -> DrawRecord {
    DrawRecord {
        chain,
        iteration,
        alpha0: state.alpha0,
        beta_z: state.beta_z.clone(),
        gamma: state.gamma.clone(),
        tau: state.tau,
        x_allocations: if keep_allocations {
            state.x_block.allocations().iter().map(|&z| z as u32).collect()
        } else {
            Vec::new()
        },
    }
}

fn run_single<R: Rng + ?Sized>(
    inputs: &ModelInputs,
    config: &McmcConfig,
    chain: usize,
    rng: &mut R,
    naive: bool,
) -> Result<PosteriorDraws, ModelError> {
    config.validate()?;
    let mut state = initialize(inputs, config, rng)?;
    if naive {
        state.latent = inputs.w_cols().clone();
    }
    let mut records = Vec::with_capacity(config.draws_per_chain());
    let mut snapshots = Vec::new();
    let mut latent_sum = DMatrix::zeros(inputs.n_basis(), inputs.n_obs());
    for it in 1..=config.n_iter {
        let res = if naive {
            sweep_naive(&mut state, inputs, config, rng)
        } else {
            sweep(&mut state, inputs, config, rng)
        };
        res.map_err(|e| ModelError::Sweep {
            chain,
            iteration: it,
            source: Box::new(e),
        })?;
        if !config.retains(it) {
            continue;
        }
        let kept = records.len();
        records.push(record(&state, chain, it, config.keep_allocations && !naive));
        latent_sum += &state.latent;
        if !naive && config.snapshot_every > 0 && kept % config.snapshot_every == 0 {
            snapshots.push(LatentSnapshot {
                chain,
                iteration: it,
                scores: state.latent_scores(),
            });
        }
    }
    let latent_mean = (latent_sum / records.len() as f64).transpose();
    Ok(PosteriorDraws {
        records,
        snapshots,
        latent_mean,
        x_truncation: config.x.truncation,
    })
}

/// A single chain (labelled chain 0) driven by `rng`.
pub fn run_chain<R: Rng + ?Sized>(
    inputs: &ModelInputs,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<PosteriorDraws, ModelError> {
    run_single(inputs, config, 0, rng, false)
}

/// `config.n_chains` chains in parallel, chain `c` on stream
/// `(config.seed, c)`, merged in chain order.
pub fn run_chains(inputs: &ModelInputs, config: &McmcConfig) -> Result<PosteriorDraws, ModelError> {
    config.validate()?;
    let chains = (0..config.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(config.seed, stream_id(0, StreamRole::Chain(c as u32)));
            run_single(inputs, config, c, &mut rng, false)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PosteriorDraws::merge(chains))
}

/// The same sampler with the latent scores fixed at `W̃`, i.e. no
/// measurement-error correction.
pub fn fit_naive<R: Rng + ?Sized>(
    inputs: &ModelInputs,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<PosteriorDraws, ModelError> {
    run_single(inputs, config, 0, rng, true)
}
