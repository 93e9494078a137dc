use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::bayes::NigPrior;

/// Truncation, concentration and NIG prior for the response-error mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalarBlockConfig {
    pub truncation: usize,
    pub concentration: f64,
    pub prior: NigPrior,
}

impl Default for ScalarBlockConfig {
    fn default() -> Self {
        Self {
            truncation: 5,
            concentration: 1.0,
            prior: NigPrior::default(),
        }
    }
}

/// Settings for one multivariate mixture block. The NIW prior has mean zero,
/// `dof` defaults to `K + 2` and `scale` (a multiple of the identity)
/// defaults to a value computed from the data when left unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MvBlockConfig {
    pub truncation: usize,
    pub concentration: f64,
    pub kappa: f64,
    pub dof: Option<f64>,
    pub scale: Option<f64>,
}

impl Default for MvBlockConfig {
    fn default() -> Self {
        Self {
            truncation: 5,
            concentration: 1.0,
            kappa: 0.01,
            dof: None,
            scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_chains: usize,
    /// Keep a copy of the latent scores every this many retained draws
    /// (0 disables snapshots).
    pub snapshot_every: usize,
    /// Record the latent-score allocations of every retained draw.
    pub keep_allocations: bool,
    /// Occupied components per error block (`ε`, `U`, `ω`) at the start of a
    /// chain. Several narrow starting clusters in the error blocks let them
    /// soak up structure that belongs to the latent scores, so one is the
    /// default. The latent block always starts from k-means with its full
    /// truncation.
    pub init_clusters: usize,
    pub eps: ScalarBlockConfig,
    pub u: MvBlockConfig,
    pub w: MvBlockConfig,
    pub x: MvBlockConfig,
    pub tau_shape: f64,
    pub tau_scale: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_iter: 10_000,
            burn_in: 2_000,
            thin: 3,
            seed: 1,
            n_chains: 1,
            snapshot_every: 10,
            keep_allocations: true,
            init_clusters: 1,
            eps: ScalarBlockConfig::default(),
            u: MvBlockConfig::default(),
            w: MvBlockConfig::default(),
            x: MvBlockConfig::default(),
            tau_shape: 1.0,
            tau_scale: 0.005,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.n_iter <= self.burn_in {
            return bad("n_iter must exceed burn_in");
        }
        if self.init_clusters == 0 {
            return bad("init_clusters must be at least 1");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if self.n_chains == 0 {
            return bad("n_chains must be at least 1");
        }
        if !(self.tau_shape > 0.0 && self.tau_scale > 0.0) {
            return bad("tau prior parameters must be positive");
        }
        if self.eps.truncation == 0 || !(self.eps.concentration > 0.0) {
            return bad("eps block needs truncation >= 1 and positive concentration");
        }
        for (name, b) in [("u", &self.u), ("w", &self.w), ("x", &self.x)] {
            if b.truncation == 0 || !(b.concentration > 0.0) || !(b.kappa > 0.0) {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} block needs truncation >= 1 and positive concentration and kappa"
                )));
            }
            if b.scale.is_some_and(|s| !(s > 0.0)) {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} block scale must be positive"
                )));
            }
        }
        Ok(())
    }

    /// Number of draws a single chain retains.
    pub fn draws_per_chain(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }

    /// Whether 1-based iteration `it` is kept.
    pub fn retains(&self, it: usize) -> bool {
        it > self.burn_in && (it - self.burn_in).is_multiple_of(self.thin)
    }
}
