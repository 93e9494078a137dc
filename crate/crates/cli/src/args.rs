use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sofri_core::simulate::EstimatorId;

use crate::config::{RunConfig, Transform};
use crate::BUILD_ID;

#[derive(Debug, Parser)]
#[command(name = "sofri", version = BUILD_ID, about = "Scalar-on-function regression with an instrumental variable")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model to observed curves and scalars.
    Fit(FitArgs),
    /// Run a simulation study, or write one simulated data set.
    Simulate(SimulateArgs),
    /// Estimate the instrument scale δ(s).
    Delta(DeltaArgs),
    /// Recompute summaries from a saved draw store.
    Summarize(SummarizeArgs),
}

/// Flags every subcommand accepts. Flags win over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Error-prone curves, `id,s_1,...,s_T`.
    #[arg(long)]
    pub w: Option<PathBuf>,
    /// Instrument curves on the same grid.
    #[arg(long)]
    pub m: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub transform: Option<Transform>,
    /// Kernel bandwidth for δ; 0 keeps the raw ratio.
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// Scalars, `id,y,z_1,...,z_p`; rows fix the order of everything else.
    #[arg(long)]
    pub scalars: Option<PathBuf>,
    #[arg(long)]
    pub n_basis: Option<usize>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub n_iter: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Credible level of reported intervals.
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of replicates.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated estimators to score.
    #[arg(long, value_delimiter = ',', default_values_t = [EstimatorId::BayesIv, EstimatorId::NaiveW])]
    pub estimators: Vec<EstimatorId>,
    #[arg(long)]
    pub n_iter: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Write the data of one replicate instead of running the study.
    #[arg(long)]
    pub write_data: bool,
    /// Replicate written by `--write-data`.
    #[arg(long, default_value_t = 0)]
    pub rep: usize,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DeltaArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output directory of an earlier `fit`.
    #[arg(long)]
    pub draws: PathBuf,
    #[arg(long)]
    pub level: Option<f64>,
    /// Cluster labels to contrast, e.g. `1,3`.
    #[arg(long, value_delimiter = ',', num_args = 1..=2)]
    pub contrast: Option<Vec<usize>>,
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

impl Common {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.mcmc.seed, self.seed);
        if self.out.is_some() {
            cfg.out.clone_from(&self.out);
        }
    }
}

impl DataArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if self.w.is_some() {
            cfg.data.w.clone_from(&self.w);
        }
        if self.m.is_some() {
            cfg.data.m.clone_from(&self.m);
        }
        set(&mut cfg.data.transform, self.transform);
        if self.bandwidth.is_some() {
            cfg.delta.bandwidth = self.bandwidth;
        }
    }
}

impl FitArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        self.common.apply(cfg);
        self.data.apply(cfg);
        if self.scalars.is_some() {
            cfg.data.scalars.clone_from(&self.scalars);
        }
        set(&mut cfg.basis.n_basis, self.n_basis);
        set(&mut cfg.basis.degree, self.degree);
        set(&mut cfg.mcmc.n_iter, self.n_iter);
        set(&mut cfg.mcmc.burn_in, self.burn_in);
        set(&mut cfg.mcmc.thin, self.thin);
        set(&mut cfg.mcmc.n_chains, self.chains);
        set(&mut cfg.summary.level, self.level);
    }
}
