//! Closed-form and Monte Carlo oracles shared by the integration tests and
//! the acceptance run. Every expected value here is computed from textbook
//! formulas, never through the library's own posterior helpers.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use sofri_core::bayes::{
    gibbs_update_mv_mixture, gibbs_update_scalar_mixture, stream_id, stream_rng, MvMixtureBlock, NigPrior, NiwPrior,
    ScalarMixtureBlock, StreamRng, StreamRole,
};
use sofri_core::model::steps::{update_latent, update_regression, update_tau};
use sofri_core::model::{initialize, McmcConfig, McmcState};
use sofri_core::simulate::{prepare_data, simulate_dataset, Scenario};
use sofri_core::ModelInputs;

/// One moment comparison: `observed` is a Monte Carlo mean whose standard
/// error is `se`.
#[derive(Debug, Clone)]
pub struct Check {
    pub what: String,
    pub observed: f64,
    pub expected: f64,
    pub se: f64,
}

impl Check {
    pub fn new(what: impl Into<String>, observed: f64, expected: f64, se: f64) -> Self {
        Self {
            what: what.into(),
            observed,
            expected,
            se,
        }
    }

    pub fn z(&self) -> f64 {
        (self.observed - self.expected) / self.se
    }
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub name: &'static str,
    pub checks: Vec<Check>,
}

impl OracleReport {
    pub fn worst_z(&self) -> f64 {
        self.checks.iter().map(|c| c.z().abs()).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.checks.iter().all(|c| c.z().abs() <= tol)
    }

    pub fn describe(&self) -> String {
        let mut s = format!("{}: worst |z| = {:.2}", self.name, self.worst_z());
        for c in &self.checks {
            s.push_str(&format!(
                "\n    {:<28} observed {:>12.6} expected {:>12.6} se {:.2e} z {:+.2}",
                c.what,
                c.observed,
                c.expected,
                c.se,
                c.z()
            ));
        }
        s
    }

    pub fn assert_passes(&self, tol: f64) {
        assert!(self.passes(tol), "{}", self.describe());
    }
}

pub fn rng(seed: u64, role: u32) -> StreamRng {
    stream_rng(seed, stream_id(0, StreamRole::Fit(role)))
}

fn series(n: usize, capacity: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| Vec::with_capacity(capacity)).collect()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Standard error of the mean of an autocorrelated series by batch means.
pub fn batch_means_se(v: &[f64], batches: usize) -> f64 {
    let size = v.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| mean(&v[b * size..(b + 1) * size])).collect();
    (sample_var(&means) / batches as f64).sqrt()
}

fn normal_pdf(x: f64, mu: f64, var: f64) -> f64 {
    (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Small fixed data set for checks that need model inputs.
pub fn small_inputs(seed: u64) -> ModelInputs {
    let mut sc = Scenario {
        n: 30,
        n_grid: 20,
        seed,
        ..Scenario::default()
    };
    sc.fit.pipeline.n_basis = 5;
    let mut r = stream_rng(seed, stream_id(0, StreamRole::Data));
    let data = simulate_dataset(&sc, &mut r).unwrap();
    prepare_data(&data, &sc.fit).unwrap().inputs
}

pub fn small_state(inputs: &ModelInputs, seed: u64) -> McmcState {
    let cfg = McmcConfig {
        init_clusters: 2,
        ..McmcConfig::default()
    };
    initialize(inputs, &cfg, &mut rng(seed, 99)).unwrap()
}

/// Scalar block with one component: each sweep draws `(μ, σ²)` from the
/// normal-inverse-gamma posterior of the fixed residuals.
pub fn nig_oracle(draws: usize, seed: u64) -> OracleReport {
    let (mu0, k0, a0, b0) = (0.5, 2.0, 3.0, 2.0);
    let prior = NigPrior {
        mean: mu0,
        kappa: k0,
        shape: a0,
        scale: b0,
    };
    let x: Vec<f64> = (0..25).map(|i| 1.0 + ((i * 7 % 11) as f64 - 5.0) * 0.3).collect();
    let n = x.len() as f64;
    let xbar = mean(&x);
    let ss: f64 = x.iter().map(|v| (v - xbar).powi(2)).sum();
    let kn = k0 + n;
    let mun = (k0 * mu0 + n * xbar) / kn;
    let an = a0 + n / 2.0;
    let bn = b0 + ss / 2.0 + k0 * n * (xbar - mu0).powi(2) / (2.0 * kn);

    let mut block =
        ScalarMixtureBlock::from_parts(vec![1.0], vec![0.0], vec![1.0], vec![0; x.len()], 1.0, prior).unwrap();
    let mut r = rng(seed, 1);
    let (mut mus, mut vars, mut precs) = (
        Vec::with_capacity(draws),
        Vec::with_capacity(draws),
        Vec::with_capacity(draws),
    );
    for _ in 0..draws {
        gibbs_update_scalar_mixture(&mut block, &x, &mut r, false).unwrap();
        mus.push(block.means[0]);
        vars.push(block.variances[0]);
        precs.push(1.0 / block.variances[0]);
    }
    let nd = (draws as f64).sqrt();
    let var_mu = bn / (kn * (an - 1.0));
    let var_s2 = bn * bn / ((an - 1.0).powi(2) * (an - 2.0));
    OracleReport {
        name: "NIG component",
        checks: vec![
            Check::new("E mu", mean(&mus), mun, var_mu.sqrt() / nd),
            Check::new("E sigma2", mean(&vars), bn / (an - 1.0), var_s2.sqrt() / nd),
            Check::new("E 1/sigma2", mean(&precs), an / bn, (an / (bn * bn)).sqrt() / nd),
            Check::new(
                "Var mu",
                sample_var(&mus),
                var_mu,
                // t with 2an dof: excess kurtosis 6/(2an - 4)
                var_mu * ((2.0 + 6.0 / (2.0 * an - 4.0)) / draws as f64).sqrt(),
            ),
        ],
    }
}

/// Two-dimensional block with one component against the NIW posterior.
pub fn niw_oracle(draws: usize, seed: u64) -> OracleReport {
    let p = 2.0;
    let mu0 = DVector::from_vec(vec![0.2, -0.1]);
    let (k0, nu0) = (1.5, 6.0);
    let psi0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
    let prior = NiwPrior::new(mu0.clone(), k0, nu0, psi0.clone()).unwrap();
    let n = 15;
    let data = DMatrix::from_fn(n, 2, |i, j| ((i * 5 + j * 3) % 7) as f64 * 0.4 - 1.0 + j as f64 * 0.5);

    let nf = n as f64;
    let xbar = data.row_mean().transpose();
    let mut s = DMatrix::zeros(2, 2);
    for i in 0..n {
        let d = data.row(i).transpose() - &xbar;
        s += &d * d.transpose();
    }
    let kn = k0 + nf;
    let nun = nu0 + nf;
    let mun = (&mu0 * k0 + &xbar * nf) / kn;
    let dm = &xbar - &mu0;
    let psin = &psi0 + s + (&dm * dm.transpose()) * (k0 * nf / kn);

    let mut block = MvMixtureBlock::from_parts(
        vec![1.0],
        vec![DVector::zeros(2)],
        vec![DMatrix::identity(2, 2)],
        vec![0; n],
        1.0,
        prior,
    )
    .unwrap();
    let mut r = rng(seed, 2);
    let mut rec: Vec<Vec<f64>> = series(5, draws);
    for _ in 0..draws {
        gibbs_update_mv_mixture(&mut block, &data, &mut r, false).unwrap();
        let (m, c) = (&block.means()[0], &block.covariances()[0]);
        for (slot, v) in rec.iter_mut().zip([m[0], m[1], c[(0, 0)], c[(1, 1)], c[(0, 1)]]) {
            slot.push(v);
        }
    }
    let nd = (draws as f64).sqrt();
    let d = nun - p - 1.0;
    let iw_var = |i: usize, j: usize| {
        ((nun - p + 1.0) * psin[(i, j)].powi(2) + (nun - p - 1.0) * psin[(i, i)] * psin[(j, j)])
            / ((nun - p) * d * d * (nun - p - 3.0))
    };
    OracleReport {
        name: "NIW component",
        checks: vec![
            Check::new("E mu_1", mean(&rec[0]), mun[0], (psin[(0, 0)] / (kn * d)).sqrt() / nd),
            Check::new("E mu_2", mean(&rec[1]), mun[1], (psin[(1, 1)] / (kn * d)).sqrt() / nd),
            Check::new("E Sigma_11", mean(&rec[2]), psin[(0, 0)] / d, iw_var(0, 0).sqrt() / nd),
            Check::new("E Sigma_22", mean(&rec[3]), psin[(1, 1)] / d, iw_var(1, 1).sqrt() / nd),
            Check::new("E Sigma_12", mean(&rec[4]), psin[(0, 1)] / d, iw_var(0, 1).sqrt() / nd),
        ],
    }
}

/// Weights given allocations follow `Dir(α/K + n_k)`; allocations given
/// parameters are categorical with `p_k ∝ π_k N(x; μ_k, σ_k²)`.
pub fn dirichlet_multinomial_oracle(draws: usize, seed: u64) -> OracleReport {
    let alloc = [0, 0, 0, 0, 0, 2, 2, 2, 3, 3];
    let (k, alpha) = (4, 2.0);
    let mut block = ScalarMixtureBlock::from_parts(
        vec![0.25; 4],
        vec![0.0; 4],
        vec![1.0; 4],
        alloc.to_vec(),
        alpha,
        NigPrior::default(),
    )
    .unwrap();
    let mut r = rng(seed, 3);
    let mut w = series(k, draws);
    for _ in 0..draws {
        block.update_weights(&mut r).unwrap();
        for (slot, v) in w.iter_mut().zip(&block.weights) {
            slot.push(*v);
        }
    }
    let a: Vec<f64> = (0..k)
        .map(|j| alpha / k as f64 + alloc.iter().filter(|&&z| z == j).count() as f64)
        .collect();
    let a0: f64 = a.iter().sum();
    let nd = (draws as f64).sqrt();
    let mut checks: Vec<Check> = (0..k)
        .map(|j| {
            let var = a[j] * (a0 - a[j]) / (a0 * a0 * (a0 + 1.0));
            Check::new(format!("E pi_{}", j + 1), mean(&w[j]), a[j] / a0, var.sqrt() / nd)
        })
        .collect();

    let weights = vec![0.5, 0.3, 0.2];
    let means = vec![-1.0, 0.0, 2.0];
    let vars = vec![1.0, 0.25, 2.0];
    let x = [0.4, 1.3];
    let mut block = ScalarMixtureBlock::from_parts(
        weights.clone(),
        means.clone(),
        vars.clone(),
        vec![0; 2],
        1.0,
        NigPrior::default(),
    )
    .unwrap();
    let mut hits = [[0usize; 3]; 2];
    for _ in 0..draws {
        block.update_allocations(&x, &mut r).unwrap();
        for (i, &z) in block.allocations.iter().enumerate() {
            hits[i][z] += 1;
        }
    }
    for (i, &xi) in x.iter().enumerate() {
        let dens: Vec<f64> = (0..3).map(|j| weights[j] * normal_pdf(xi, means[j], vars[j])).collect();
        let total: f64 = dens.iter().sum();
        for j in 0..3 {
            let p = dens[j] / total;
            checks.push(Check::new(
                format!("P(z_{} = {})", i + 1, j + 1),
                hits[i][j] as f64 / draws as f64,
                p,
                (p * (1.0 - p) / draws as f64).sqrt(),
            ));
        }
    }
    OracleReport {
        name: "Dirichlet-multinomial",
        checks,
    }
}

/// Joint `(α0, β_z, γ)` draw with one error component and `τ` huge is the
/// flat-prior normal regression: `N(β̂_OLS, σ²(DᵀD)⁻¹)`.
pub fn regression_oracle(draws: usize, seed: u64) -> OracleReport {
    let inputs = small_inputs(seed);
    let mut state = small_state(&inputs, seed);
    let n = inputs.n_obs();
    let (mu_e, var_e) = (0.3, 0.5);
    state.eps_block =
        ScalarMixtureBlock::from_parts(vec![1.0], vec![mu_e], vec![var_e], vec![0; n], 1.0, NigPrior::default())
            .unwrap();
    state.tau = 1e12;
    let x_cols = inputs.w_scores().scores.transpose();

    let (p, k) = (inputs.n_covariates(), inputs.n_basis());
    let q = 1 + p + k;
    let design = DMatrix::from_fn(n, q, |i, j| match j {
        0 => 1.0,
        j if j <= p => inputs.z()[(i, j - 1)],
        j => x_cols[(j - 1 - p, i)],
    });
    let target = inputs.y().map(|v| v - mu_e);
    let svd = design.clone().svd(true, true);
    let ols = svd.solve(&target, 1e-14).unwrap();
    let cov = (design.transpose() * &design).try_inverse().unwrap() * var_e;

    let mut r = rng(seed, 4);
    let mut rec = series(q, draws);
    for _ in 0..draws {
        update_regression(&mut state, &inputs, &x_cols, &mut r).unwrap();
        rec[0].push(state.alpha0);
        for j in 0..p {
            rec[1 + j].push(state.beta_z[j]);
        }
        for j in 0..k {
            rec[1 + p + j].push(state.gamma[j]);
        }
    }
    let nd = (draws as f64).sqrt();
    let mut checks: Vec<Check> = (0..q)
        .map(|j| Check::new(format!("E coef_{j}"), mean(&rec[j]), ols[j], cov[(j, j)].sqrt() / nd))
        .collect();
    for j in [0, q - 1] {
        checks.push(Check::new(
            format!("Var coef_{j}"),
            sample_var(&rec[j]),
            cov[(j, j)],
            cov[(j, j)] * (2.0 / (draws as f64 - 1.0)).sqrt(),
        ));
    }
    OracleReport {
        name: "flat-prior regression",
        checks,
    }
}

/// `τ | γ ~ Inv-Gamma(a + (K − 2)/2, b + γᵀDᵀDγ/2)` with `D` the second
/// difference operator.
pub fn tau_oracle(draws: usize, seed: u64) -> OracleReport {
    let inputs = small_inputs(seed);
    let mut state = small_state(&inputs, seed);
    let k = inputs.n_basis();
    state.gamma = DVector::from_fn(k, |j, _| (j as f64 * 1.3).sin() * 2.0);
    let cfg = McmcConfig::default();
    let mut quad = 0.0;
    for r in 0..k - 2 {
        quad += (state.gamma[r] - 2.0 * state.gamma[r + 1] + state.gamma[r + 2]).powi(2);
    }
    let shape = cfg.tau_shape + (k - 2) as f64 / 2.0;
    let scale = cfg.tau_scale + quad / 2.0;

    let mut r = rng(seed, 5);
    let (mut taus, mut precs) = (Vec::with_capacity(draws), Vec::with_capacity(draws));
    for _ in 0..draws {
        update_tau(&mut state, &inputs, &cfg, &mut r);
        taus.push(state.tau);
        precs.push(1.0 / state.tau);
    }
    let nd = (draws as f64).sqrt();
    OracleReport {
        name: "inverse-gamma tau",
        checks: vec![
            Check::new(
                "E tau",
                mean(&taus),
                scale / (shape - 1.0),
                (scale * scale / ((shape - 1.0).powi(2) * (shape - 2.0))).sqrt() / nd,
            ),
            Check::new(
                "E 1/tau",
                mean(&precs),
                shape / scale,
                (shape / (scale * scale)).sqrt() / nd,
            ),
        ],
    }
}

/// Each `X̃_i` is Gaussian with precision `Σu⁻¹ + Σω⁻¹ + Σx⁻¹ + γγᵀ/σε²`.
pub fn latent_oracle(draws: usize, seed: u64) -> OracleReport {
    let inputs = small_inputs(seed);
    let mut state = small_state(&inputs, seed);
    let k = inputs.n_basis();
    let zb = inputs.z() * &state.beta_z;
    let mut checks = Vec::new();
    let watch = [0usize, 7];
    let mut moments = Vec::new();
    for &i in &watch {
        let (zu, zw, zx) = (
            state.u_block.allocations()[i],
            state.w_block.allocations()[i],
            state.x_block.allocations()[i],
        );
        let ze = state.eps_block.allocations[i];
        let inv = |c: &DMatrix<f64>| c.clone().try_inverse().unwrap();
        let (pu, pw, px) = (
            inv(&state.u_block.covariances()[zu]),
            inv(&state.w_block.covariances()[zw]),
            inv(&state.x_block.covariances()[zx]),
        );
        let var_e = state.eps_block.variances[ze];
        let g = &state.gamma;
        let q = &pu + &pw + &px + g * g.transpose() / var_e;
        let w = inputs.w_scores().scores.row(i).transpose();
        let m = inputs.m_scores().scores.row(i).transpose();
        let resid = inputs.y()[i] - state.alpha0 - zb[i] - state.eps_block.means[ze];
        let b = &px * &state.x_block.means()[zx]
            + &pu * (w - &state.u_block.means()[zu])
            + &pw * (m - &state.w_block.means()[zw])
            + g * (resid / var_e);
        let cov = q.try_inverse().unwrap();
        moments.push((&cov * b, cov));
    }
    let mut r = rng(seed, 6);
    let mut rec = vec![series(k, draws); watch.len()];
    for _ in 0..draws {
        update_latent(&mut state, &inputs, &mut r).unwrap();
        for (w, &i) in watch.iter().enumerate() {
            for (j, slot) in rec[w].iter_mut().enumerate() {
                slot.push(state.latent[(j, i)]);
            }
        }
    }
    let nd = (draws as f64).sqrt();
    for (w, &i) in watch.iter().enumerate() {
        let (mu, cov) = &moments[w];
        for j in 0..k {
            checks.push(Check::new(
                format!("E X[{i},{j}]"),
                mean(&rec[w][j]),
                mu[j],
                cov[(j, j)].sqrt() / nd,
            ));
        }
        checks.push(Check::new(
            format!("Var X[{i},0]"),
            sample_var(&rec[w][0]),
            cov[(0, 0)],
            cov[(0, 0)] * (2.0 / (draws as f64 - 1.0)).sqrt(),
        ));
    }
    OracleReport {
        name: "Gaussian latent scores",
        checks,
    }
}

pub fn step_oracles(draws: usize, seed: u64) -> Vec<OracleReport> {
    vec![
        nig_oracle(draws, seed),
        niw_oracle(draws, seed),
        dirichlet_multinomial_oracle(draws, seed),
        regression_oracle(draws, seed),
        tau_oracle(draws, seed),
        latent_oracle(draws, seed),
    ]
}

/// Compares a marginal-conditional simulator (fresh prior draws) with a
/// successive-conditional one (simulate data, then one Gibbs sweep) on the
/// recorded functionals. Recentering is off: it is a deterministic move
/// that does not leave the prior invariant.
fn geweke_compare(name: &'static str, labels: &[&str], marginal: &[Vec<f64>], successive: &[Vec<f64>]) -> OracleReport {
    let checks = labels
        .iter()
        .enumerate()
        .map(|(j, label)| {
            let (a, b) = (&marginal[j], &successive[j]);
            let se_a = (sample_var(a) / a.len() as f64).sqrt();
            let se_b = batch_means_se(b, 50);
            Check::new(*label, mean(b), mean(a), (se_a * se_a + se_b * se_b).sqrt())
        })
        .collect();
    OracleReport { name, checks }
}

pub fn geweke_scalar(samples: usize, seed: u64) -> OracleReport {
    let prior = NigPrior {
        mean: 0.0,
        kappa: 0.5,
        shape: 4.0,
        scale: 3.0,
    };
    let (trunc, conc, n_obs) = (3, 1.5, 6);
    let g = |b: &ScalarMixtureBlock| [b.means[0], b.variances[0], b.weights[0], b.means[0].powi(2)];
    let mut r = rng(seed, 7);
    let mut marginal = series(4, samples);
    for _ in 0..samples {
        let b = ScalarMixtureBlock::from_prior(trunc, conc, prior, n_obs, &mut r).unwrap();
        for (slot, v) in marginal.iter_mut().zip(g(&b)) {
            slot.push(v);
        }
    }
    let mut successive = series(4, samples);
    let mut b = ScalarMixtureBlock::from_prior(trunc, conc, prior, n_obs, &mut r).unwrap();
    for _ in 0..samples {
        let x = b.simulate(&mut r);
        gibbs_update_scalar_mixture(&mut b, &x, &mut r, false).unwrap();
        for (slot, v) in successive.iter_mut().zip(g(&b)) {
            slot.push(v);
        }
    }
    geweke_compare(
        "Geweke scalar block",
        &["mu_1", "sigma2_1", "pi_1", "mu_1^2"],
        &marginal,
        &successive,
    )
}

pub fn geweke_mv(samples: usize, seed: u64) -> OracleReport {
    let prior = NiwPrior::new(DVector::zeros(2), 0.5, 7.0, DMatrix::identity(2, 2) * 2.0).unwrap();
    let (trunc, conc, n_obs) = (2, 1.0, 5);
    let g = |b: &MvMixtureBlock| {
        let (m, c) = (&b.means()[0], &b.covariances()[0]);
        [m[0], c[(0, 0)], c[(0, 1)], b.weights()[0]]
    };
    let mut r = rng(seed, 8);
    let mut marginal = series(4, samples);
    for _ in 0..samples {
        let b = MvMixtureBlock::from_prior(trunc, conc, prior.clone(), n_obs, &mut r).unwrap();
        for (slot, v) in marginal.iter_mut().zip(g(&b)) {
            slot.push(v);
        }
    }
    let mut successive = series(4, samples);
    let mut b = MvMixtureBlock::from_prior(trunc, conc, prior, n_obs, &mut r).unwrap();
    for _ in 0..samples {
        let x = b.simulate(&mut r).transpose();
        gibbs_update_mv_mixture(&mut b, &x, &mut r, false).unwrap();
        for (slot, v) in successive.iter_mut().zip(g(&b)) {
            slot.push(v);
        }
    }
    geweke_compare(
        "Geweke multivariate block",
        &["mu_1[1]", "Sigma_1[1,1]", "Sigma_1[1,2]", "pi_1"],
        &marginal,
        &successive,
    )
}

/// Everything `write_draws` puts on disk, concatenated in file-name order.
pub fn draws_bytes(draws: &sofri_core::PosteriorDraws) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    sofri_core::io::write_draws(dir.path(), draws).unwrap();
    let mut files: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(f.file_name().unwrap().to_string_lossy().as_bytes());
        out.extend(std::fs::read(&f).unwrap());
    }
    out
}

pub fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

/// Largest `|X̃ − W̃|` over the latent snapshots of a chain fitted with the
/// instrument replaced by `W` itself, on a nearly error-free scenario.
pub fn latent_gap_without_error(n: usize, n_iter: usize, seed: u64) -> f64 {
    let sc = Scenario {
        n,
        sigma_u: 1e-6,
        sigma_w: 1e-6,
        seed,
        ..Scenario::default()
    };
    let mut r = stream_rng(seed, stream_id(0, StreamRole::Data));
    let data = simulate_dataset(&sc, &mut r).unwrap();
    let prepared = sofri_core::prepare(&data.w, &data.w, data.y.clone(), data.z.clone(), &sc.fit.pipeline).unwrap();
    let cfg = McmcConfig {
        n_iter,
        burn_in: n_iter / 4,
        thin: 1,
        snapshot_every: 10,
        seed,
        ..McmcConfig::default()
    };
    let draws = sofri_core::run_chains(&prepared.inputs, &cfg).unwrap();
    let w = &prepared.inputs.w_scores().scores;
    draws
        .snapshots
        .iter()
        .map(|s| (&s.scores - w).abs().max())
        .fold(0.0, f64::max)
}

/// Two latent groups with means `±sin(2πt)` and a small latent spread.
pub fn two_group_scenario(n: usize, n_iter: usize, seed: u64) -> Scenario {
    let mut sc = Scenario {
        n,
        sigma_x: 0.5,
        sigma_u: 1.0,
        sigma_w: 0.25,
        latent_mean: sofri_core::simulate::LatentMean::TwoGroup,
        seed,
        ..Scenario::default()
    };
    sc.fit.known_delta = true;
    sc.fit.mcmc.n_iter = n_iter;
    sc.fit.mcmc.burn_in = n_iter / 4;
    sc.fit.mcmc.keep_allocations = true;
    sc.fit.mcmc.snapshot_every = 10;
    sc
}

#[derive(Debug, Clone)]
pub struct ClusterRun {
    pub n_clusters: usize,
    /// Share of curves whose cluster matches its generating group under the
    /// best assignment of clusters to groups.
    pub agreement: f64,
    pub contrast: Option<sofri_core::posterior::Contrast>,
    /// `∫ β(t) {μ_0(t) − μ_1(t)} dt` on the grid, with the group means of the generator.
    pub truth: f64,
}

impl ClusterRun {
    pub fn covered(&self) -> bool {
        self.contrast
            .is_some_and(|c| c.lower <= self.truth && self.truth <= c.upper)
    }
}

pub fn cluster_run(sc: &Scenario, rep: usize) -> ClusterRun {
    let mut r = stream_rng(sc.seed, stream_id(rep as u64, StreamRole::Data));
    let data = simulate_dataset(sc, &mut r).unwrap();
    let prepared = prepare_data(&data, &sc.fit).unwrap();
    let mut r = stream_rng(sc.seed, stream_id(rep as u64, StreamRole::Fit(0)));
    let draws = sofri_core::run_chain(&prepared.inputs, &sc.fit.mcmc, &mut r).unwrap();
    let clusters = sofri_core::extract_clusters(&draws, &prepared.basis).unwrap();

    let k = clusters.n_clusters;
    let mut table = vec![[0usize; 2]; k + 1];
    for (&l, &g) in clusters.labels.iter().zip(&data.groups) {
        table[l][g] += 1;
    }
    let mut best = (0, None);
    for a in 1..=k {
        best = best.max((table[a][0].max(table[a][1]), None));
        for b in (1..=k).filter(|&b| b != a) {
            best = best.max((table[a][0] + table[b][1], Some((a, b))));
        }
    }
    let contrast = best
        .1
        .map(|(a, b)| sofri_core::cluster_contrast(&draws, &clusters, a, b, 0.9).unwrap());

    let grid = sc.grid();
    let weights = grid.trapezoid_weights();
    let truth = grid
        .points()
        .iter()
        .zip(weights.iter())
        .map(|(&t, w)| w * sc.true_beta.eval(t) * 2.0 * (2.0 * std::f64::consts::PI * t).sin())
        .sum();
    ClusterRun {
        n_clusters: k,
        agreement: best.0 as f64 / sc.n as f64,
        contrast,
        truth,
    }
}
