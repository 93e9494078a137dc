mod common;

use common::{draws_bytes, in_pool};
use sofri_core::bayes::{stream_id, stream_rng, StreamRole};
use sofri_core::simulate::{prepare_data, run_replicate, simulate_dataset, EstimatorId, Scenario};
use sofri_core::{run_chains, run_study, McmcConfig, ModelInputs};

fn inputs() -> ModelInputs {
    let sc = Scenario {
        n: 60,
        n_grid: 25,
        ..Scenario::default()
    };
    let mut r = stream_rng(sc.seed, stream_id(0, StreamRole::Data));
    let data = simulate_dataset(&sc, &mut r).unwrap();
    prepare_data(&data, &sc.fit).unwrap().inputs
}

fn config(chains: usize) -> McmcConfig {
    McmcConfig {
        n_iter: 150,
        burn_in: 50,
        thin: 2,
        n_chains: chains,
        snapshot_every: 5,
        seed: 42,
        ..McmcConfig::default()
    }
}

fn small_study() -> Scenario {
    let mut sc = Scenario {
        n: 60,
        n_grid: 20,
        n_reps: 4,
        seed: 9,
        ..Scenario::default()
    };
    sc.fit.mcmc.n_iter = 120;
    sc.fit.mcmc.burn_in = 40;
    sc
}

#[test]
fn reruns_write_identical_bytes() {
    let inputs = inputs();
    let a = draws_bytes(&run_chains(&inputs, &config(3)).unwrap());
    let b = draws_bytes(&run_chains(&inputs, &config(3)).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn thread_count_does_not_change_draws() {
    let inputs = inputs();
    let one = in_pool(1, || draws_bytes(&run_chains(&inputs, &config(3)).unwrap()));
    let four = in_pool(4, || draws_bytes(&run_chains(&inputs, &config(3)).unwrap()));
    assert_eq!(one, four);
}

#[test]
fn adding_chains_leaves_earlier_chains_alone() {
    let inputs = inputs();
    let single = run_chains(&inputs, &config(1)).unwrap();
    let triple = run_chains(&inputs, &config(3)).unwrap();
    let first: Vec<_> = triple.records.iter().filter(|r| r.chain == 0).cloned().collect();
    assert_eq!(first, single.records);
    let second: Vec<_> = triple.records.iter().filter(|r| r.chain == 1).collect();
    assert_eq!(second.len(), first.len());
    assert_ne!(second[0].gamma, first[0].gamma);
}

#[test]
fn seed_changes_draws() {
    let inputs = inputs();
    let a = run_chains(&inputs, &config(1)).unwrap();
    let b = run_chains(&inputs, &McmcConfig { seed: 43, ..config(1) }).unwrap();
    assert_ne!(a.records, b.records);
}

#[test]
fn replicate_order_does_not_matter() {
    let sc = small_study();
    let ests = [EstimatorId::BayesIv, EstimatorId::NaiveW];
    let study = in_pool(4, || run_study(&sc, &ests).unwrap());
    let truth = sc.beta_curve();
    for rep in (0..sc.n_reps).rev() {
        let curves = run_replicate(&sc, &ests, rep).unwrap();
        for (k, curve) in curves.iter().enumerate() {
            let ise = (curve - &truth).norm_squared() / truth.len() as f64;
            assert_eq!(ise.to_bits(), study.estimators[k].per_rep_ise[rep].to_bits());
        }
    }
    let serial = in_pool(1, || run_study(&sc, &ests).unwrap());
    assert_eq!(serial, study);
}
