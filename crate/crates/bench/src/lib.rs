//! Shared fixtures for the benchmarks.

use sofri_core::bayes::{stream_id, stream_rng, StreamRole};
use sofri_core::simulate::{prepare_data, simulate_dataset, Scenario, SimulatedData};
use sofri_core::Prepared;

/// The default simulation scenario with `n` curves.
pub fn scenario(n: usize) -> Scenario {
    Scenario {
        n,
        ..Scenario::default()
    }
}

pub fn dataset(n: usize) -> SimulatedData {
    let sc = scenario(n);
    let mut rng = stream_rng(sc.seed, stream_id(0, StreamRole::Data));
    simulate_dataset(&sc, &mut rng).expect("valid scenario")
}

pub fn prepared(n: usize) -> Prepared {
    let sc = scenario(n);
    prepare_data(&dataset(n), &sc.fit).expect("simulated data prepares")
}
