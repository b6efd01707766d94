//! Shared fixtures for the benchmark suite.

use std::sync::Arc;

use qtopo_core::simcore::rng::rng_from_seed;
use qtopo_core::{MeasurementEngine, MeasurementSettings, NetworkExperiment, NetworkTopology, StatePrep};

/// W(3) on qubits 0..3 and a Bell pair on 3..5, one qubit per node.
pub fn w_bell_experiment() -> NetworkExperiment {
    let t = NetworkTopology::new(5, vec![vec![0, 1, 2], vec![3, 4]], (0..5).map(|q| vec![q]).collect())
        .expect("valid topology");
    NetworkExperiment::from_topology(&t, &[StatePrep::w(3), StatePrep::bell()], &[]).expect("prepares")
}

/// A ring of `n` Bell pairs spread over `n` nodes, two qubits per node.
pub fn bell_ring(n: usize) -> NetworkExperiment {
    let sources: Vec<Vec<usize>> = (0..n).map(|s| vec![2 * s, (2 * s + 3) % (2 * n)]).collect();
    let nodes: Vec<Vec<usize>> = (0..n).map(|k| vec![2 * k, 2 * k + 1]).collect();
    let t = NetworkTopology::new(2 * n, sources, nodes).expect("valid topology");
    let preps = vec![StatePrep::bell(); n];
    NetworkExperiment::from_topology(&t, &preps, &[]).expect("prepares")
}

pub fn engine(experiment: &NetworkExperiment) -> Arc<MeasurementEngine> {
    experiment.engine().clone()
}

pub fn random_settings(n: usize, seed: u64) -> MeasurementSettings {
    MeasurementSettings::random(n, &mut rng_from_seed(seed))
}
