//! Density-matrix simulation of network states, noise and local measurements.

pub mod channel;
pub mod measure;
pub mod rng;
pub mod state;

use thiserror::Error;

use crate::netmodel::NetworkTopology;

pub use channel::{apply_link_channels, KrausChannel};
pub use measure::{
    angles_for_axis, measurement_axis, measurement_probabilities, qubit_unitary, sample_outcomes, Angles, MeasurementEngine,
    MeasurementSettings, OutcomeDistribution, OutcomeMode, ShotConfig, SIGMA_X, SIGMA_Y, SIGMA_Z,
};
pub use state::{DensityMatrix, PrepKind, StatePrep, MAX_QUBITS};

pub type C64 = nalgebra::Complex<f64>;

/// Tolerance for Hermiticity, trace and positivity checks.
pub const PHYSICAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("Kraus operators are not complete (deviation {deviation:e})")]
    IncompleteKrausSet { deviation: f64 },
    #[error("parameter {name} = {value} is out of range")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("qubit {qubit} out of range for a {n_qubits}-qubit register")]
    QubitIndexOutOfRange { qubit: usize, n_qubits: usize },
    #[error("non-physical state: {0}")]
    NonPhysicalState(String),
    #[error("qubit {0} listed more than once")]
    DuplicateQubit(usize),
    #[error("empty qubit selection")]
    EmptySelection,
    #[error("{0} qubits is outside the supported range 1..={max}", max = MAX_QUBITS)]
    TooManyQubits(usize),
    #[error("measurement settings cover {available} qubits but qubit {qubit} was requested")]
    SettingsMismatch { qubit: usize, available: usize },
}

/// Global network state: sources are prepared independently and their tensor
/// factors are permuted into ascending qubit-id order.
pub fn prepare_network_state(
    topology: &NetworkTopology,
    preps: &[StatePrep],
) -> Result<DensityMatrix, SimError> {
    if preps.len() != topology.n_sources() {
        return Err(SimError::DimensionMismatch {
            expected: topology.n_sources(),
            found: preps.len(),
        });
    }
    if topology.n_qubits() > MAX_QUBITS {
        return Err(SimError::TooManyQubits(topology.n_qubits()));
    }
    let mut joint: Option<DensityMatrix> = None;
    for (source, prep) in topology.sources().iter().zip(preps) {
        if prep.n_qubits() != source.len() {
            return Err(SimError::DimensionMismatch {
                expected: source.len(),
                found: prep.n_qubits(),
            });
        }
        let rho = prep.density_matrix()?;
        joint = Some(match joint {
            None => rho,
            Some(acc) => acc.tensor(&rho),
        });
    }
    let joint = joint.ok_or(SimError::EmptySelection)?;
    let order: Vec<usize> = topology.sources().iter().flatten().copied().collect();
    joint.permute_qubits(&order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn sigma2() -> DensityMatrix {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = C64::new(0.5, 0.0);
        m[(3, 3)] = C64::new(0.5, 0.0);
        DensityMatrix::new(m).unwrap()
    }

    #[test]
    fn single_bell_source() {
        let t = NetworkTopology::new(2, vec![vec![0, 1]], vec![vec![0], vec![1]]).unwrap();
        let rho = prepare_network_state(&t, &[StatePrep::bell()]).unwrap();
        assert!(rho.max_abs_diff(&StatePrep::bell().density_matrix().unwrap()) < 1e-15);
    }

    #[test]
    fn interleaved_ghz_triangle() {
        // two GHZ₃ sources, nodes hold one qubit of each
        let t = NetworkTopology::new(
            6,
            vec![vec![0, 2, 4], vec![1, 3, 5]],
            vec![vec![0, 1], vec![2, 3], vec![4, 5]],
        )
        .unwrap();
        let rho = prepare_network_state(&t, &[StatePrep::ghz(3), StatePrep::ghz(3)]).unwrap();
        let expected = sigma2().tensor(&sigma2());
        // nodes 0 and 1 hold qubits 0,1,2,3; source order is (0,2),(1,3)
        let r = rho.partial_trace(&[0, 2, 1, 3]).unwrap();
        let r = r.permute_qubits(&[0, 2, 1, 3]).unwrap();
        assert!(r.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn w_times_bell_marginal() {
        let t = NetworkTopology::new(
            5,
            vec![vec![0, 1, 2], vec![3, 4]],
            (0..5).map(|q| vec![q]).collect(),
        )
        .unwrap();
        let rho = prepare_network_state(&t, &[StatePrep::w(3), StatePrep::bell()]).unwrap();
        let r = rho.partial_trace(&[0]).unwrap();
        assert_abs_diff_eq!(r.matrix()[(0, 0)].re, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.matrix()[(1, 1)].re, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn source_order_does_not_matter() {
        let a = NetworkTopology::new(5, vec![vec![0, 3, 4], vec![1, 2]], vec![vec![0, 1], vec![2, 3], vec![4]]).unwrap();
        let b = NetworkTopology::new(5, vec![vec![1, 2], vec![0, 3, 4]], vec![vec![0, 1], vec![2, 3], vec![4]]).unwrap();
        let w = StatePrep::w(3).with_rotations(vec![[0.1, 0.2, 0.3], [1.0, 0.0, 2.0], [0.0, 0.4, 0.0]]);
        let p = StatePrep::bell().with_rotations(vec![[0.7, 1.3, 0.0], [0.0, 0.0, 0.0]]);
        let ra = prepare_network_state(&a, &[w.clone(), p.clone()]).unwrap();
        let rb = prepare_network_state(&b, &[p, w]).unwrap();
        assert!(ra.max_abs_diff(&rb) < 1e-14);
    }

    #[test]
    fn prep_size_mismatch() {
        let t = NetworkTopology::new(2, vec![vec![0, 1]], vec![vec![0, 1]]).unwrap();
        assert!(matches!(
            prepare_network_state(&t, &[StatePrep::ghz(3)]),
            Err(SimError::DimensionMismatch { expected: 2, found: 3 })
        ));
    }
}
