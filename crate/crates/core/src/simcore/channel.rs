//! Kraus-operator channels and their application to network states.

use nalgebra::DMatrix;

use super::state::DensityMatrix;
use super::{SimError, C64, PHYSICAL_TOL};

#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    n_qubits: usize,
    ops: Vec<DMatrix<C64>>,
}

fn pauli(index: usize) -> DMatrix<C64> {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match index {
        0 => DMatrix::from_row_slice(2, 2, &[one, z, z, one]),
        1 => DMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        2 => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        3 => DMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
        _ => unreachable!("pauli index"),
    }
}

fn check_strength(gamma: f64) -> Result<(), SimError> {
    if gamma.is_finite() && (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(SimError::ParameterOutOfRange {
            name: "gamma",
            value: gamma,
        })
    }
}

impl KrausChannel {
    /// Builds a channel, checking `Σ K†K = I` within [`PHYSICAL_TOL`].
    pub fn new(ops: Vec<DMatrix<C64>>) -> Result<Self, SimError> {
        let dim = ops.first().map(|k| k.nrows()).unwrap_or(0);
        if dim == 0 || !dim.is_power_of_two() {
            return Err(SimError::IncompleteKrausSet { deviation: f64::NAN });
        }
        for k in &ops {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(SimError::DimensionMismatch {
                    expected: dim,
                    found: k.nrows(),
                });
            }
        }
        let sum = ops
            .iter()
            .fold(DMatrix::<C64>::zeros(dim, dim), |acc, k| acc + k.adjoint() * k);
        let deviation = (sum - DMatrix::<C64>::identity(dim, dim))
            .iter()
            .map(|x| x.norm())
            .fold(0.0, f64::max);
        if deviation > PHYSICAL_TOL {
            return Err(SimError::IncompleteKrausSet { deviation });
        }
        Ok(Self {
            n_qubits: dim.trailing_zeros() as usize,
            ops,
        })
    }

    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        Self {
            n_qubits,
            ops: vec![DMatrix::identity(dim, dim)],
        }
    }

    /// Single-qubit depolarizing channel: `ρ ↦ (1-γ)ρ + γ I/2`.
    pub fn depolarizing(gamma: f64) -> Result<Self, SimError> {
        Self::depolarizing_multi(1, gamma)
    }

    /// Joint depolarizing on `n` qubits: `ρ ↦ (1-γ)ρ + γ I/2ⁿ`, written as a
    /// weighted sum over the `4ⁿ` Pauli strings.
    pub fn depolarizing_multi(n_qubits: usize, gamma: f64) -> Result<Self, SimError> {
        check_strength(gamma)?;
        if n_qubits == 0 || n_qubits > 6 {
            return Err(SimError::TooManyQubits(n_qubits));
        }
        let count = 1usize << (2 * n_qubits);
        let weight = gamma / count as f64;
        let ops = (0..count)
            .map(|idx| {
                let string = (0..n_qubits).fold(DMatrix::<C64>::identity(1, 1), |acc, t| {
                    let p = (idx >> (2 * (n_qubits - 1 - t))) & 3;
                    acc.kronecker(&pauli(p))
                });
                let w = if idx == 0 { 1.0 - gamma + weight } else { weight };
                string * C64::new(w.sqrt(), 0.0)
            })
            .collect();
        Self::new(ops)
    }

    pub fn amplitude_damping(gamma: f64) -> Result<Self, SimError> {
        check_strength(gamma)?;
        let z = C64::new(0.0, 0.0);
        let k0 = DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), z, z, C64::new((1.0 - gamma).sqrt(), 0.0)],
        );
        let k1 = DMatrix::from_row_slice(2, 2, &[z, C64::new(gamma.sqrt(), 0.0), z, z]);
        Self::new(vec![k0, k1])
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[DMatrix<C64>] {
        &self.ops
    }

    /// Applies `Σ K ρ K†` on the listed qubits of `state`.
    pub fn apply(&self, state: &DensityMatrix, qubits: &[usize]) -> Result<DensityMatrix, SimError> {
        if qubits.len() != self.n_qubits {
            return Err(SimError::DimensionMismatch {
                expected: self.n_qubits,
                found: qubits.len(),
            });
        }
        let dim = state.dim();
        let mut acc = DMatrix::<C64>::zeros(dim, dim);
        for k in &self.ops {
            acc += state.conjugate(qubits, k)?.into_matrix();
        }
        Ok(DensityMatrix::from_raw(state.n_qubits(), acc))
    }
}

/// Applies one single-qubit channel per link; `channels[k]` acts on qubit `k`.
pub fn apply_link_channels(
    state: &DensityMatrix,
    channels: &[KrausChannel],
) -> Result<DensityMatrix, SimError> {
    if channels.len() != state.n_qubits() {
        return Err(SimError::DimensionMismatch {
            expected: state.n_qubits(),
            found: channels.len(),
        });
    }
    let mut out = state.clone();
    for (q, ch) in channels.iter().enumerate() {
        if ch.n_qubits() != 1 {
            return Err(SimError::DimensionMismatch {
                expected: 1,
                found: ch.n_qubits(),
            });
        }
        if ch.ops.len() == 1 && ch.ops[0] == DMatrix::<C64>::identity(2, 2) {
            continue;
        }
        out = ch.apply(&out, &[q])?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::state::StatePrep;
    use approx::assert_abs_diff_eq;

    fn bell() -> DensityMatrix {
        StatePrep::bell().density_matrix().unwrap()
    }

    #[test]
    fn depolarizing_weights() {
        let ch = KrausChannel::depolarizing(0.5).unwrap();
        assert_eq!(ch.ops().len(), 4);
        assert_abs_diff_eq!(ch.ops()[0][(0, 0)].re, (5.0f64 / 8.0).sqrt(), epsilon = 1e-15);
        for k in &ch.ops()[1..] {
            let w = k.iter().map(|x| x.norm()).fold(0.0, f64::max);
            assert_abs_diff_eq!(w, (1.0f64 / 8.0).sqrt(), epsilon = 1e-15);
        }
        let id = KrausChannel::depolarizing(0.0).unwrap();
        let rho = bell();
        let out = apply_link_channels(&rho, &[id.clone(), id]).unwrap();
        assert!(out.max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn full_depolarizing_gives_maximally_mixed() {
        let ch = KrausChannel::depolarizing(1.0).unwrap();
        let out = apply_link_channels(&bell(), &[ch.clone(), ch]).unwrap();
        assert!(out.max_abs_diff(&DensityMatrix::maximally_mixed(2)) < 1e-15);
    }

    #[test]
    fn depolarized_bell_closed_form() {
        for i in 0..=10 {
            let g = i as f64 / 10.0;
            let ch = KrausChannel::depolarizing(g).unwrap();
            let out = apply_link_channels(&bell(), &[ch.clone(), ch]).unwrap();
            let expected = DMatrix::identity(4, 4) * C64::new(g * (2.0 - g) / 4.0, 0.0)
                + bell().into_matrix() * C64::new((1.0 - g).powi(2), 0.0);
            assert!(out.max_abs_diff(&DensityMatrix::from_raw(2, expected)) < 1e-14);
        }
    }

    #[test]
    fn amplitude_damped_bell_matches_closed_form() {
        for i in 0..=10 {
            let g = i as f64 / 10.0;
            let ch = KrausChannel::amplitude_damping(g).unwrap();
            let out = apply_link_channels(&bell(), &[ch.clone(), ch]).unwrap();
            let mut e = DMatrix::<C64>::zeros(4, 4);
            e[(0, 0)] = C64::new((1.0 + g * g) / 2.0, 0.0);
            e[(1, 1)] = C64::new(g * (1.0 - g) / 2.0, 0.0);
            e[(2, 2)] = C64::new(g * (1.0 - g) / 2.0, 0.0);
            e[(3, 3)] = C64::new((1.0 - g).powi(2) / 2.0, 0.0);
            e[(0, 3)] = C64::new((1.0 - g) / 2.0, 0.0);
            e[(3, 0)] = C64::new((1.0 - g) / 2.0, 0.0);
            assert!(out.max_abs_diff(&DensityMatrix::from_raw(2, e)) < 1e-15);
        }
    }

    #[test]
    fn full_amplitude_damping_resets_to_zero() {
        let ch = KrausChannel::amplitude_damping(1.0).unwrap();
        let rho = StatePrep::w(3).density_matrix().unwrap();
        let out = apply_link_channels(&rho, &[ch.clone(), ch.clone(), ch]).unwrap();
        assert!(out.max_abs_diff(&DensityMatrix::zero_state(3)) < 1e-15);
    }

    #[test]
    fn multi_qubit_depolarizing_on_source() {
        let g = 0.35;
        let ch = KrausChannel::depolarizing_multi(2, g).unwrap();
        assert_eq!(ch.ops().len(), 16);
        let out = ch.apply(&bell(), &[0, 1]).unwrap();
        let expected = bell().into_matrix() * C64::new(1.0 - g, 0.0)
            + DMatrix::identity(4, 4) * C64::new(g / 4.0, 0.0);
        assert!(out.max_abs_diff(&DensityMatrix::from_raw(2, expected)) < 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            KrausChannel::depolarizing(1.5),
            Err(SimError::ParameterOutOfRange { .. })
        ));
        assert!(KrausChannel::amplitude_damping(-0.1).is_err());
        let half = DMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        assert!(matches!(
            KrausChannel::new(vec![half]),
            Err(SimError::IncompleteKrausSet { .. })
        ));
    }
}
