//! Dense density matrices and state preparation.
//!
//! Basis ordering: global kets are ordered by ascending qubit id with qubit 0
//! the leftmost tensor factor, i.e. qubit `k` of an `n`-qubit register lives
//! in bit `n - 1 - k` of the basis index.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;

use super::measure::{qubit_unitary, Angles};
use super::{SimError, C64, PHYSICAL_TOL};

/// Practical cap on register size for the dense representation.
pub const MAX_QUBITS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates that `data` is a physical state: Hermitian, unit trace and
    /// positive semidefinite, all within [`PHYSICAL_TOL`].
    pub fn new(data: DMatrix<C64>) -> Result<Self, SimError> {
        let dim = data.nrows();
        if dim != data.ncols() || !dim.is_power_of_two() || dim == 0 {
            return Err(SimError::DimensionMismatch {
                expected: dim.max(1).next_power_of_two(),
                found: data.ncols(),
            });
        }
        let n_qubits = dim.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(n_qubits));
        }
        let state = Self { n_qubits, data };
        state.check_physical()?;
        Ok(state)
    }

    pub(crate) fn from_raw(n_qubits: usize, data: DMatrix<C64>) -> Self {
        debug_assert_eq!(data.nrows(), 1 << n_qubits);
        Self { n_qubits, data }
    }

    /// `|ψ⟩⟨ψ|` for a normalized amplitude vector.
    pub fn from_pure(amplitudes: &[C64]) -> Result<Self, SimError> {
        let dim = amplitudes.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(SimError::DimensionMismatch {
                expected: dim.max(1).next_power_of_two(),
                found: dim,
            });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > PHYSICAL_TOL {
            return Err(SimError::NonPhysicalState(format!(
                "amplitude vector has squared norm {norm}"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(n_qubits));
        }
        let data = DMatrix::from_fn(dim, dim, |r, c| amplitudes[r] * amplitudes[c].conj());
        Ok(Self { n_qubits, data })
    }

    pub fn zero_state(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let mut data = DMatrix::zeros(dim, dim);
        data[(0, 0)] = C64::new(1.0, 0.0);
        Self { n_qubits, data }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let data = DMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0);
        Self { n_qubits, data }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.data
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    /// Real eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .data
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn check_physical(&self) -> Result<(), SimError> {
        let dim = self.dim();
        for r in 0..dim {
            for c in r..dim {
                let d = self.data[(r, c)] - self.data[(c, r)].conj();
                if d.norm() > PHYSICAL_TOL {
                    return Err(SimError::NonPhysicalState(format!(
                        "not Hermitian at ({r}, {c}): deviation {}",
                        d.norm()
                    )));
                }
            }
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > PHYSICAL_TOL || tr.im.abs() > PHYSICAL_TOL {
            return Err(SimError::NonPhysicalState(format!("trace is {tr}")));
        }
        let min_ev = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min_ev < -PHYSICAL_TOL {
            return Err(SimError::NonPhysicalState(format!(
                "negative eigenvalue {min_ev}"
            )));
        }
        Ok(())
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `self ⊗ other`, with `self` as the leading qubits.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            n_qubits: self.n_qubits + other.n_qubits,
            data: self.data.kronecker(&other.data),
        }
    }

    pub fn diagonal_probabilities(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.data[(i, i)].re.max(0.0))
            .collect()
    }

    fn check_qubits(&self, qubits: &[usize]) -> Result<(), SimError> {
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(SimError::QubitIndexOutOfRange {
                    qubit: q,
                    n_qubits: self.n_qubits,
                });
            }
            if qubits[..i].contains(&q) {
                return Err(SimError::DuplicateQubit(q));
            }
        }
        Ok(())
    }

    /// Reduced state on `keep`, returned in ascending qubit order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix, SimError> {
        if keep.is_empty() {
            return Err(SimError::EmptySelection);
        }
        self.check_qubits(keep)?;
        let mut kept: Vec<usize> = keep.to_vec();
        kept.sort_unstable();
        let traced: Vec<usize> = (0..self.n_qubits).filter(|q| !kept.contains(q)).collect();
        let kept_off = subsystem_offsets(self.n_qubits, &kept);
        let traced_off = subsystem_offsets(self.n_qubits, &traced);
        let k = kept_off.len();
        let out = DMatrix::from_fn(k, k, |r, c| {
            traced_off
                .iter()
                .map(|&e| self.data[(kept_off[r] | e, kept_off[c] | e)])
                .sum()
        });
        Ok(DensityMatrix {
            n_qubits: kept.len(),
            data: out,
        })
    }

    /// `O ρ O†` for an operator acting on `qubits` (first listed qubit is the
    /// most significant factor of `op`).
    pub fn conjugate(&self, qubits: &[usize], op: &DMatrix<C64>) -> Result<DensityMatrix, SimError> {
        self.check_qubits(qubits)?;
        let m = 1usize << qubits.len();
        if op.nrows() != m || op.ncols() != m {
            return Err(SimError::DimensionMismatch {
                expected: m,
                found: op.nrows(),
            });
        }
        Ok(DensityMatrix {
            n_qubits: self.n_qubits,
            data: conjugate_local(&self.data, self.n_qubits, qubits, op),
        })
    }

    /// Applies a single-qubit rotation to every listed qubit.
    pub fn rotate_qubits(&self, rotations: &[(usize, Angles)]) -> Result<DensityMatrix, SimError> {
        let mut out = self.clone();
        for &(q, angles) in rotations {
            let u = qubit_unitary(angles);
            let op = DMatrix::from_column_slice(2, 2, u.as_slice());
            out = out.conjugate(&[q], &op)?;
        }
        Ok(out)
    }

    /// Reorders tensor factors: factor `p` of `self` becomes qubit `order[p]`
    /// of the result.
    pub fn permute_qubits(&self, order: &[usize]) -> Result<DensityMatrix, SimError> {
        let n = self.n_qubits;
        if order.len() != n {
            return Err(SimError::DimensionMismatch {
                expected: n,
                found: order.len(),
            });
        }
        self.check_qubits(order)?;
        let dim = self.dim();
        let map: Vec<usize> = (0..dim)
            .map(|i| {
                (0..n).fold(0usize, |acc, p| {
                    let bit = (i >> (n - 1 - p)) & 1;
                    acc | (bit << (n - 1 - order[p]))
                })
            })
            .collect();
        let mut data = DMatrix::zeros(dim, dim);
        for c in 0..dim {
            for r in 0..dim {
                data[(map[r], map[c])] = self.data[(r, c)];
            }
        }
        Ok(DensityMatrix { n_qubits: n, data })
    }
}

/// Basis-index offsets spanned by `qubits` in an `n`-qubit register, in the
/// order where `qubits[0]` is the most significant bit of the local index.
pub(crate) fn subsystem_offsets(n: usize, qubits: &[usize]) -> Vec<usize> {
    let m = qubits.len();
    (0..1usize << m)
        .map(|k| {
            qubits.iter().enumerate().fold(0usize, |acc, (t, &q)| {
                let bit = (k >> (m - 1 - t)) & 1;
                acc | (bit << (n - 1 - q))
            })
        })
        .collect()
}

pub(crate) fn conjugate_local(
    rho: &DMatrix<C64>,
    n: usize,
    qubits: &[usize],
    op: &DMatrix<C64>,
) -> DMatrix<C64> {
    let dim = rho.nrows();
    let local = subsystem_offsets(n, qubits);
    let mask = local.iter().fold(0, |a, &o| a | o);
    let bases: Vec<usize> = (0..dim).filter(|i| i & mask == 0).collect();
    let m = local.len();
    let mut left = rho.clone();
    let mut buf = vec![C64::new(0.0, 0.0); m];
    // left multiplication: columns are independent
    for c in 0..dim {
        for &b in &bases {
            for (k, &o) in local.iter().enumerate() {
                buf[k] = rho[(b | o, c)];
            }
            for (r, &o) in local.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..m {
                    acc += op[(r, k)] * buf[k];
                }
                left[(b | o, c)] = acc;
            }
        }
    }
    let mut out = left.clone();
    for r in 0..dim {
        for &b in &bases {
            for (k, &o) in local.iter().enumerate() {
                buf[k] = left[(r, b | o)];
            }
            for (c, &o) in local.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..m {
                    acc += buf[k] * op[(c, k)].conj();
                }
                out[(r, b | o)] = acc;
            }
        }
    }
    out
}

/// Source state families.
#[derive(Clone, Debug, PartialEq)]
pub enum PrepKind {
    Ghz(usize),
    W(usize),
    Bell,
    Zero(usize),
    Pure(Vec<C64>),
    Mixed(DensityMatrix),
}

/// A source preparation: a state family plus optional local rotations
/// applied to each of its qubits afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePrep {
    pub kind: PrepKind,
    pub rotations: Option<Vec<Angles>>,
}

impl StatePrep {
    pub fn new(kind: PrepKind) -> Self {
        Self {
            kind,
            rotations: None,
        }
    }

    pub fn ghz(n: usize) -> Self {
        Self::new(PrepKind::Ghz(n))
    }

    pub fn w(n: usize) -> Self {
        Self::new(PrepKind::W(n))
    }

    pub fn bell() -> Self {
        Self::new(PrepKind::Bell)
    }

    pub fn zero(n: usize) -> Self {
        Self::new(PrepKind::Zero(n))
    }

    pub fn with_rotations(mut self, rotations: Vec<Angles>) -> Self {
        self.rotations = Some(rotations);
        self
    }

    pub fn n_qubits(&self) -> usize {
        match &self.kind {
            PrepKind::Ghz(n) | PrepKind::W(n) | PrepKind::Zero(n) => *n,
            PrepKind::Bell => 2,
            PrepKind::Pure(a) => a.len().max(1).trailing_zeros() as usize,
            PrepKind::Mixed(rho) => rho.n_qubits(),
        }
    }

    pub fn density_matrix(&self) -> Result<DensityMatrix, SimError> {
        let rho = match &self.kind {
            PrepKind::Ghz(n) => DensityMatrix::from_pure(&ghz_amplitudes(*n)?)?,
            PrepKind::W(n) => DensityMatrix::from_pure(&w_amplitudes(*n)?)?,
            PrepKind::Bell => DensityMatrix::from_pure(&ghz_amplitudes(2)?)?,
            PrepKind::Zero(n) => {
                if *n == 0 || *n > MAX_QUBITS {
                    return Err(SimError::TooManyQubits(*n));
                }
                DensityMatrix::zero_state(*n)
            }
            PrepKind::Pure(a) => DensityMatrix::from_pure(a)?,
            PrepKind::Mixed(rho) => {
                rho.check_physical()?;
                rho.clone()
            }
        };
        match &self.rotations {
            None => Ok(rho),
            Some(rot) => {
                if rot.len() != rho.n_qubits() {
                    return Err(SimError::DimensionMismatch {
                        expected: rho.n_qubits(),
                        found: rot.len(),
                    });
                }
                let pairs: Vec<(usize, Angles)> = rot.iter().copied().enumerate().collect();
                rho.rotate_qubits(&pairs)
            }
        }
    }
}

fn check_size(n: usize) -> Result<usize, SimError> {
    if n == 0 || n > MAX_QUBITS {
        Err(SimError::TooManyQubits(n))
    } else {
        Ok(1 << n)
    }
}

pub fn ghz_amplitudes(n: usize) -> Result<Vec<C64>, SimError> {
    let dim = check_size(n)?;
    let mut a = vec![C64::new(0.0, 0.0); dim];
    a[0] = C64::new(FRAC_1_SQRT_2, 0.0);
    a[dim - 1] += C64::new(FRAC_1_SQRT_2, 0.0);
    Ok(a)
}

/// Uniform superposition of the `n` single-excitation kets.
pub fn w_amplitudes(n: usize) -> Result<Vec<C64>, SimError> {
    let dim = check_size(n)?;
    let mut a = vec![C64::new(0.0, 0.0); dim];
    let amp = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    for k in 0..n {
        a[1 << k] = amp;
    }
    Ok(a)
}
