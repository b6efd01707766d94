//! Local projective measurements, outcome distributions and shot sampling.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix2, Matrix4};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::rng::rng_from_seed;
use super::state::{conjugate_local, DensityMatrix};
use super::{SimError, C64, PHYSICAL_TOL};

/// Euler angles `(θ₁, θ₂, θ₃)` of a single-qubit measurement rotation.
pub type Angles = [f64; 3];

/// Measures in the computational (σ_z) basis.
pub const SIGMA_Z: Angles = [0.0, 0.0, 0.0];
/// Outcome 0 ↔ `|+⟩`, outcome 1 ↔ `|−⟩`.
pub const SIGMA_X: Angles = [0.0, -FRAC_PI_2, 0.0];
/// Outcome 0 ↔ `|+i⟩`, outcome 1 ↔ `|−i⟩`.
pub const SIGMA_Y: Angles = [-FRAC_PI_2, -FRAC_PI_2, 0.0];

/// `U(θ) = Rz(θ₃)·Ry(θ₂)·Rz(θ₁)`; the measurement projectors are
/// `Π_x = U†|x⟩⟨x|U`.
pub fn qubit_unitary(angles: Angles) -> Matrix2<C64> {
    let rz = |phi: f64| {
        Matrix2::new(
            C64::from_polar(1.0, -phi / 2.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::from_polar(1.0, phi / 2.0),
        )
    };
    let (s, c) = (angles[1] / 2.0).sin_cos();
    let ry = Matrix2::new(
        C64::new(c, 0.0),
        C64::new(-s, 0.0),
        C64::new(s, 0.0),
        C64::new(c, 0.0),
    );
    rz(angles[2]) * ry * rz(angles[0])
}

/// Bloch vector `n` of the measured observable `U†σ_zU = n·σ`; outcome 0 is
/// the `+1` eigenvalue.
pub fn measurement_axis(angles: Angles) -> [f64; 3] {
    let (s1, c1) = angles[0].sin_cos();
    let (s2, c2) = angles[1].sin_cos();
    [-s2 * c1, s2 * s1, c2]
}

/// Angles whose measured observable is `axis·σ` (`axis` need not be
/// normalized but must be nonzero).
pub fn angles_for_axis(axis: [f64; 3]) -> Angles {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let z = (axis[2] / norm).clamp(-1.0, 1.0);
    [axis[1].atan2(-axis[0]), z.acos(), 0.0]
}

/// Per-qubit measurement angles, indexed by qubit id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSettings {
    angles: Vec<Angles>,
}

impl MeasurementSettings {
    pub fn new(angles: Vec<Angles>) -> Result<Self, SimError> {
        if angles.iter().flatten().any(|a| !a.is_finite()) {
            return Err(SimError::ParameterOutOfRange {
                name: "angle",
                value: f64::NAN,
            });
        }
        Ok(Self { angles })
    }

    pub fn uniform(n_qubits: usize, angles: Angles) -> Self {
        Self {
            angles: vec![angles; n_qubits],
        }
    }

    pub fn computational(n_qubits: usize) -> Self {
        Self::uniform(n_qubits, SIGMA_Z)
    }

    /// Independent uniform angles on `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Self {
        let tau = std::f64::consts::TAU;
        Self {
            angles: (0..n_qubits)
                .map(|_| [rng.random::<f64>() * tau, rng.random::<f64>() * tau, rng.random::<f64>() * tau])
                .collect(),
        }
    }

    pub fn from_flat(values: &[f64]) -> Result<Self, SimError> {
        if values.len() % 3 != 0 {
            return Err(SimError::DimensionMismatch {
                expected: values.len().div_ceil(3) * 3,
                found: values.len(),
            });
        }
        Self::new(values.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.angles.iter().flatten().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self, qubit: usize) -> Angles {
        self.angles[qubit]
    }

    pub fn all(&self) -> &[Angles] {
        &self.angles
    }

    pub fn set(&mut self, qubit: usize, angles: Angles) {
        self.angles[qubit] = angles;
    }

    fn covers(&self, qubits: &[usize]) -> Result<(), SimError> {
        match qubits.iter().find(|&&q| q >= self.angles.len()) {
            Some(&q) => Err(SimError::SettingsMismatch {
                qubit: q,
                available: self.angles.len(),
            }),
            None => Ok(()),
        }
    }
}

/// How a distribution was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum OutcomeMode {
    Analytic { probabilities: Vec<f64> },
    Empirical { counts: Vec<u64>, shots: u64, seed: u64 },
}

/// Distribution over bitstrings of `n_bits` measured qubits. Bit `t` (the
/// `t`-th measured qubit) is bit `n_bits - 1 - t` of the outcome index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    n_bits: usize,
    #[serde(flatten)]
    mode: OutcomeMode,
}

impl OutcomeDistribution {
    pub fn analytic(probabilities: Vec<f64>) -> Result<Self, SimError> {
        let n = probabilities.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(SimError::DimensionMismatch {
                expected: n.max(1).next_power_of_two(),
                found: n,
            });
        }
        let sum: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > PHYSICAL_TOL {
            return Err(SimError::NonPhysicalState(format!(
                "probabilities must be nonnegative and sum to 1 (sum {sum})"
            )));
        }
        Ok(Self {
            n_bits: n.trailing_zeros() as usize,
            mode: OutcomeMode::Analytic { probabilities },
        })
    }

    pub fn empirical(counts: Vec<u64>, seed: u64) -> Result<Self, SimError> {
        let n = counts.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(SimError::DimensionMismatch {
                expected: n.max(1).next_power_of_two(),
                found: n,
            });
        }
        let shots = counts.iter().sum();
        Ok(Self {
            n_bits: n.trailing_zeros() as usize,
            mode: OutcomeMode::Empirical {
                counts,
                shots,
                seed,
            },
        })
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn len(&self) -> usize {
        1 << self.n_bits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mode(&self) -> &OutcomeMode {
        &self.mode
    }

    pub fn is_empirical(&self) -> bool {
        matches!(self.mode, OutcomeMode::Empirical { .. })
    }

    pub fn shots(&self) -> Option<u64> {
        match self.mode {
            OutcomeMode::Empirical { shots, .. } => Some(shots),
            OutcomeMode::Analytic { .. } => None,
        }
    }

    /// Probabilities, or relative frequencies for empirical data. Empty
    /// empirical data yields all zeros.
    pub fn probabilities(&self) -> Vec<f64> {
        match &self.mode {
            OutcomeMode::Analytic { probabilities } => probabilities.clone(),
            OutcomeMode::Empirical { counts, shots, .. } => {
                let total = (*shots).max(1) as f64;
                counts.iter().map(|&c| c as f64 / total).collect()
            }
        }
    }

    /// Marginal over the given bit positions, in the given order.
    pub fn marginal(&self, bits: &[usize]) -> Result<OutcomeDistribution, SimError> {
        for (i, &b) in bits.iter().enumerate() {
            if b >= self.n_bits {
                return Err(SimError::QubitIndexOutOfRange {
                    qubit: b,
                    n_qubits: self.n_bits,
                });
            }
            if bits[..i].contains(&b) {
                return Err(SimError::DuplicateQubit(b));
            }
        }
        let map = marginal_map(self.n_bits, bits);
        let size = 1usize << bits.len();
        let mode = match &self.mode {
            OutcomeMode::Analytic { probabilities } => {
                let mut out = vec![0.0; size];
                for (i, p) in probabilities.iter().enumerate() {
                    out[map[i]] += p;
                }
                OutcomeMode::Analytic { probabilities: out }
            }
            OutcomeMode::Empirical {
                counts,
                shots,
                seed,
            } => {
                let mut out = vec![0u64; size];
                for (i, c) in counts.iter().enumerate() {
                    out[map[i]] += c;
                }
                OutcomeMode::Empirical {
                    counts: out,
                    shots: *shots,
                    seed: *seed,
                }
            }
        };
        Ok(OutcomeDistribution {
            n_bits: bits.len(),
            mode,
        })
    }
}

/// Maps each full outcome index to its marginal index over `bits`.
pub(crate) fn marginal_map(n_bits: usize, bits: &[usize]) -> Vec<usize> {
    let m = bits.len();
    (0..1usize << n_bits)
        .map(|i| {
            bits.iter().enumerate().fold(0usize, |acc, (t, &b)| {
                let bit = (i >> (n_bits - 1 - b)) & 1;
                acc | (bit << (m - 1 - t))
            })
        })
        .collect()
}

/// Draws a multinomial sample of `shots` outcomes. Reproducible for a fixed
/// seed: categories are visited in index order and each count is a
/// conditional binomial draw from a ChaCha8 stream.
pub fn sample_outcomes(dist: &OutcomeDistribution, shots: u64, seed: u64) -> OutcomeDistribution {
    let probs = dist.probabilities();
    let counts = multinomial(&probs, shots, seed);
    OutcomeDistribution {
        n_bits: dist.n_bits,
        mode: OutcomeMode::Empirical {
            counts,
            shots,
            seed,
        },
    }
}

fn multinomial(probs: &[f64], shots: u64, seed: u64) -> Vec<u64> {
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0u64; probs.len()];
    let Some(last) = probs.iter().rposition(|&p| p > 0.0) else {
        return counts;
    };
    let mut remaining = shots;
    let mut rest = 1.0f64;
    for (i, &p) in probs.iter().enumerate().take(last + 1) {
        if remaining == 0 {
            break;
        }
        if i == last {
            counts[i] = remaining;
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let q = (p / rest).clamp(0.0, 1.0);
        let k = if q >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q)
                .expect("binomial parameters are valid")
                .sample(&mut rng)
        };
        counts[i] = k;
        remaining -= k;
        rest -= p;
    }
    counts
}

/// Exact (infinite-shot) or finite-shot evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotConfig {
    Analytic,
    Finite { shots: u64, seed: u64 },
}

impl ShotConfig {
    pub fn is_analytic(&self) -> bool {
        matches!(self, ShotConfig::Analytic)
    }

    /// Same shot count with a different seed.
    pub fn reseeded(self, seed: u64) -> Self {
        match self {
            ShotConfig::Analytic => ShotConfig::Analytic,
            ShotConfig::Finite { shots, .. } => ShotConfig::Finite { shots, seed },
        }
    }
}

/// Born-rule probabilities for measuring `measured` (in that bit order) with
/// the given settings; unmeasured qubits are traced out.
pub fn measurement_probabilities(
    state: &DensityMatrix,
    settings: &MeasurementSettings,
    measured: &[usize],
) -> Result<OutcomeDistribution, SimError> {
    let probs = probabilities_via_trace(state, settings, measured)?;
    OutcomeDistribution::analytic(normalize(probs))
}

fn normalize(mut probs: Vec<f64>) -> Vec<f64> {
    let sum: f64 = probs.iter().sum();
    if sum > 0.0 {
        probs.iter_mut().for_each(|p| *p /= sum);
    }
    probs
}

fn probabilities_via_trace(
    state: &DensityMatrix,
    settings: &MeasurementSettings,
    measured: &[usize],
) -> Result<Vec<f64>, SimError> {
    let reduced = state.partial_trace(measured)?;
    settings.covers(measured)?;
    let mut sorted = measured.to_vec();
    sorted.sort_unstable();
    let m = sorted.len();
    let mut data = reduced.into_matrix();
    for (pos, &q) in sorted.iter().enumerate() {
        let u = qubit_unitary(settings.angles(q));
        let op = DMatrix::from_column_slice(2, 2, u.as_slice());
        data = conjugate_local(&data, m, &[pos], &op);
    }
    let sorted_probs: Vec<f64> = (0..1usize << m).map(|i| data[(i, i)].re.max(0.0)).collect();
    if sorted.as_slice() == measured {
        return Ok(sorted_probs);
    }
    // reorder bits from ascending-id order into the requested order
    let positions: Vec<usize> = measured
        .iter()
        .map(|q| sorted.iter().position(|s| s == q).expect("present"))
        .collect();
    let map = marginal_map(m, &positions);
    let mut out = vec![0.0; 1 << m];
    for (i, p) in sorted_probs.into_iter().enumerate() {
        out[map[i]] = p;
    }
    Ok(out)
}

fn single_probs(rho: &Matrix2<C64>, angles: Angles) -> [f64; 2] {
    let u = qubit_unitary(angles);
    let r = u * rho * u.adjoint();
    let p0 = r[(0, 0)].re.max(0.0);
    let p1 = r[(1, 1)].re.max(0.0);
    let s = p0 + p1;
    [p0 / s, p1 / s]
}

fn pair_probs(rho: &Matrix4<C64>, a: Angles, b: Angles) -> [f64; 4] {
    let ua = qubit_unitary(a);
    let ub = qubit_unitary(b);
    let m: Matrix4<C64> = ua.kronecker(&ub);
    let r = m * rho * m.adjoint();
    let mut p = [0.0; 4];
    for (i, v) in p.iter_mut().enumerate() {
        *v = r[(i, i)].re.max(0.0);
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// A network state with cached one- and two-qubit marginals, so that local
/// measurement statistics on one or two qubits cost O(1) in the register size.
#[derive(Debug)]
pub struct MeasurementEngine {
    state: DensityMatrix,
    singles: Vec<Matrix2<C64>>,
    pairs: Vec<OnceLock<Matrix4<C64>>>,
}

impl MeasurementEngine {
    pub fn new(state: DensityMatrix) -> Self {
        let n = state.n_qubits();
        let singles = (0..n)
            .map(|q| {
                let r = state.partial_trace(&[q]).expect("valid qubit");
                Matrix2::from_fn(|i, j| r.matrix()[(i, j)])
            })
            .collect();
        let pairs = (0..n * n).map(|_| OnceLock::new()).collect();
        Self {
            state,
            singles,
            pairs,
        }
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn n_qubits(&self) -> usize {
        self.state.n_qubits()
    }

    pub fn single_marginal(&self, q: usize) -> &Matrix2<C64> {
        &self.singles[q]
    }

    /// Two-qubit reduced state with `i < j` (qubit `i` leading).
    pub fn pair_marginal(&self, i: usize, j: usize) -> &Matrix4<C64> {
        assert!(i < j && j < self.n_qubits(), "pair ({i}, {j}) out of order or range");
        self.pairs[i * self.n_qubits() + j].get_or_init(|| {
            let r = self.state.partial_trace(&[i, j]).expect("valid pair");
            Matrix4::from_fn(|a, b| r.matrix()[(a, b)])
        })
    }

    fn check(&self, qubits: &[usize], settings: &MeasurementSettings) -> Result<(), SimError> {
        if qubits.is_empty() {
            return Err(SimError::EmptySelection);
        }
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.n_qubits() {
                return Err(SimError::QubitIndexOutOfRange {
                    qubit: q,
                    n_qubits: self.n_qubits(),
                });
            }
            if qubits[..i].contains(&q) {
                return Err(SimError::DuplicateQubit(q));
            }
        }
        settings.covers(qubits)
    }

    /// Exact outcome probabilities over `qubits` in the given bit order.
    pub fn probabilities(&self, qubits: &[usize], settings: &MeasurementSettings) -> Result<Vec<f64>, SimError> {
        self.check(qubits, settings)?;
        Ok(match *qubits {
            [q] => single_probs(&self.singles[q], settings.angles(q)).to_vec(),
            [i, j] if i < j => {
                pair_probs(self.pair_marginal(i, j), settings.angles(i), settings.angles(j)).to_vec()
            }
            [i, j] => {
                let p = pair_probs(self.pair_marginal(j, i), settings.angles(j), settings.angles(i));
                vec![p[0], p[2], p[1], p[3]]
            }
            _ => normalize(probabilities_via_trace(&self.state, settings, qubits)?),
        })
    }

    pub fn distribution(
        &self,
        qubits: &[usize],
        settings: &MeasurementSettings,
        shots: ShotConfig,
    ) -> Result<OutcomeDistribution, SimError> {
        let probs = self.probabilities(qubits, settings)?;
        let dist = OutcomeDistribution {
            n_bits: qubits.len(),
            mode: OutcomeMode::Analytic {
                probabilities: probs,
            },
        };
        Ok(match shots {
            ShotConfig::Analytic => dist,
            ShotConfig::Finite { shots, seed } => sample_outcomes(&dist, shots, seed),
        })
    }
}
