//! Entropies, mutual information, covariances and correlation matrices.

mod matrix;
pub mod theory;

use std::collections::HashMap;

use thiserror::Error;

use crate::simcore::rng::derive_seed;
use crate::simcore::{
    sample_outcomes, Angles, DensityMatrix, MeasurementEngine, MeasurementSettings, OutcomeDistribution,
    ShotConfig, SimError,
};

pub use matrix::{CorrelationMatrix, MatrixKind, Threshold};

/// Eigenvalues below this are treated as exact zeros.
pub const EIGEN_CLAMP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error("distribution has no mass")]
    EmptyDistribution,
    #[error("invalid bipartition: {0}")]
    BadPartition(String),
    #[error("expected a distribution over {expected} bits, found {found}")]
    BadArity { expected: usize, found: usize },
    #[error("matrix sizes differ: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("matrix kinds differ: {left} vs {right}")]
    KindMismatch { left: MatrixKind, right: MatrixKind },
    #[error("matrix is not square ({rows} rows, row of length {cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("entry ({row}, {col}) = {value}: {reason}")]
    InvalidEntry {
        row: usize,
        col: usize,
        value: f64,
        reason: &'static str,
    },
    #[error("threshold must be finite and nonnegative, got {0}")]
    InvalidThreshold(f64),
    #[error("no settings supplied for qubit pair ({0}, {1})")]
    MissingPairSettings(usize, usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Shannon entropy in bits of a probability vector.
pub fn entropy_bits(probs: &[f64]) -> f64 {
    -probs.iter().map(|&p| theory::xlog2x(p)).sum::<f64>()
}

pub fn shannon_entropy(dist: &OutcomeDistribution) -> Result<f64, QuantError> {
    if dist.shots() == Some(0) {
        return Err(QuantError::EmptyDistribution);
    }
    Ok(entropy_bits(&dist.probabilities()))
}

pub fn von_neumann_entropy_exact(state: &DensityMatrix) -> Result<f64, QuantError> {
    state.check_physical()?;
    Ok(state
        .eigenvalues()
        .into_iter()
        .filter(|&l| l >= EIGEN_CLAMP)
        .map(|l| -theory::xlog2x(l))
        .sum())
}

/// `H(first) + H(second) − H(joint)` for a split of the measured bits.
pub fn mutual_information(
    joint: &OutcomeDistribution,
    first: &[usize],
    second: &[usize],
) -> Result<f64, QuantError> {
    let n = joint.n_bits();
    if n < 2 {
        return Err(QuantError::BadArity { expected: 2, found: n });
    }
    if first.is_empty() || second.is_empty() {
        return Err(QuantError::BadPartition("both groups must be non-empty".into()));
    }
    let mut seen = vec![false; n];
    for &b in first.iter().chain(second) {
        if b >= n || seen[b] {
            return Err(QuantError::BadPartition(format!("bit {b} is out of range or repeated")));
        }
        seen[b] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(QuantError::BadPartition("groups must cover every measured bit".into()));
    }
    let h = shannon_entropy(joint)?;
    let h1 = entropy_bits(&joint.marginal(first)?.probabilities());
    let h2 = entropy_bits(&joint.marginal(second)?.probabilities());
    Ok(h1 + h2 - h)
}

/// MI of a two-bit probability vector `(p00, p01, p10, p11)`.
pub fn pair_mutual_information(p: &[f64]) -> f64 {
    let m1 = [p[0] + p[1], p[2] + p[3]];
    let m2 = [p[0] + p[2], p[1] + p[3]];
    entropy_bits(&m1) + entropy_bits(&m2) - entropy_bits(p)
}

/// `E[x]` with outcome 0 ↦ +1 and 1 ↦ −1.
pub fn pm_expectation(p: &[f64]) -> f64 {
    p[0] - p[1]
}

/// `1 − E[x]²` for a single-bit distribution.
pub fn pm_variance(p: &[f64]) -> f64 {
    let e = pm_expectation(p);
    1.0 - e * e
}

/// `E[xy] − E[x]E[y]` for a two-bit probability vector.
pub fn pair_covariance(p: &[f64]) -> f64 {
    let exy = p[0] - p[1] - p[2] + p[3];
    let ex = p[0] + p[1] - p[2] - p[3];
    let ey = p[0] - p[1] + p[2] - p[3];
    exy - ex * ey
}

pub fn covariance(joint: &OutcomeDistribution) -> Result<f64, QuantError> {
    if joint.n_bits() != 2 {
        return Err(QuantError::BadArity {
            expected: 2,
            found: joint.n_bits(),
        });
    }
    if joint.shots() == Some(0) {
        return Err(QuantError::EmptyDistribution);
    }
    Ok(pair_covariance(&joint.probabilities()))
}

/// Per-pair measurement angles together with per-qubit angles for the
/// diagonal entries.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PairSettings {
    pub diagonal: Vec<Angles>,
    pairs: HashMap<(usize, usize), [Angles; 2]>,
}

impl PairSettings {
    pub fn new(diagonal: Vec<Angles>) -> Self {
        Self {
            diagonal,
            pairs: HashMap::new(),
        }
    }

    /// Records the angles used on `(i, j)`; `angles[0]` belongs to qubit `i`.
    pub fn insert(&mut self, i: usize, j: usize, angles: [Angles; 2]) {
        if i < j {
            self.pairs.insert((i, j), angles);
        } else {
            self.pairs.insert((j, i), [angles[1], angles[0]]);
        }
    }

    /// Angles for `(min, max)` of the pair, in that order.
    pub fn get(&self, i: usize, j: usize) -> Option<[Angles; 2]> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.pairs.get(&(a, b)).copied()
    }
}

/// How measurement bases are chosen across matrix entries.
#[derive(Clone, Debug, PartialEq)]
pub enum SettingsLayout {
    /// One basis per qubit for every entry.
    Shared(MeasurementSettings),
    /// Each pair (and each diagonal entry) has its own circuit.
    PerPair(PairSettings),
}

const DIAG_STREAM: u64 = 0;
const PAIR_STREAM: u64 = 1;
const JOINT_STREAM: u64 = 2;

/// Builds the characteristic or covariance matrix of all qubits.
///
/// With finite shots, a shared layout samples the full register once and
/// reads every entry from marginals; a per-pair layout samples each circuit
/// separately with seeds derived from the top-level seed.
pub fn assemble_qubit_matrix(
    engine: &MeasurementEngine,
    layout: &SettingsLayout,
    kind: MatrixKind,
    shots: ShotConfig,
) -> Result<CorrelationMatrix, QuantError> {
    if kind == MatrixKind::Binary {
        return Err(QuantError::KindMismatch {
            left: kind,
            right: MatrixKind::Characteristic,
        });
    }
    let n = engine.n_qubits();
    let diag_value = |p: &[f64]| match kind {
        MatrixKind::Characteristic => entropy_bits(p),
        _ => pm_variance(p),
    };
    let pair_value = |p: &[f64]| match kind {
        MatrixKind::Characteristic => pair_mutual_information(p),
        _ => pair_covariance(p).abs().min(1.0),
    };
    let mut out = CorrelationMatrix::zeros(kind, n);
    match layout {
        SettingsLayout::Shared(settings) => {
            if settings.len() < n {
                return Err(SimError::SettingsMismatch {
                    qubit: settings.len(),
                    available: settings.len(),
                }
                .into());
            }
            let all: Vec<usize> = (0..n).collect();
            let joint = match shots {
                ShotConfig::Analytic => None,
                ShotConfig::Finite { shots, seed } => {
                    let exact = OutcomeDistribution::analytic(engine.probabilities(&all, settings)?)?;
                    Some(sample_outcomes(&exact, shots, derive_seed(seed, &[JOINT_STREAM])))
                }
            };
            let probs = |bits: &[usize]| -> Result<Vec<f64>, QuantError> {
                Ok(match &joint {
                    None => engine.probabilities(bits, settings)?,
                    Some(j) => j.marginal(bits)?.probabilities(),
                })
            };
            for i in 0..n {
                out.set_sym(i, i, diag_value(&probs(&[i])?));
                for j in i + 1..n {
                    out.set_sym(i, j, pair_value(&probs(&[i, j])?));
                }
            }
        }
        SettingsLayout::PerPair(pairs) => {
            if pairs.diagonal.len() < n {
                return Err(SimError::SettingsMismatch {
                    qubit: pairs.diagonal.len(),
                    available: pairs.diagonal.len(),
                }
                .into());
            }
            let diag_settings = MeasurementSettings::new(pairs.diagonal.clone())?;
            for i in 0..n {
                let d = engine.distribution(
                    &[i],
                    &diag_settings,
                    shots.reseeded(stream_seed(shots, &[DIAG_STREAM, i as u64])),
                )?;
                out.set_sym(i, i, diag_value(&d.probabilities()));
                for j in i + 1..n {
                    let [a, b] = pairs.get(i, j).ok_or(QuantError::MissingPairSettings(i, j))?;
                    let mut s = MeasurementSettings::computational(n);
                    s.set(i, a);
                    s.set(j, b);
                    let d = engine.distribution(
                        &[i, j],
                        &s,
                        shots.reseeded(stream_seed(shots, &[PAIR_STREAM, i as u64, j as u64])),
                    )?;
                    out.set_sym(i, j, pair_value(&d.probabilities()));
                }
            }
        }
    }
    Ok(out)
}

/// Matrix read off a single joint distribution over all qubits, bit `q`
/// belonging to qubit `q`.
pub fn matrix_from_joint(joint: &OutcomeDistribution, kind: MatrixKind) -> Result<CorrelationMatrix, QuantError> {
    if kind == MatrixKind::Binary {
        return Err(QuantError::KindMismatch {
            left: kind,
            right: MatrixKind::Characteristic,
        });
    }
    let n = joint.n_bits();
    let mut out = CorrelationMatrix::zeros(kind, n);
    for i in 0..n {
        let p = joint.marginal(&[i])?.probabilities();
        out.set_sym(
            i,
            i,
            match kind {
                MatrixKind::Characteristic => entropy_bits(&p),
                _ => pm_variance(&p),
            },
        );
        for j in i + 1..n {
            let p = joint.marginal(&[i, j])?.probabilities();
            out.set_sym(
                i,
                j,
                match kind {
                    MatrixKind::Characteristic => pair_mutual_information(&p),
                    _ => pair_covariance(&p).abs().min(1.0),
                },
            );
        }
    }
    Ok(out)
}

fn stream_seed(shots: ShotConfig, path: &[u64]) -> u64 {
    match shots {
        ShotConfig::Analytic => 0,
        ShotConfig::Finite { seed, .. } => derive_seed(seed, path),
    }
}
