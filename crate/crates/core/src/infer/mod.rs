//! Topology decoding from correlation matrices and the end-to-end pipeline.

mod exhaustive;
mod pipeline;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{NetworkTopology, PartKind, TopologyError};
use crate::quantify::{theory, CorrelationMatrix, MatrixKind, QuantError, Threshold};
use crate::simcore::SimError;
use crate::varopt::OptError;

pub use exhaustive::{node_topologies_matching, EXHAUSTIVE_MAX_QUBITS};
pub use pipeline::{
    ideal_characteristic_matrix, ideal_covariance_matrix, infer_pipeline, measure_correlations, CorrelationRun,
    InferenceMethod, LabeledReport, NetworkExperiment, PipelineConfig,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferError {
    #[error("inconsistent correlation structure: B[{0}][{1}] = B[{1}][{2}] = 1 but B[{0}][{2}] = 0", .triple.0, .triple.1, .triple.2)]
    InconsistentCorrelationStructure { triple: (usize, usize, usize) },
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("expected a {expected} matrix, found {found}")]
    KindMismatch { expected: MatrixKind, found: MatrixKind },
    #[error("noise strength {0} is outside [0, 1)")]
    InvalidNoise(f64),
    #[error("pair information vanishes at gamma = {0}; counts cannot be recovered")]
    FullyDepolarized(f64),
    #[error("{found} qubits exceeds the exhaustive search limit of {limit}")]
    SearchTooLarge { found: usize, limit: usize },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Opt(#[from] OptError),
}

/// Node id of every qubit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct QubitNodeAssignment(Vec<usize>);

impl QubitNodeAssignment {
    /// Node ids must cover `0..m` with every node receiving a qubit.
    pub fn new(node_of: Vec<usize>) -> Result<Self, TopologyError> {
        if node_of.is_empty() {
            return Err(TopologyError::NoQubits);
        }
        let m = node_of.iter().max().map_or(0, |&x| x + 1);
        let mut used = vec![false; m];
        node_of.iter().for_each(|&n| used[n] = true);
        if let Some(index) = used.iter().position(|&u| !u) {
            return Err(TopologyError::EmptyPart { part: PartKind::Node, index });
        }
        Ok(Self(node_of))
    }

    /// One node per qubit.
    pub fn per_qubit(n_qubits: usize) -> Self {
        Self((0..n_qubits).collect())
    }

    pub fn from_topology(topology: &NetworkTopology) -> Self {
        Self(topology.node_assignment().to_vec())
    }

    pub fn n_qubits(&self) -> usize {
        self.0.len()
    }

    pub fn node_of(&self, q: usize) -> usize {
        self.0[q]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl TryFrom<Vec<usize>> for QubitNodeAssignment {
    type Error = TopologyError;

    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<QubitNodeAssignment> for Vec<usize> {
    fn from(a: QubitNodeAssignment) -> Self {
        a.0
    }
}

/// A decoded topology with the binary matrix it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ResultJson", into = "ResultJson")]
pub struct InferenceResult {
    pub topology: NetworkTopology,
    pub binary_matrix: CorrelationMatrix,
    /// Threshold used for binarization, if decoding started from a
    /// continuous matrix.
    pub threshold: Option<f64>,
    /// Signed margins `C[i][j] − τ` over the upper triangle, row-major.
    pub residuals: Vec<f64>,
}

impl InferenceResult {
    pub fn n_sources(&self) -> usize {
        self.topology.n_sources()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct ResultJson {
    threshold: Option<f64>,
    n_sources: usize,
    sources: Vec<Vec<usize>>,
    nodes: Vec<Vec<usize>>,
    binary_matrix: CorrelationMatrix,
    residuals: Vec<f64>,
}

impl From<InferenceResult> for ResultJson {
    fn from(r: InferenceResult) -> Self {
        ResultJson {
            threshold: r.threshold,
            n_sources: r.topology.n_sources(),
            sources: r.topology.sources().to_vec(),
            nodes: r.topology.nodes().to_vec(),
            binary_matrix: r.binary_matrix,
            residuals: r.residuals,
        }
    }
}

impl TryFrom<ResultJson> for InferenceResult {
    type Error = String;

    fn try_from(j: ResultJson) -> Result<Self, Self::Error> {
        let topology =
            NetworkTopology::new(j.binary_matrix.size(), j.sources, j.nodes).map_err(|e| e.to_string())?;
        if topology.n_sources() != j.n_sources {
            return Err(format!("n_sources is {} but {} sources are listed", j.n_sources, topology.n_sources()));
        }
        Ok(InferenceResult {
            topology,
            binary_matrix: j.binary_matrix,
            threshold: j.threshold,
            residuals: j.residuals,
        })
    }
}

/// Groups qubits into sources by their off-diagonal correlation pattern.
///
/// Each qubit's closed neighbourhood (itself plus every `j` with `B[i][j] = 1`)
/// must coincide with that of each neighbour; groups are then the distinct
/// neighbourhoods and isolated qubits become one-qubit sources. The diagonal
/// is not consulted.
pub fn decode_topology(
    binary: &CorrelationMatrix,
    assignment: &QubitNodeAssignment,
) -> Result<InferenceResult, InferError> {
    if binary.kind() != MatrixKind::Binary {
        return Err(InferError::KindMismatch {
            expected: MatrixKind::Binary,
            found: binary.kind(),
        });
    }
    let n = binary.size();
    if assignment.n_qubits() != n {
        return Err(InferError::SizeMismatch {
            expected: n,
            found: assignment.n_qubits(),
        });
    }
    let hood: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| j == i || binary.get(i, j) > 0.5).collect())
        .collect();
    for i in 0..n {
        for &j in &hood[i] {
            if hood[j] == hood[i] {
                continue;
            }
            let triple = match hood[j].iter().find(|k| !hood[i].contains(k)) {
                Some(&k) => (i, j, k),
                None => {
                    let k = *hood[i].iter().find(|k| !hood[j].contains(k)).expect("neighbourhoods differ");
                    (j, i, k)
                }
            };
            return Err(InferError::InconsistentCorrelationStructure { triple });
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, h) in hood.iter().enumerate() {
        groups.entry(h[0]).or_default().push(i);
    }
    let sources: Vec<Vec<usize>> = groups.into_values().collect();
    let topology = NetworkTopology::from_assignment(sources, assignment.as_slice())?;
    Ok(InferenceResult {
        topology,
        binary_matrix: binary.clone(),
        threshold: None,
        residuals: Vec::new(),
    })
}

/// Binarizes a continuous qubit matrix at `threshold` and decodes it.
pub fn decode_correlations(
    matrix: &CorrelationMatrix,
    threshold: Threshold,
    assignment: &QubitNodeAssignment,
) -> Result<InferenceResult, InferError> {
    let binary = matrix.binarize(threshold);
    let mut result = decode_topology(&binary, assignment)?;
    let n = matrix.size();
    result.threshold = Some(threshold.value());
    result.residuals = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| matrix.get(i, j) - threshold.value())
        .collect();
    Ok(result)
}

/// Permutation `p` with `b[p[i]][p[j]] ≈ a[i][j]` for all entries, if any.
///
/// Backtracking over rows of `a`; a candidate row of `b` must have the same
/// diagonal and the same sorted off-diagonal multiset within `tol`, and must
/// agree with every row placed so far.
pub fn find_node_permutation(
    a: &CorrelationMatrix,
    b: &CorrelationMatrix,
    tol: f64,
) -> Result<Option<Vec<usize>>, InferError> {
    let n = a.size();
    if b.size() != n {
        return Err(InferError::SizeMismatch { expected: n, found: b.size() });
    }
    let sorted_off = |m: &CorrelationMatrix, i: usize| -> Vec<f64> {
        let mut r: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| m.get(i, j)).collect();
        r.sort_by(f64::total_cmp);
        r
    };
    let sa: Vec<Vec<f64>> = (0..n).map(|i| sorted_off(a, i)).collect();
    let sb: Vec<Vec<f64>> = (0..n).map(|i| sorted_off(b, i)).collect();
    let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(u, v)| (u - v).abs() <= tol);
    let candidates: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&k| (a.get(i, i) - b.get(k, k)).abs() <= tol && close(&sa[i], &sb[k]))
                .collect()
        })
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| candidates[i].len());
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn place(
        depth: usize,
        order: &[usize],
        candidates: &[Vec<usize>],
        a: &CorrelationMatrix,
        b: &CorrelationMatrix,
        tol: f64,
        perm: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        let Some(&i) = order.get(depth) else {
            return true;
        };
        for &k in &candidates[i] {
            if used[k] {
                continue;
            }
            let fits = order[..depth]
                .iter()
                .all(|&prev| (a.get(i, prev) - b.get(k, perm[prev])).abs() <= tol);
            if !fits {
                continue;
            }
            perm[i] = k;
            used[k] = true;
            if place(depth + 1, order, candidates, a, b, tol, perm, used) {
                return true;
            }
            used[k] = false;
        }
        perm[i] = usize::MAX;
        false
    }
    Ok(place(0, &order, &candidates, a, b, tol, &mut perm, &mut used).then_some(perm))
}

/// True when a simultaneous row/column permutation maps `a` onto `b`
/// entrywise within `tol`.
pub fn compare_node_matrices(a: &CorrelationMatrix, b: &CorrelationMatrix, tol: f64) -> Result<bool, InferError> {
    Ok(find_node_permutation(a, b, tol)?.is_some())
}

/// Residual above which a recovered count is flagged.
pub const COUNT_RESIDUAL_LIMIT: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecovery {
    /// Diagonal copied from the input, off-diagonals rounded counts.
    pub counts: CorrelationMatrix,
    /// Information carried by one shared source at this noise level.
    pub pair_information: f64,
    /// `|x / I(γ) − round(x / I(γ))|` over the upper triangle, row-major.
    pub residuals: Vec<f64>,
    /// Entries whose residual exceeds [`COUNT_RESIDUAL_LIMIT`].
    pub unreliable: Vec<(usize, usize)>,
}

/// Shared-source counts from a node-level MI matrix under depolarizing
/// noise of known strength `gamma` on every link.
pub fn recover_counts_known_noise(observed: &CorrelationMatrix, gamma: f64) -> Result<CountRecovery, InferError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(InferError::InvalidNoise(gamma));
    }
    let info = theory::source_depolarized_pair_mi(gamma);
    if info < 1e-12 {
        return Err(InferError::FullyDepolarized(gamma));
    }
    let n = observed.size();
    let mut rows = observed.rows();
    let mut residuals = Vec::new();
    let mut unreliable = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let x = observed.get(i, j) / info;
            let r = x.round();
            let res = (x - r).abs();
            residuals.push(res);
            if res > COUNT_RESIDUAL_LIMIT {
                unreliable.push((i, j));
            }
            rows[i][j] = r;
            rows[j][i] = r;
        }
    }
    Ok(CountRecovery {
        counts: CorrelationMatrix::from_rows(MatrixKind::Characteristic, rows)?,
        pair_information: info,
        residuals,
        unreliable,
    })
}
