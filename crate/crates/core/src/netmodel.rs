//! Source/node network topologies over qubits.
//!
//! A topology is a pair of partitions of the qubit set: one into sources
//! (which qubits are prepared together) and one into measurement nodes
//! (which qubits are measured together). Each qubit is one link.

use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantify::{CorrelationMatrix, MatrixKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QubitId(pub usize);

impl From<usize> for QubitId {
    fn from(v: usize) -> Self {
        QubitId(v)
    }
}

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartKind {
    Source,
    Node,
}

impl fmt::Display for PartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartKind::Source => "source",
            PartKind::Node => "node",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("network has no qubits")]
    NoQubits,
    #[error("qubit {qubit} is not assigned to any {part}")]
    QubitUnassigned { qubit: usize, part: PartKind },
    #[error("qubit {qubit} is assigned to more than one {part}")]
    QubitMultiplyAssigned { qubit: usize, part: PartKind },
    #[error("{part} {index} is empty")]
    EmptyPart { part: PartKind, index: usize },
    #[error("qubit {qubit} is out of range for {n_qubits} qubits")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("source {source_index} sends {count} qubits to node {node}")]
    AssumptionViolated {
        source_index: usize,
        node: usize,
        count: usize,
    },
}

/// A source delivering more than one qubit to the same node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssumptionWarning {
    pub source: usize,
    pub node: usize,
    pub qubits: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TopologySpec", into = "TopologySpec")]
pub struct NetworkTopology {
    n_qubits: usize,
    sources: Vec<Vec<usize>>,
    nodes: Vec<Vec<usize>>,
    source_of: Vec<usize>,
    node_of: Vec<usize>,
}

/// Serialized form: `{"qubits": N, "sources": [[..]..], "nodes": [[..]..]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub qubits: usize,
    pub sources: Vec<Vec<usize>>,
    pub nodes: Vec<Vec<usize>>,
}

impl TryFrom<TopologySpec> for NetworkTopology {
    type Error = TopologyError;

    fn try_from(spec: TopologySpec) -> Result<Self, Self::Error> {
        NetworkTopology::new(spec.qubits, spec.sources, spec.nodes)
    }
}

impl From<NetworkTopology> for TopologySpec {
    fn from(t: NetworkTopology) -> Self {
        TopologySpec {
            qubits: t.n_qubits,
            sources: t.sources,
            nodes: t.nodes,
        }
    }
}

fn owner_map(n_qubits: usize, parts: &[Vec<usize>], part: PartKind) -> Result<Vec<usize>, TopologyError> {
    let mut owner = vec![usize::MAX; n_qubits];
    for (index, set) in parts.iter().enumerate() {
        if set.is_empty() {
            return Err(TopologyError::EmptyPart { part, index });
        }
        for &q in set {
            if q >= n_qubits {
                return Err(TopologyError::QubitOutOfRange { qubit: q, n_qubits });
            }
            if owner[q] != usize::MAX {
                return Err(TopologyError::QubitMultiplyAssigned { qubit: q, part });
            }
            owner[q] = index;
        }
    }
    if let Some(q) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(TopologyError::QubitUnassigned { qubit: q, part });
    }
    Ok(owner)
}

impl NetworkTopology {
    /// Validates that sources and nodes each partition `0..n_qubits` into
    /// non-empty sets. Qubit order inside a source fixes which tensor factor
    /// of the source state each qubit carries.
    pub fn new(n_qubits: usize, sources: Vec<Vec<usize>>, nodes: Vec<Vec<usize>>) -> Result<Self, TopologyError> {
        if n_qubits == 0 {
            return Err(TopologyError::NoQubits);
        }
        let source_of = owner_map(n_qubits, &sources, PartKind::Source)?;
        let node_of = owner_map(n_qubits, &nodes, PartKind::Node)?;
        Ok(Self {
            n_qubits,
            sources,
            nodes,
            source_of,
            node_of,
        })
    }

    /// Builds the node sets from a per-qubit node index.
    pub fn from_assignment(sources: Vec<Vec<usize>>, node_of: &[usize]) -> Result<Self, TopologyError> {
        let n_nodes = node_of.iter().max().map_or(0, |m| m + 1);
        let mut nodes = vec![Vec::new(); n_nodes];
        for (q, &n) in node_of.iter().enumerate() {
            nodes[n].push(q);
        }
        Self::new(node_of.len(), sources, nodes)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn sources(&self) -> &[Vec<usize>] {
        &self.sources
    }

    pub fn nodes(&self) -> &[Vec<usize>] {
        &self.nodes
    }

    pub fn source_of(&self, q: QubitId) -> usize {
        self.source_of[q.0]
    }

    pub fn node_of(&self, q: QubitId) -> usize {
        self.node_of[q.0]
    }

    pub fn node_assignment(&self) -> &[usize] {
        &self.node_of
    }

    /// Links as `(source, node)` pairs, one per qubit.
    pub fn links(&self) -> Vec<(usize, usize)> {
        (0..self.n_qubits).map(|q| (self.source_of[q], self.node_of[q])).collect()
    }

    /// `w[s][n]`: number of qubits source `s` sends to node `n`.
    pub fn link_weights(&self) -> Vec<Vec<usize>> {
        let mut w = vec![vec![0; self.nodes.len()]; self.sources.len()];
        for q in 0..self.n_qubits {
            w[self.source_of[q]][self.node_of[q]] += 1;
        }
        w
    }

    /// Sources that send more than one qubit to a single node.
    pub fn assumption_violations(&self) -> Vec<AssumptionWarning> {
        let mut out = Vec::new();
        for (s, set) in self.sources.iter().enumerate() {
            for n in 0..self.nodes.len() {
                let qubits: Vec<usize> = set.iter().copied().filter(|&q| self.node_of[q] == n).collect();
                if qubits.len() > 1 {
                    out.push(AssumptionWarning { source: s, node: n, qubits });
                }
            }
        }
        out
    }

    pub fn ground_truth_counts(&self) -> GroundTruthCounts {
        let w = self.link_weights();
        let m = self.nodes.len();
        let mut shared = vec![vec![0; m]; m];
        for row in &w {
            for i in 0..m {
                for j in 0..m {
                    if row[i] > 0 && row[j] > 0 {
                        shared[i][j] += 1;
                    }
                }
            }
        }
        GroundTruthCounts {
            per_node_sources: (0..m).map(|i| shared[i][i]).collect(),
            shared_sources: shared,
        }
    }

    /// Node-level characteristic matrix for GHZ sources: node entropies on
    /// the diagonal and shared-source counts off it. Single-qubit sources
    /// emit pure states and contribute nothing.
    pub fn expected_characteristic_matrix(&self) -> Result<CorrelationMatrix, TopologyError> {
        if let Some(v) = self.assumption_violations().first() {
            return Err(TopologyError::AssumptionViolated {
                source_index: v.source,
                node: v.node,
                count: v.qubits.len(),
            });
        }
        let m = self.nodes.len();
        let mut rows = vec![vec![0.0; m]; m];
        for (s, row) in self.link_weights().iter().enumerate() {
            if self.sources[s].len() < 2 {
                continue;
            }
            for i in 0..m {
                for j in 0..m {
                    if row[i] > 0 && row[j] > 0 {
                        rows[i][j] += 1.0;
                    }
                }
            }
        }
        Ok(CorrelationMatrix::from_rows(MatrixKind::Characteristic, rows).expect("counts form a valid matrix"))
    }

    /// Qubit-level binary matrix: `1` between distinct qubits of one source,
    /// and on the diagonal of qubits whose source has at least two qubits.
    pub fn expected_binary_matrix(&self) -> CorrelationMatrix {
        let n = self.n_qubits;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let s = self.source_of[i];
                if s == self.source_of[j] && self.sources[s].len() > 1 {
                    entries[i * n + j] = 1.0;
                }
            }
        }
        CorrelationMatrix::from_flat(MatrixKind::Binary, n, entries).expect("valid binary matrix")
    }

    /// Copy with sources and nodes reordered: new source `k` is old source
    /// `source_perm[k]`, likewise for nodes.
    pub fn relabeled(&self, source_perm: &[usize], node_perm: &[usize]) -> Result<Self, TopologyError> {
        Self::new(
            self.n_qubits,
            source_perm.iter().map(|&s| self.sources[s].clone()).collect(),
            node_perm.iter().map(|&n| self.nodes[n].clone()).collect(),
        )
    }

    /// Copy with qubit ids renamed by `qubit_perm[old] = new`.
    pub fn with_qubit_ids(&self, qubit_perm: &[usize]) -> Result<Self, TopologyError> {
        let rename = |sets: &[Vec<usize>]| -> Vec<Vec<usize>> {
            sets.iter().map(|s| s.iter().map(|&q| qubit_perm[q]).collect()).collect()
        };
        Self::new(self.n_qubits, rename(&self.sources), rename(&self.nodes))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthCounts {
    pub per_node_sources: Vec<usize>,
    pub shared_sources: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mismatch {
    SizeMismatch {
        sources: (usize, usize),
        nodes: (usize, usize),
        qubits: (usize, usize),
    },
    NoBijection,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mismatch::SizeMismatch { sources, nodes, qubits } => write!(
                f,
                "size mismatch: sources {} vs {}, nodes {} vs {}, qubits {} vs {}",
                sources.0, sources.1, nodes.0, nodes.1, qubits.0, qubits.1
            ),
            Mismatch::NoBijection => f.write_str("no source/node bijection preserves the links"),
        }
    }
}

/// Source and node bijections mapping `a` onto `b`: source `s` of `a` is
/// source `sources[s]` of `b`, likewise for nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Isomorphism {
    pub sources: Vec<usize>,
    pub nodes: Vec<usize>,
}

/// Searches for bijections of source and node indices under which the link
/// multisets coincide.
pub fn find_isomorphism(a: &NetworkTopology, b: &NetworkTopology) -> Result<Isomorphism, Mismatch> {
    if a.n_sources() != b.n_sources() || a.n_nodes() != b.n_nodes() || a.n_qubits() != b.n_qubits() {
        return Err(Mismatch::SizeMismatch {
            sources: (a.n_sources(), b.n_sources()),
            nodes: (a.n_nodes(), b.n_nodes()),
            qubits: (a.n_qubits(), b.n_qubits()),
        });
    }
    let wa = a.link_weights();
    let wb = b.link_weights();
    let sorted = |mut v: Vec<usize>| {
        v.sort_unstable();
        v
    };
    let row_sig = |w: &[Vec<usize>]| sorted_rows(w.iter().map(|r| sorted(r.clone())).collect());
    let col = |w: &[Vec<usize>], n: usize| sorted(w.iter().map(|r| r[n]).collect());
    if row_sig(&wa) != row_sig(&wb) {
        return Err(Mismatch::NoBijection);
    }
    let m = a.n_nodes();
    let col_a: Vec<Vec<usize>> = (0..m).map(|n| col(&wa, n)).collect();
    let col_b: Vec<Vec<usize>> = (0..m).map(|n| col(&wb, n)).collect();
    if sorted_rows(col_a.clone()) != sorted_rows(col_b.clone()) {
        return Err(Mismatch::NoBijection);
    }
    let mut node_map = vec![usize::MAX; m];
    let mut used = vec![false; m];
    if assign_nodes(0, &wa, &wb, &col_a, &col_b, &mut node_map, &mut used) {
        let sources = match_rows(&wa, &wb, &node_map).expect("complete assignment matches");
        Ok(Isomorphism { sources, nodes: node_map })
    } else {
        Err(Mismatch::NoBijection)
    }
}

pub fn same_topology(a: &NetworkTopology, b: &NetworkTopology) -> bool {
    find_isomorphism(a, b).is_ok()
}

fn sorted_rows(mut rows: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    rows.sort_unstable();
    rows
}

/// Rows of `wa` restricted to the first `k` assigned nodes, mapped through
/// `node_map`, must form the same multiset as the corresponding rows of `wb`.
fn prefix_rows_match(wa: &[Vec<usize>], wb: &[Vec<usize>], node_map: &[usize], k: usize) -> bool {
    let ra = sorted_rows(wa.iter().map(|r| r[..k].to_vec()).collect());
    let rb = sorted_rows(wb.iter().map(|r| node_map[..k].iter().map(|&n| r[n]).collect()).collect());
    ra == rb
}

fn assign_nodes(
    k: usize,
    wa: &[Vec<usize>],
    wb: &[Vec<usize>],
    col_a: &[Vec<usize>],
    col_b: &[Vec<usize>],
    node_map: &mut [usize],
    used: &mut [bool],
) -> bool {
    let m = node_map.len();
    if k == m {
        return true;
    }
    for cand in 0..m {
        if used[cand] || col_a[k] != col_b[cand] {
            continue;
        }
        node_map[k] = cand;
        used[cand] = true;
        if prefix_rows_match(wa, wb, node_map, k + 1) && assign_nodes(k + 1, wa, wb, col_a, col_b, node_map, used) {
            return true;
        }
        used[cand] = false;
    }
    node_map[k] = usize::MAX;
    false
}

fn match_rows(wa: &[Vec<usize>], wb: &[Vec<usize>], node_map: &[usize]) -> Option<Vec<usize>> {
    let mut taken = vec![false; wb.len()];
    let mut out = Vec::with_capacity(wa.len());
    for row in wa {
        let hit = (0..wb.len()).find(|&t| !taken[t] && node_map.iter().enumerate().all(|(n, &nb)| row[n] == wb[t][nb]))?;
        taken[hit] = true;
        out.push(hit);
    }
    Some(out)
}

/// Parameters for drawing random topologies.
#[derive(Clone, Debug, PartialEq)]
pub struct TopologySampler {
    pub min_qubits: usize,
    pub max_qubits: usize,
    pub min_source_size: usize,
    pub max_sources: usize,
    pub max_nodes: usize,
    /// Forbid a source from sending two qubits to the same node.
    pub one_qubit_per_node: bool,
}

impl Default for TopologySampler {
    fn default() -> Self {
        Self {
            min_qubits: 1,
            max_qubits: 8,
            min_source_size: 1,
            max_sources: 8,
            max_nodes: 8,
            one_qubit_per_node: false,
        }
    }
}

impl TopologySampler {
    /// Draws a topology by rejection; panics if the parameters admit none.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> NetworkTopology {
        assert!(self.min_source_size >= 1 && self.min_qubits >= self.min_source_size);
        assert!(self.max_qubits >= self.min_qubits && self.max_sources >= 1 && self.max_nodes >= 1);
        for _ in 0..10_000 {
            let nq = rng.random_range(self.min_qubits..=self.max_qubits);
            let max_s = (nq / self.min_source_size).min(self.max_sources);
            if max_s == 0 {
                continue;
            }
            let ns = rng.random_range(1..=max_s);
            let mut qubits: Vec<usize> = (0..nq).collect();
            qubits.shuffle(rng);
            let k = self.min_source_size;
            let mut sources: Vec<Vec<usize>> = (0..ns).map(|s| qubits[s * k..(s + 1) * k].to_vec()).collect();
            for &q in &qubits[ns * k..] {
                let s = rng.random_range(0..ns);
                sources[s].push(q);
            }
            let largest = sources.iter().map(Vec::len).max().unwrap_or(1);
            let lo = if self.one_qubit_per_node { largest } else { 1 };
            let hi = self.max_nodes.min(nq);
            if lo > hi {
                continue;
            }
            let nm = rng.random_range(lo..=hi);
            let node_ids: Vec<usize> = (0..nm).collect();
            let mut node_of = vec![0; nq];
            for set in &sources {
                if self.one_qubit_per_node {
                    let picks: Vec<usize> = node_ids.choose_multiple(rng, set.len()).copied().collect();
                    for (&q, n) in set.iter().zip(picks) {
                        node_of[q] = n;
                    }
                } else {
                    for &q in set {
                        node_of[q] = rng.random_range(0..nm);
                    }
                }
            }
            if let Ok(t) = NetworkTopology::from_assignment(sources, &node_of) {
                if t.n_nodes() == nm {
                    return t;
                }
            }
        }
        panic!("sampler parameters admit no topology: {self:?}");
    }
}
