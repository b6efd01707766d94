//! Experimental node-level decoding by exhaustive search.

use super::InferError;
use crate::netmodel::NetworkTopology;
use crate::quantify::CorrelationMatrix;

pub const EXHAUSTIVE_MAX_QUBITS: usize = 6;

/// Every labelled topology with at most `max_qubits` qubits whose GHZ
/// characteristic matrix equals `target` within `tol`.
///
/// Sources are node subsets of size two or more (a one-qubit source leaves
/// no trace in the matrix); a node with zero entropy receives a single
/// one-qubit source so that every node holds a qubit. The number of sources
/// is not determined by the matrix in general, so several answers may come
/// back. Experimental.
pub fn node_topologies_matching(
    target: &CorrelationMatrix,
    tol: f64,
    max_qubits: usize,
) -> Result<Vec<NetworkTopology>, InferError> {
    if max_qubits > EXHAUSTIVE_MAX_QUBITS {
        return Err(InferError::SearchTooLarge {
            found: max_qubits,
            limit: EXHAUSTIVE_MAX_QUBITS,
        });
    }
    let m = target.size();
    let empty: Vec<usize> = (0..m).filter(|&i| target.get(i, i) <= tol).collect();
    let budget = max_qubits.saturating_sub(empty.len());
    let edges: Vec<Vec<usize>> = (1u32..(1 << m))
        .filter(|mask| mask.count_ones() >= 2)
        .map(|mask| (0..m).filter(|&i| mask & (1 << i) != 0).collect())
        .collect();
    let mut counts = vec![vec![0.0; m]; m];
    let mut chosen = Vec::new();
    let mut found = Vec::new();
    search(target, tol, &edges, 0, budget, &mut counts, &mut chosen, &mut found);
    found
        .into_iter()
        .map(|sources| build(m, &sources, &empty))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn search(
    target: &CorrelationMatrix,
    tol: f64,
    edges: &[Vec<usize>],
    from: usize,
    budget: usize,
    counts: &mut [Vec<f64>],
    chosen: &mut Vec<usize>,
    found: &mut Vec<Vec<Vec<usize>>>,
) {
    let m = target.size();
    let matches = (0..m).all(|i| (0..m).all(|j| (counts[i][j] - target.get(i, j)).abs() <= tol));
    if matches {
        found.push(chosen.iter().map(|&e| edges[e].clone()).collect());
    }
    for e in from..edges.len() {
        let set = &edges[e];
        if set.len() > budget {
            continue;
        }
        let fits = set
            .iter()
            .all(|&i| set.iter().all(|&j| counts[i][j] + 1.0 <= target.get(i, j) + tol));
        if !fits {
            continue;
        }
        for &i in set {
            for &j in set {
                counts[i][j] += 1.0;
            }
        }
        chosen.push(e);
        search(target, tol, edges, e, budget - set.len(), counts, chosen, found);
        chosen.pop();
        for &i in set {
            for &j in set {
                counts[i][j] -= 1.0;
            }
        }
    }
}

fn build(m: usize, sources: &[Vec<usize>], empty: &[usize]) -> Result<NetworkTopology, InferError> {
    let mut node_of = Vec::new();
    let mut qubit_sources = Vec::new();
    for set in sources.iter().map(Vec::as_slice).chain(empty.iter().map(std::slice::from_ref)) {
        let start = node_of.len();
        node_of.extend_from_slice(set);
        qubit_sources.push((start..node_of.len()).collect());
    }
    debug_assert!((0..m).all(|n| node_of.contains(&n)));
    Ok(NetworkTopology::from_assignment(qubit_sources, &node_of)?)
}
