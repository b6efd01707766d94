//! Closed-form values for benchmark states and noise models, in bits.

/// `x log₂ x` with the `0 log 0 = 0` convention.
pub fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Binary entropy `h(p)`.
pub fn binary_entropy(p: f64) -> f64 {
    -xlog2x(p) - xlog2x(1.0 - p)
}

/// Best computational-basis MI of a Bell pair after per-qubit depolarizing
/// noise of strength `gamma` on both qubits.
pub fn depolarized_bell_mi(gamma: f64) -> f64 {
    let a = (1.0 + (1.0 - gamma).powi(2)) / 2.0;
    1.0 + xlog2x(a) + xlog2x(1.0 - a)
}

/// Covariance of the same setup.
pub fn depolarized_bell_cov(gamma: f64) -> f64 {
    (1.0 - gamma).powi(2)
}

/// σ_x-basis MI of a Bell pair after amplitude damping on both qubits.
pub fn amplitude_damped_bell_mi(gamma: f64) -> f64 {
    (2.0 - gamma) / 2.0 * (2.0 - gamma).log2() + if gamma > 0.0 { gamma / 2.0 * gamma.log2() } else { 0.0 }
}

pub fn amplitude_damped_bell_cov(gamma: f64) -> f64 {
    1.0 - gamma
}

/// Pairwise MI of a Bell source depolarized jointly with strength `gamma`:
/// `(2−γ)/2·log₂(2−γ) + γ/2·log₂γ`. This is the per-source information
/// unit `I(γ)` used for count recovery.
pub fn source_depolarized_pair_mi(gamma: f64) -> f64 {
    amplitude_damped_bell_mi(gamma)
}

/// Node-pair MI in the triangle of three Bell sources (one shared source
/// per node pair) under joint source depolarizing.
pub fn triangle_bell_mi(gamma: f64) -> f64 {
    source_depolarized_pair_mi(gamma)
}

/// Node-pair MI in the triangle of two GHZ₃ sources (two shared sources
/// per node pair) under joint source depolarizing.
pub fn triangle_ghz_mi(gamma: f64) -> f64 {
    2.0 * source_depolarized_pair_mi(gamma)
}

/// Von Neumann entropy of a single-qubit marginal of `W_n`.
pub fn w_marginal_entropy(n: usize) -> f64 {
    binary_entropy(1.0 / n as f64)
}

/// Largest measured MI between two qubits of `W_n`, reached in a shared
/// equatorial basis. Exact for `n = 3` where the maximum sits at σ_x ⊗ σ_x.
pub fn w_pair_equatorial_mi(n: usize) -> f64 {
    // reduced pair state: (n-2)/n |00⟩⟨00| + 2/n |Ψ⁺⟩⟨Ψ⁺|
    let nf = n as f64;
    let c = 2.0 / nf;
    // σ_x ⊗ σ_x outcomes: p(same) = (1 + c)/2, marginals uniform
    1.0 - binary_entropy((1.0 + c) / 2.0)
}
