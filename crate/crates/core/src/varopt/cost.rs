use std::f64::consts::{FRAC_PI_2, LN_2};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::OptError;
use crate::quantify::{entropy_bits, pair_covariance, pair_mutual_information, pm_expectation, pm_variance};
use crate::simcore::rng::derive_seed;
use crate::simcore::{sample_outcomes, MeasurementEngine, MeasurementSettings, OutcomeDistribution, ShotConfig, SimError};

/// Probabilities below this are left out of entropy derivatives.
pub const PROB_FLOOR: f64 = 1e-12;

/// What to minimize. Every variant is written so that lower is better.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// `H(P(a_q|θ))`; its minimum is the von Neumann entropy of the qubit.
    VnEntropy(usize),
    /// `H(a_i, a_j) − H(a_i) − H(a_j)`, the negated measured MI.
    MeasuredMIPair(usize, usize),
    /// Sum of negated MIs over several pairs measured in one circuit.
    MeasuredMIPairs(Vec<(usize, usize)>),
    /// Negated sum of pairwise MIs under one shared basis for all listed qubits.
    ClassicalMINetwork(Vec<usize>),
    /// `−Σ C_ij²` over the covariance matrix of the listed qubits.
    CovarianceNorm(Vec<usize>),
}

/// One additive contribution to a cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CostTerm {
    Entropy(usize),
    NegMutualInformation(usize, usize),
    /// `−weight · Cov(i, j)²`
    NegCovarianceSq(usize, usize, f64),
    /// `−Var(q)²`
    NegVarianceSq(usize),
}

fn entropy_slope(p: f64) -> f64 {
    if p < PROB_FLOOR {
        0.0
    } else {
        -(p.log2() + 1.0 / LN_2)
    }
}

// (s_xy, s_x, s_y) for outcomes 00, 01, 10, 11
const PAIR_SIGNS: [(f64, f64, f64); 4] = [(1.0, 1.0, 1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0), (1.0, -1.0, -1.0)];

impl CostTerm {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            CostTerm::Entropy(q) | CostTerm::NegVarianceSq(q) => vec![q],
            CostTerm::NegMutualInformation(i, j) | CostTerm::NegCovarianceSq(i, j, _) => vec![i, j],
        }
    }

    fn involves(&self, q: usize) -> bool {
        match *self {
            CostTerm::Entropy(a) | CostTerm::NegVarianceSq(a) => a == q,
            CostTerm::NegMutualInformation(i, j) | CostTerm::NegCovarianceSq(i, j, _) => i == q || j == q,
        }
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        match *self {
            CostTerm::Entropy(_) => entropy_bits(p),
            CostTerm::NegMutualInformation(..) => -pair_mutual_information(p),
            CostTerm::NegCovarianceSq(_, _, w) => -w * pair_covariance(p).powi(2),
            CostTerm::NegVarianceSq(_) => -pm_variance(p).powi(2),
        }
    }

    /// `∂value/∂p_a` treating the probabilities as free variables.
    pub fn probability_gradient(&self, p: &[f64]) -> Vec<f64> {
        match *self {
            CostTerm::Entropy(_) => p.iter().map(|&x| entropy_slope(x)).collect(),
            CostTerm::NegMutualInformation(..) => {
                let m1 = [p[0] + p[1], p[2] + p[3]];
                let m2 = [p[0] + p[2], p[1] + p[3]];
                (0..4)
                    .map(|a| entropy_slope(p[a]) - entropy_slope(m1[a >> 1]) - entropy_slope(m2[a & 1]))
                    .collect()
            }
            CostTerm::NegCovarianceSq(_, _, w) => {
                let ex = p[0] + p[1] - p[2] - p[3];
                let ey = p[0] - p[1] + p[2] - p[3];
                let cov = pair_covariance(p);
                PAIR_SIGNS
                    .iter()
                    .map(|&(sxy, sx, sy)| -2.0 * w * cov * (sxy - sx * ey - ex * sy))
                    .collect()
            }
            CostTerm::NegVarianceSq(_) => {
                let e = pm_expectation(p);
                let var = 1.0 - e * e;
                [1.0, -1.0].iter().map(|s| 4.0 * var * e * s).collect()
            }
        }
    }
}

/// A cost bound to a state and a shot configuration.
#[derive(Clone, Debug)]
pub struct CostSpec {
    engine: Arc<MeasurementEngine>,
    kind: CostKind,
    shots: ShotConfig,
    terms: Vec<CostTerm>,
    qubits: Vec<usize>,
}

fn pairs_of(qubits: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    qubits
        .iter()
        .enumerate()
        .flat_map(move |(a, &i)| qubits[a + 1..].iter().map(move |&j| (i, j)))
}

impl CostSpec {
    pub fn new(engine: Arc<MeasurementEngine>, kind: CostKind, shots: ShotConfig) -> Result<Self, OptError> {
        let terms: Vec<CostTerm> = match &kind {
            CostKind::VnEntropy(q) => vec![CostTerm::Entropy(*q)],
            CostKind::MeasuredMIPair(i, j) => vec![CostTerm::NegMutualInformation(*i, *j)],
            CostKind::MeasuredMIPairs(pairs) => {
                pairs.iter().map(|&(i, j)| CostTerm::NegMutualInformation(i, j)).collect()
            }
            CostKind::ClassicalMINetwork(qs) => {
                pairs_of(qs).map(|(i, j)| CostTerm::NegMutualInformation(i, j)).collect()
            }
            CostKind::CovarianceNorm(qs) => qs
                .iter()
                .map(|&q| CostTerm::NegVarianceSq(q))
                .chain(pairs_of(qs).map(|(i, j)| CostTerm::NegCovarianceSq(i, j, 2.0)))
                .collect(),
        };
        let n = engine.n_qubits();
        let listed: Vec<usize> = match &kind {
            CostKind::VnEntropy(q) => vec![*q],
            CostKind::MeasuredMIPair(i, j) => vec![*i, *j],
            CostKind::MeasuredMIPairs(p) => p.iter().flat_map(|&(i, j)| [i, j]).collect(),
            CostKind::ClassicalMINetwork(qs) | CostKind::CovarianceNorm(qs) => qs.clone(),
        };
        if listed.is_empty() {
            return Err(OptError::InvalidCost("cost refers to no qubits".into()));
        }
        if let Some(&q) = listed.iter().find(|&&q| q >= n) {
            return Err(SimError::QubitIndexOutOfRange { qubit: q, n_qubits: n }.into());
        }
        for t in &terms {
            if let [i, j] = t.qubits()[..] {
                if i == j {
                    return Err(OptError::InvalidCost(format!("pair ({i}, {j}) repeats a qubit")));
                }
            }
        }
        if let CostKind::ClassicalMINetwork(qs) | CostKind::CovarianceNorm(qs) = &kind {
            let mut s = qs.clone();
            s.sort_unstable();
            s.dedup();
            if s.len() != qs.len() {
                return Err(OptError::InvalidCost("qubit list has duplicates".into()));
            }
        }
        let mut qubits = listed;
        qubits.sort_unstable();
        qubits.dedup();
        Ok(Self {
            engine,
            kind,
            shots,
            terms,
            qubits,
        })
    }

    pub fn kind(&self) -> &CostKind {
        &self.kind
    }

    pub fn shots(&self) -> ShotConfig {
        self.shots
    }

    pub fn engine(&self) -> &Arc<MeasurementEngine> {
        &self.engine
    }

    pub fn terms(&self) -> &[CostTerm] {
        &self.terms
    }

    /// Qubits measured by the cost circuit, ascending.
    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn with_shots(mut self, shots: ShotConfig) -> Self {
        self.shots = shots;
        self
    }

    /// Angles per setting vector: three for every qubit of the state.
    pub fn n_params(&self) -> usize {
        3 * self.engine.n_qubits()
    }

    fn check(&self, settings: &MeasurementSettings) -> Result<(), OptError> {
        if settings.len() < self.engine.n_qubits() {
            return Err(SimError::SettingsMismatch {
                qubit: settings.len(),
                available: settings.len(),
            }
            .into());
        }
        Ok(())
    }

    /// Probability vectors of the selected terms. With finite shots the
    /// circuit over all cost qubits is sampled once with `seed`.
    fn term_probabilities(
        &self,
        settings: &MeasurementSettings,
        seed: u64,
        select: impl Fn(&CostTerm) -> bool,
    ) -> Result<Vec<Option<Vec<f64>>>, OptError> {
        match self.shots {
            ShotConfig::Analytic => self
                .terms
                .iter()
                .map(|t| {
                    if select(t) {
                        Ok(Some(self.engine.probabilities(&t.qubits(), settings)?))
                    } else {
                        Ok(None)
                    }
                })
                .collect(),
            ShotConfig::Finite { shots, .. } => {
                let exact = OutcomeDistribution::analytic(self.engine.probabilities(&self.qubits, settings)?)?;
                let sample = sample_outcomes(&exact, shots, seed);
                self.terms
                    .iter()
                    .map(|t| {
                        if !select(t) {
                            return Ok(None);
                        }
                        let bits: Vec<usize> = t
                            .qubits()
                            .iter()
                            .map(|q| self.qubits.binary_search(q).expect("cost qubit"))
                            .collect();
                        Ok(Some(sample.marginal(&bits)?.probabilities()))
                    })
                    .collect()
            }
        }
    }

    fn base_seed(&self) -> u64 {
        match self.shots {
            ShotConfig::Analytic => 0,
            ShotConfig::Finite { seed, .. } => derive_seed(seed, &[0]),
        }
    }

    fn shift_seed(&self, param: usize, sign: u64) -> u64 {
        match self.shots {
            ShotConfig::Analytic => 0,
            ShotConfig::Finite { seed, .. } => derive_seed(seed, &[1, param as u64, sign]),
        }
    }

    /// Value of every term, in [`CostSpec::terms`] order.
    pub fn evaluate_terms(&self, settings: &MeasurementSettings) -> Result<Vec<f64>, OptError> {
        self.check(settings)?;
        let probs = self.term_probabilities(settings, self.base_seed(), |_| true)?;
        Ok(self
            .terms
            .iter()
            .zip(probs)
            .map(|(t, p)| t.value(&p.expect("all terms selected")))
            .collect())
    }

    /// Cost and parameter-shift gradient from a shared base evaluation.
    ///
    /// Each angle generates a rotation with generator eigenvalues `±½`, so
    /// `∂p/∂θ = [p(θ + π/2) − p(θ − π/2)] / 2` exactly; the cost gradient is
    /// chained through `∂f/∂p`. The outer Z angle leaves every outcome
    /// probability unchanged and gets a zero component.
    pub fn cost_and_gradient(&self, settings: &MeasurementSettings) -> Result<(f64, Vec<f64>), OptError> {
        self.check(settings)?;
        let base = self.term_probabilities(settings, self.base_seed(), |_| true)?;
        let mut cost = 0.0;
        let mut slopes = Vec::with_capacity(self.terms.len());
        for (t, p) in self.terms.iter().zip(&base) {
            let p = p.as_ref().expect("all terms selected");
            cost += t.value(p);
            slopes.push(t.probability_gradient(p));
        }
        let mut grad = vec![0.0; self.n_params()];
        for &q in &self.qubits {
            for k in 0..2 {
                let param = 3 * q + k;
                let shifted = |delta: f64, sign: u64| -> Result<Vec<Option<Vec<f64>>>, OptError> {
                    let mut s = settings.clone();
                    let mut a = s.angles(q);
                    a[k] += delta;
                    s.set(q, a);
                    self.term_probabilities(&s, self.shift_seed(param, sign), |t| t.involves(q))
                };
                let plus = shifted(FRAC_PI_2, 0)?;
                let minus = shifted(-FRAC_PI_2, 1)?;
                let mut g = 0.0;
                for ((slope, p), m) in slopes.iter().zip(&plus).zip(&minus) {
                    if let (Some(p), Some(m)) = (p, m) {
                        g += slope.iter().zip(p.iter().zip(m)).map(|(s, (a, b))| s * (a - b) / 2.0).sum::<f64>();
                    }
                }
                grad[param] = g;
            }
        }
        Ok((cost, grad))
    }
}

pub fn evaluate_cost(spec: &CostSpec, settings: &MeasurementSettings) -> Result<f64, OptError> {
    Ok(spec.evaluate_terms(settings)?.iter().sum())
}

pub fn parameter_shift_gradient(spec: &CostSpec, settings: &MeasurementSettings) -> Result<Vec<f64>, OptError> {
    Ok(spec.cost_and_gradient(settings)?.1)
}
