use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Matrix4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{decode_correlations, InferError, InferenceResult, QubitNodeAssignment};
use crate::netmodel::NetworkTopology;
use crate::quantify::{
    assemble_qubit_matrix, entropy_bits, von_neumann_entropy_exact, CorrelationMatrix, MatrixKind, PairSettings,
    SettingsLayout, Threshold,
};
use crate::simcore::rng::derive_seed;
use crate::simcore::{
    angles_for_axis, apply_link_channels, prepare_network_state, Angles, DensityMatrix, KrausChannel,
    MeasurementEngine, MeasurementSettings, ShotConfig, StatePrep, C64,
};
use crate::varopt::{gradient_descent, CostKind, CostSpec, DescentReport, InitStrategy, OptimizerConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InferenceMethod {
    /// Covariance norm over a single shared basis.
    #[serde(rename = "covariance")]
    Covariance,
    /// Measured MI optimized separately for every pair.
    #[serde(rename = "char-per-pair")]
    CharacteristicPerPair,
    /// Pairwise MI summed over one shared basis.
    #[serde(rename = "char-shared")]
    CharacteristicShared,
}

impl InferenceMethod {
    pub fn matrix_kind(self) -> MatrixKind {
        match self {
            InferenceMethod::Covariance => MatrixKind::Covariance,
            _ => MatrixKind::Characteristic,
        }
    }
}

impl fmt::Display for InferenceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InferenceMethod::Covariance => "covariance",
            InferenceMethod::CharacteristicPerPair => "char-per-pair",
            InferenceMethod::CharacteristicShared => "char-shared",
        })
    }
}

impl FromStr for InferenceMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "covariance" => Ok(InferenceMethod::Covariance),
            "char-per-pair" => Ok(InferenceMethod::CharacteristicPerPair),
            "char-shared" => Ok(InferenceMethod::CharacteristicShared),
            _ => Err(format!("unknown method {s:?}; expected covariance, char-per-pair or char-shared")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub method: InferenceMethod,
    pub optimizer: OptimizerConfig,
    pub threshold: Threshold,
    pub shots: ShotConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            method: InferenceMethod::Covariance,
            optimizer: OptimizerConfig::default(),
            threshold: Threshold::DEFAULT,
            shots: ShotConfig::Analytic,
        }
    }
}

/// A network state to be probed, with its node assignment and, when known,
/// the topology that produced it.
#[derive(Clone, Debug)]
pub struct NetworkExperiment {
    engine: Arc<MeasurementEngine>,
    assignment: QubitNodeAssignment,
    ground_truth: Option<NetworkTopology>,
}

impl NetworkExperiment {
    /// Prepares `preps` on the sources of `topology` and applies one channel
    /// per link (`channels` empty for a noiseless network).
    pub fn from_topology(
        topology: &NetworkTopology,
        preps: &[StatePrep],
        channels: &[KrausChannel],
    ) -> Result<Self, InferError> {
        let mut state = prepare_network_state(topology, preps)?;
        if !channels.is_empty() {
            state = apply_link_channels(&state, channels)?;
        }
        Ok(Self {
            engine: Arc::new(MeasurementEngine::new(state)),
            assignment: QubitNodeAssignment::from_topology(topology),
            ground_truth: Some(topology.clone()),
        })
    }

    pub fn from_state(state: DensityMatrix, assignment: QubitNodeAssignment) -> Result<Self, InferError> {
        if assignment.n_qubits() != state.n_qubits() {
            return Err(InferError::SizeMismatch {
                expected: state.n_qubits(),
                found: assignment.n_qubits(),
            });
        }
        Ok(Self {
            engine: Arc::new(MeasurementEngine::new(state)),
            assignment,
            ground_truth: None,
        })
    }

    pub fn engine(&self) -> &Arc<MeasurementEngine> {
        &self.engine
    }

    pub fn state(&self) -> &DensityMatrix {
        self.engine.state()
    }

    pub fn n_qubits(&self) -> usize {
        self.engine.n_qubits()
    }

    pub fn assignment(&self) -> &QubitNodeAssignment {
        &self.assignment
    }

    pub fn ground_truth(&self) -> Option<&NetworkTopology> {
        self.ground_truth.as_ref()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledReport {
    pub label: String,
    pub report: DescentReport,
}

/// Output of the measurement stage: the optimized correlation matrix and
/// everything recorded on the way to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRun {
    pub method: InferenceMethod,
    pub matrix: CorrelationMatrix,
    pub reports: Vec<LabeledReport>,
    /// Ideal matrix of the state, present when the ground truth is known.
    pub ideal: Option<CorrelationMatrix>,
    /// Distance to `ideal` of the matrix built from the best runs after
    /// each step; the last entry belongs to `matrix`.
    pub inference_errors: Option<Vec<f64>>,
}

const NETWORK_STREAM: u64 = 0;
const QUBIT_STREAM: u64 = 1;
const PAIR_STREAM: u64 = 2;
const STEP_STREAM: u64 = 3;

struct Reports {
    network: Option<DescentReport>,
    qubits: Vec<DescentReport>,
    pairs: Vec<((usize, usize), DescentReport)>,
}

fn descend(
    engine: &Arc<MeasurementEngine>,
    kind: CostKind,
    config: &PipelineConfig,
    path: &[u64],
) -> Result<DescentReport, InferError> {
    let spec = CostSpec::new(engine.clone(), kind, config.shots)?;
    let optimizer = OptimizerConfig {
        seed: derive_seed(config.optimizer.seed, path),
        ..config.optimizer.clone()
    };
    Ok(gradient_descent(&spec, &optimizer)?)
}

fn optimize(engine: &Arc<MeasurementEngine>, config: &PipelineConfig) -> Result<Reports, InferError> {
    let n = engine.n_qubits();
    let all: Vec<usize> = (0..n).collect();
    let network = match config.method {
        InferenceMethod::Covariance => Some(descend(engine, CostKind::CovarianceNorm(all), config, &[NETWORK_STREAM])?),
        InferenceMethod::CharacteristicShared if n > 1 => {
            Some(descend(engine, CostKind::ClassicalMINetwork(all), config, &[NETWORK_STREAM])?)
        }
        _ => None,
    };
    let qubits = match config.method {
        InferenceMethod::Covariance => Vec::new(),
        _ => (0..n)
            .into_par_iter()
            .map(|q| descend(engine, CostKind::VnEntropy(q), config, &[QUBIT_STREAM, q as u64]))
            .collect::<Result<_, _>>()?,
    };
    let pairs = match config.method {
        InferenceMethod::CharacteristicPerPair => {
            let list: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
            list.into_par_iter()
                .map(|(i, j)| {
                    let path = [PAIR_STREAM, i as u64, j as u64];
                    Ok(((i, j), descend(engine, CostKind::MeasuredMIPair(i, j), config, &path)?))
                })
                .collect::<Result<_, InferError>>()?
        }
        _ => Vec::new(),
    };
    Ok(Reports { network, qubits, pairs })
}

fn entropy_entry(engine: &MeasurementEngine, q: usize, angles: Angles, shots: ShotConfig) -> Result<f64, InferError> {
    let settings = MeasurementSettings::uniform(engine.n_qubits(), angles);
    Ok(entropy_bits(&engine.distribution(&[q], &settings, shots)?.probabilities()))
}

/// Matrix measured with the best run of every optimization after `step`
/// updates.
fn matrix_at(
    engine: &MeasurementEngine,
    method: InferenceMethod,
    reports: &Reports,
    step: usize,
    shots: ShotConfig,
) -> Result<CorrelationMatrix, InferError> {
    let n = engine.n_qubits();
    let seed = match shots {
        ShotConfig::Analytic => 0,
        ShotConfig::Finite { seed, .. } => derive_seed(seed, &[STEP_STREAM, step as u64]),
    };
    let diag_angles: Vec<Angles> = reports
        .qubits
        .iter()
        .enumerate()
        .map(|(q, r)| r.best().settings_at(step).angles(q))
        .collect();
    match method {
        InferenceMethod::Covariance => {
            let settings = reports.network.as_ref().expect("network run").best().settings_at(step);
            Ok(assemble_qubit_matrix(
                engine,
                &SettingsLayout::Shared(settings),
                MatrixKind::Covariance,
                shots.reseeded(seed),
            )?)
        }
        InferenceMethod::CharacteristicShared => {
            let settings = match &reports.network {
                Some(r) => r.best().settings_at(step),
                None => MeasurementSettings::new(diag_angles.clone())?,
            };
            let mut m = assemble_qubit_matrix(
                engine,
                &SettingsLayout::Shared(settings),
                MatrixKind::Characteristic,
                shots.reseeded(derive_seed(seed, &[0])),
            )?;
            for (q, &angles) in diag_angles.iter().enumerate() {
                let value = entropy_entry(engine, q, angles, shots.reseeded(derive_seed(seed, &[1, q as u64])))?;
                m.set_sym(q, q, value);
            }
            Ok(m)
        }
        InferenceMethod::CharacteristicPerPair => {
            let mut layout = PairSettings::new(diag_angles);
            for ((i, j), r) in &reports.pairs {
                let s = r.best().settings_at(step);
                layout.insert(*i, *j, [s.angles(*i), s.angles(*j)]);
            }
            debug_assert_eq!(layout.diagonal.len(), n);
            Ok(assemble_qubit_matrix(
                engine,
                &SettingsLayout::PerPair(layout),
                MatrixKind::Characteristic,
                shots.reseeded(seed),
            )?)
        }
    }
}

fn flatten(reports: Reports) -> Vec<LabeledReport> {
    let mut out = Vec::new();
    if let Some(r) = reports.network {
        out.push(LabeledReport { label: "network".into(), report: r });
    }
    for (q, r) in reports.qubits.into_iter().enumerate() {
        out.push(LabeledReport { label: format!("qubit {q}"), report: r });
    }
    for ((i, j), r) in reports.pairs {
        out.push(LabeledReport { label: format!("pair {i}-{j}"), report: r });
    }
    out
}

/// Runs the variational stage of `config.method` and assembles the
/// resulting correlation matrix. When the experiment carries its ground
/// truth, the matrix after every step is compared with the ideal one.
pub fn measure_correlations(
    experiment: &NetworkExperiment,
    config: &PipelineConfig,
) -> Result<CorrelationRun, InferError> {
    let engine = experiment.engine();
    let reports = optimize(engine, config)?;
    let steps = config.optimizer.steps;
    let matrix = matrix_at(engine, config.method, &reports, steps, config.shots)?;
    let ideal = match (experiment.ground_truth(), config.method) {
        (None, _) => None,
        (Some(_), InferenceMethod::Covariance) => Some(ideal_covariance_matrix(engine)),
        (Some(_), _) => Some(ideal_characteristic_matrix(engine, config.optimizer.seed)?),
    };
    let inference_errors = match &ideal {
        None => None,
        Some(ideal) => Some(
            (0..=steps)
                .into_par_iter()
                .map(|t| {
                    let m = if t == steps {
                        matrix.clone()
                    } else {
                        matrix_at(engine, config.method, &reports, t, config.shots)?
                    };
                    Ok(m.inference_error(ideal)?)
                })
                .collect::<Result<Vec<f64>, InferError>>()?,
        ),
    };
    Ok(CorrelationRun {
        method: config.method,
        matrix,
        reports: flatten(reports),
        ideal,
        inference_errors,
    })
}

/// Measure, binarize at `config.threshold` and decode.
pub fn infer_pipeline(
    experiment: &NetworkExperiment,
    config: &PipelineConfig,
) -> Result<(InferenceResult, CorrelationRun), InferError> {
    let run = measure_correlations(experiment, config)?;
    let result = decode_correlations(&run.matrix, config.threshold, experiment.assignment())?;
    Ok((result, run))
}

fn paulis() -> [Matrix2<C64>; 3] {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        Matrix2::new(z, one, one, z),
        Matrix2::new(z, -i, i, z),
        Matrix2::new(one, z, z, -one),
    ]
}

fn bloch(rho: &Matrix2<C64>) -> [f64; 3] {
    let p = paulis();
    [0, 1, 2].map(|a| (rho * p[a]).trace().re)
}

/// `T − r_i r_jᵀ`: the covariance of `±1` outcomes along axes `a, b` is
/// `aᵀ K b`.
fn covariance_kernel(engine: &MeasurementEngine, i: usize, j: usize) -> Matrix3<f64> {
    let p = paulis();
    let rho: &Matrix4<C64> = engine.pair_marginal(i, j);
    let ri = bloch(engine.single_marginal(i));
    let rj = bloch(engine.single_marginal(j));
    Matrix3::from_fn(|a, b| {
        let op: Matrix4<C64> = p[a].kronecker(&p[b]);
        (rho * op).trace().re - ri[a] * rj[b]
    })
}

/// Best-basis covariance matrix: `|cov|` maximized independently per pair,
/// which is the top singular value of the pair's covariance kernel, and
/// the maximal variance on the diagonal.
pub fn ideal_covariance_matrix(engine: &MeasurementEngine) -> CorrelationMatrix {
    let n = engine.n_qubits();
    let mut m = CorrelationMatrix::zeros(MatrixKind::Covariance, n);
    for i in 0..n {
        // an axis orthogonal to the Bloch vector gives variance 1
        m.set_sym(i, i, 1.0);
        for j in i + 1..n {
            let s = covariance_kernel(engine, i, j).singular_values();
            m.set_sym(i, j, s.max().clamp(0.0, 1.0));
        }
    }
    m
}

/// Restarts and steps of the reference MI optimization.
const IDEAL_OPTIMIZER: OptimizerConfig = OptimizerConfig {
    step_size: 0.1,
    steps: 300,
    restarts: 6,
    seed: 0,
    init: InitStrategy::Random,
};

/// Exact single-qubit entropies on the diagonal and per-pair measured MI
/// off it. The MI optimization starts from the leading singular axes of the
/// covariance kernel; pairs with a vanishing kernel are product states and
/// get 0.
pub fn ideal_characteristic_matrix(engine: &MeasurementEngine, seed: u64) -> Result<CorrelationMatrix, InferError> {
    let n = engine.n_qubits();
    let mut m = CorrelationMatrix::zeros(MatrixKind::Characteristic, n);
    for q in 0..n {
        let rho = engine.state().partial_trace(&[q])?;
        m.set_sym(q, q, von_neumann_entropy_exact(&rho)?);
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values: Vec<((usize, usize), f64)> = pairs
        .into_par_iter()
        .map(|(i, j)| {
            let kernel = covariance_kernel(engine, i, j);
            let svd = kernel.svd(true, true);
            let top = svd.singular_values.imax();
            if svd.singular_values[top] < 1e-12 {
                return Ok(((i, j), 0.0));
            }
            let u = svd.u.expect("requested").column(top).into_owned();
            let v = svd.v_t.expect("requested").row(top).transpose();
            let rho = engine.state().partial_trace(&[i, j])?;
            let local = Arc::new(MeasurementEngine::new(rho));
            let init = MeasurementSettings::new(vec![
                angles_for_axis([u[0], u[1], u[2]]),
                angles_for_axis([v[0], v[1], v[2]]),
            ])?;
            let spec = CostSpec::new(local, CostKind::MeasuredMIPair(0, 1), ShotConfig::Analytic)?;
            let config = OptimizerConfig {
                seed: derive_seed(seed, &[i as u64, j as u64]),
                init: InitStrategy::Explicit(init),
                ..IDEAL_OPTIMIZER
            };
            let report = gradient_descent(&spec, &config)?;
            let best = report.runs.iter().map(|r| r.min_cost).fold(f64::INFINITY, f64::min);
            Ok(((i, j), (-best).max(0.0)))
        })
        .collect::<Result<_, InferError>>()?;
    for ((i, j), v) in values {
        m.set_sym(i, j, v);
    }
    Ok(m)
}
