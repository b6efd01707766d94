use std::path::Path;

use qtopo_core::infer::find_node_permutation;
use qtopo_core::quantify::{matrix_from_joint, pair_covariance, theory};
use qtopo_core::simcore::rng::derive_seed;
use qtopo_core::simcore::OutcomeMode;
use qtopo_core::{
    decode_correlations, gradient_descent, measure_correlations, same_topology, CorrelationMatrix, CostKind, CostSpec,
    DensityMatrix, InferError, KrausChannel, MatrixKind, MeasurementEngine, NetworkExperiment, NetworkTopology,
    PipelineConfig, ShotConfig, StatePrep,
};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

use crate::config::{ExperimentConfig, OptimizerSection, Overrides, Resolved, Shots};
use crate::output::{num, Csv, OutDir};
use crate::CliError;

/// Provenance written next to every result.
#[derive(Serialize)]
struct RunInfo<'a> {
    command: &'a str,
    seed: u64,
    method: String,
    shots: Shots,
    #[serde(skip_serializing_if = "Option::is_none")]
    shot_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimizer_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_sources: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    matches_ground_truth: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inconsistent_triple: Option<(usize, usize, usize)>,
}

impl<'a> RunInfo<'a> {
    fn new(command: &'a str, r: &Resolved) -> Self {
        Self {
            command,
            seed: r.seed,
            method: r.method.to_string(),
            shots: r.shots,
            shot_seed: match r.shot_config {
                ShotConfig::Analytic => None,
                ShotConfig::Finite { seed, .. } => Some(seed),
            },
            optimizer_seed: None,
            threshold: None,
            n_sources: None,
            matches_ground_truth: None,
            inconsistent_triple: None,
        }
    }

    fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("run info serializes");
        s.push('\n');
        s
    }
}

fn experiment(r: &Resolved) -> Result<NetworkExperiment, CliError> {
    Ok(NetworkExperiment::from_topology(&r.topology, &r.preps, &r.channels)?)
}

fn write_matrix(out: &OutDir, m: &CorrelationMatrix) -> Result<(), CliError> {
    out.write("matrix.csv", &m.to_csv())?;
    out.write("matrix.json", &(m.to_json() + "\n"))?;
    Ok(())
}

/// Measures every qubit in the configured basis and writes the resulting
/// correlation matrix and the joint outcome distribution.
pub fn simulate(config: &ExperimentConfig, overrides: &Overrides, out: &OutDir) -> Result<String, CliError> {
    let r = config.resolve(overrides)?;
    let exp = experiment(&r)?;
    let n = exp.n_qubits();
    let all: Vec<usize> = (0..n).collect();
    let joint = exp.engine().distribution(&all, &r.settings, r.shot_config)?;
    let matrix = matrix_from_joint(&joint, r.method.matrix_kind())?;
    write_matrix(out, &matrix)?;
    let mut csv = match joint.mode() {
        OutcomeMode::Analytic { .. } => Csv::new(&["bitstring", "probability"]),
        OutcomeMode::Empirical { .. } => Csv::new(&["bitstring", "count"]),
    };
    let bits = |x: usize| format!("{x:0n$b}");
    match joint.mode() {
        OutcomeMode::Analytic { probabilities } => {
            for (x, p) in probabilities.iter().enumerate() {
                csv.row(&[bits(x), num(*p)]);
            }
        }
        OutcomeMode::Empirical { counts, .. } => {
            for (x, c) in counts.iter().enumerate() {
                csv.row(&[bits(x), c.to_string()]);
            }
        }
    }
    out.write("outcomes.csv", &csv.finish())?;
    out.write("run.json", &RunInfo::new("simulate", &r).to_json())?;
    Ok(format!("simulated {n} qubits; wrote {} matrix", matrix.kind()))
}

/// Optimizes measurement bases, builds the correlation matrix and decodes
/// a topology from it.
pub fn infer(config: &ExperimentConfig, overrides: &Overrides, out: &OutDir) -> Result<String, CliError> {
    let r = config.resolve(overrides)?;
    let exp = experiment(&r)?;
    let pipeline = PipelineConfig {
        method: r.method,
        optimizer: r.optimizer.clone(),
        threshold: r.threshold,
        shots: r.shot_config,
    };
    let run = measure_correlations(&exp, &pipeline)?;
    write_matrix(out, &run.matrix)?;

    let mut trace = Csv::new(&["label", "restart", "init_seed", "step", "cost"]);
    for labeled in &run.reports {
        for t in &labeled.report.runs {
            for (step, cost) in t.costs.iter().enumerate() {
                trace.row(&[
                    labeled.label.clone(),
                    t.restart.to_string(),
                    t.init_seed.to_string(),
                    step.to_string(),
                    num(*cost),
                ]);
            }
        }
    }
    out.write("trace.csv", &trace.finish())?;
    if let Some(errors) = &run.inference_errors {
        let mut csv = Csv::new(&["step", "inference_error"]);
        for (step, e) in errors.iter().enumerate() {
            csv.row(&[step.to_string(), num(*e)]);
        }
        out.write("inference_error.csv", &csv.finish())?;
    }

    let mut info = RunInfo::new("infer", &r);
    info.optimizer_seed = Some(r.optimizer.seed);
    info.threshold = Some(r.threshold.value());
    let result = match decode_correlations(&run.matrix, r.threshold, exp.assignment()) {
        Ok(result) => result,
        Err(InferError::InconsistentCorrelationStructure { triple }) => {
            info.inconsistent_triple = Some(triple);
            out.write("run.json", &info.to_json())?;
            return Err(InferError::InconsistentCorrelationStructure { triple }.into());
        }
        Err(e) => return Err(e.into()),
    };
    out.write("result.json", &(result.to_json() + "\n"))?;
    let matches = exp.ground_truth().map(|t| same_topology(&result.topology, t));
    info.n_sources = Some(result.n_sources());
    info.matches_ground_truth = matches;
    out.write("run.json", &info.to_json())?;
    let verdict = match matches {
        Some(true) => "; matches the configured topology",
        Some(false) => "; differs from the configured topology",
        None => "",
    };
    Ok(format!("decoded {} sources{verdict}", result.n_sources()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepChannel {
    Depolarizing,
    AmplitudeDamping,
}

impl SweepChannel {
    fn channel(self, gamma: f64) -> Result<KrausChannel, CliError> {
        Ok(match self {
            SweepChannel::Depolarizing => KrausChannel::depolarizing(gamma)?,
            SweepChannel::AmplitudeDamping => KrausChannel::amplitude_damping(gamma)?,
        })
    }

    fn theory(self, gamma: f64) -> (f64, f64) {
        match self {
            SweepChannel::Depolarizing => (theory::depolarized_bell_mi(gamma), theory::depolarized_bell_cov(gamma)),
            SweepChannel::AmplitudeDamping => {
                (theory::amplitude_damped_bell_mi(gamma), theory::amplitude_damped_bell_cov(gamma))
            }
        }
    }
}

/// Inclusive noise grid inside `[0, 1]`, written `start:stop:step`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaGrid(pub Vec<f64>);

impl std::str::FromStr for GammaGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_gamma_grid(s).map(GammaGrid)
    }
}

fn parse_gamma_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, step] = parts[..] else {
        return Err(format!("expected start:stop:step, got {text:?}"));
    };
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
        return Err(format!("grid {a}..{b} must satisfy 0 <= start <= stop <= 1"));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(format!("step must be positive, got {step}"));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(format!("grid has {count} points"));
    }
    Ok((0..count).map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12).collect())
}

pub struct SweepArgs {
    pub channel: SweepChannel,
    pub grid: Vec<f64>,
    pub trials: usize,
}

struct Trial {
    mi_seed: u64,
    cov_seed: u64,
    shot_seed: u64,
    mi: f64,
    cov: f64,
}

fn noisy_bell(channel: SweepChannel, gamma: f64) -> Result<Arc<MeasurementEngine>, CliError> {
    let bell: DensityMatrix = StatePrep::bell().density_matrix()?;
    let ch = channel.channel(gamma)?;
    let rho = qtopo_core::simcore::apply_link_channels(&bell, &[ch.clone(), ch])?;
    Ok(Arc::new(MeasurementEngine::new(rho)))
}

fn run_trial(
    engine: &Arc<MeasurementEngine>,
    section: &OptimizerSection,
    shots: Shots,
    seed: u64,
) -> Result<Trial, CliError> {
    let config = ExperimentConfig::optimizer_only(section.clone());
    let mi_config = config.optimizer_config(derive_seed(seed, &[0]))?;
    let cov_config = config.optimizer_config(derive_seed(seed, &[1]))?;
    let shot_seed = derive_seed(seed, &[2]);
    let shot_config = shots.with_seed(shot_seed);
    let mi_spec = CostSpec::new(engine.clone(), CostKind::MeasuredMIPair(0, 1), shot_config)?;
    let mi = -gradient_descent(&mi_spec, &mi_config)?.best().final_cost;
    let cov_spec = CostSpec::new(engine.clone(), CostKind::CovarianceNorm(vec![0, 1]), shot_config)?;
    let report = gradient_descent(&cov_spec, &cov_config)?;
    let best = report.best();
    let cov = match shot_config {
        ShotConfig::Analytic => pair_covariance(&engine.probabilities(&[0, 1], &best.final_settings)?).abs(),
        ShotConfig::Finite { .. } => {
            // the shot stream of the final step, as the optimizer saw it
            let step_seed = derive_seed(cov_config.seed, &[1, best.restart as u64, cov_config.steps as u64]);
            let pair = CostSpec::new(
                engine.clone(),
                CostKind::CovarianceNorm(vec![0, 1]),
                shot_config.reseeded(step_seed),
            )?;
            let terms = pair.evaluate_terms(&best.final_settings)?;
            (-terms[2] / 2.0).max(0.0).sqrt()
        }
    };
    Ok(Trial {
        mi_seed: mi_config.seed,
        cov_seed: cov_config.seed,
        shot_seed,
        mi,
        cov,
    })
}

fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / n;
    let stderr = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    (best, mean, stderr)
}

/// Optimized MI and covariance of a noisy Bell pair over a noise grid,
/// next to the closed-form curves.
pub fn sweep_noise(
    config: Option<&ExperimentConfig>,
    overrides: &Overrides,
    args: &SweepArgs,
    out: &OutDir,
) -> Result<String, CliError> {
    if args.trials == 0 {
        return Err(CliError::Config("--trials must be at least 1".into()));
    }
    let section = config.map(|c| c.optimizer.clone()).unwrap_or_default();
    let seed = overrides.seed.unwrap_or(section.seed);
    let shots = overrides.shots.or(config.map(|c| c.shots)).unwrap_or_default();
    ExperimentConfig::optimizer_only(section.clone()).optimizer_config(seed)?;
    let engines = args
        .grid
        .iter()
        .map(|&g| noisy_bell(args.channel, g))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..args.grid.len())
        .flat_map(|k| (0..args.trials).map(move |t| (k, t)))
        .collect();
    let trials = jobs
        .par_iter()
        .map(|&(k, t)| run_trial(&engines[k], &section, shots, derive_seed(seed, &[3, k as u64, t as u64])))
        .collect::<Result<Vec<_>, _>>()?;

    let mut curve = Csv::new(&[
        "gamma",
        "mi_theory",
        "mi_best",
        "mi_mean",
        "mi_stderr",
        "cov_theory",
        "cov_best",
        "cov_mean",
        "cov_stderr",
    ]);
    let mut detail = Csv::new(&["gamma", "trial", "mi_seed", "cov_seed", "shot_seed", "mi", "cov"]);
    for (k, &g) in args.grid.iter().enumerate() {
        let chunk = &trials[k * args.trials..(k + 1) * args.trials];
        let mi: Vec<f64> = chunk.iter().map(|t| t.mi).collect();
        let cov: Vec<f64> = chunk.iter().map(|t| t.cov).collect();
        let (mi_theory, cov_theory) = args.channel.theory(g);
        let (mb, mm, ms) = summarize(&mi);
        let (cb, cm, cs) = summarize(&cov);
        curve.row(&[
            g.to_string(),
            num(mi_theory),
            num(mb),
            num(mm),
            num(ms),
            num(cov_theory),
            num(cb),
            num(cm),
            num(cs),
        ]);
        for (t, trial) in chunk.iter().enumerate() {
            detail.row(&[
                g.to_string(),
                t.to_string(),
                trial.mi_seed.to_string(),
                trial.cov_seed.to_string(),
                trial.shot_seed.to_string(),
                num(trial.mi),
                num(trial.cov),
            ]);
        }
    }
    out.write("sweep.csv", &curve.finish())?;
    out.write("sweep_trials.csv", &detail.finish())?;
    Ok(format!("swept {} noise values x {} trials", args.grid.len(), args.trials))
}

/// Reads a matrix from CSV or JSON, or the expected node matrix of a
/// topology document.
pub fn load_matrix(path: &Path) -> Result<CorrelationMatrix, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let fail = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return CorrelationMatrix::from_csv(MatrixKind::Characteristic, &text).map_err(|e| fail(e.to_string()));
    }
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;
    if value.get("sources").is_some() {
        let topology: NetworkTopology = serde_json::from_value(value).map_err(|e| fail(e.to_string()))?;
        return topology.expected_characteristic_matrix().map_err(|e| fail(e.to_string()));
    }
    serde_json::from_value(value).map_err(|e| fail(e.to_string()))
}

/// `Ok(true)` when the matrices agree up to a simultaneous permutation.
pub fn compare(a: &Path, b: &Path, tol: f64) -> Result<(bool, String), CliError> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(CliError::Config(format!("tolerance must be finite and nonnegative, got {tol}")));
    }
    let (ma, mb) = (load_matrix(a)?, load_matrix(b)?);
    if ma.size() != mb.size() {
        return Ok((false, format!("not equivalent: sizes {} and {}", ma.size(), mb.size())));
    }
    Ok(match find_node_permutation(&ma, &mb, tol)? {
        Some(p) => {
            let shown: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            (true, format!("equivalent; permutation {}", shown.join(" ")))
        }
        None => (false, "not equivalent".into()),
    })
}
