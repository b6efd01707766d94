use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::CostSpec;
use super::OptError;
use crate::simcore::rng::{derive_seed, rng_from_seed};
use crate::simcore::MeasurementSettings;

const INIT_STREAM: u64 = 0;
const SAMPLE_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Independent uniform angles on `[0, 2π)` per restart.
    Random,
    /// Restart 0 starts here; later restarts are random.
    Explicit(MeasurementSettings),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub step_size: f64,
    pub steps: usize,
    pub restarts: usize,
    pub seed: u64,
    pub init: InitStrategy,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step_size: 0.05,
            steps: 30,
            restarts: 10,
            seed: 0,
            init: InitStrategy::Random,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptError> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(OptError::InvalidConfig(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.steps == 0 || self.restarts == 0 {
            return Err(OptError::InvalidConfig("steps and restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// One descent run. `costs[t]` and `settings[t]` describe the iterate after
/// `t` updates, so both hold `steps + 1` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub restart: usize,
    pub init_seed: u64,
    pub costs: Vec<f64>,
    pub settings: Vec<Vec<f64>>,
    pub final_settings: MeasurementSettings,
    pub final_cost: f64,
    pub min_cost: f64,
    pub min_cost_step: usize,
}

impl OptimizationTrace {
    pub fn steps(&self) -> usize {
        self.costs.len() - 1
    }

    pub fn settings_at(&self, step: usize) -> MeasurementSettings {
        MeasurementSettings::from_flat(&self.settings[step]).expect("recorded settings are valid")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub runs: Vec<OptimizationTrace>,
    /// Index of the run with the lowest final cost.
    pub best: usize,
}

impl DescentReport {
    pub fn best(&self) -> &OptimizationTrace {
        &self.runs[self.best]
    }

    /// Best final cost among the first `k` restarts.
    pub fn best_of_first(&self, k: usize) -> f64 {
        self.runs[..k.min(self.runs.len())]
            .iter()
            .map(|r| r.final_cost)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Plain gradient descent `θ ← θ − η∇f(θ)` with independent restarts.
///
/// Restart `r` draws its initial angles from stream `(seed, 0, r)` and the
/// shots of step `t` from stream `(seed, 1, r, t)`, so a run with more
/// restarts reproduces every run of a shorter one.
pub fn gradient_descent(spec: &CostSpec, config: &OptimizerConfig) -> Result<DescentReport, OptError> {
    config.validate()?;
    let runs: Vec<OptimizationTrace> = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_once(spec, config, r))
        .collect::<Result<_, _>>()?;
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.final_cost.total_cmp(&b.1.final_cost))
        .map(|(i, _)| i)
        .expect("at least one restart");
    Ok(DescentReport { runs, best })
}

fn run_once(spec: &CostSpec, config: &OptimizerConfig, restart: usize) -> Result<OptimizationTrace, OptError> {
    let n = spec.engine().n_qubits();
    let init_seed = derive_seed(config.seed, &[INIT_STREAM, restart as u64]);
    let mut theta = match (&config.init, restart) {
        (InitStrategy::Explicit(s), 0) => {
            if s.len() != n {
                return Err(OptError::InvalidConfig(format!(
                    "explicit settings cover {} qubits, state has {n}",
                    s.len()
                )));
            }
            s.to_flat()
        }
        _ => MeasurementSettings::random(n, &mut rng_from_seed(init_seed)).to_flat(),
    };
    let mut costs = Vec::with_capacity(config.steps + 1);
    let mut history = Vec::with_capacity(config.steps + 1);
    for t in 0..=config.steps {
        let step_seed = derive_seed(config.seed, &[SAMPLE_STREAM, restart as u64, t as u64]);
        let step_spec = spec.clone().with_shots(spec.shots().reseeded(step_seed));
        let settings = MeasurementSettings::from_flat(&theta)?;
        history.push(theta.clone());
        if t == config.steps {
            costs.push(super::evaluate_cost(&step_spec, &settings)?);
            break;
        }
        let (cost, grad) = step_spec.cost_and_gradient(&settings)?;
        costs.push(cost);
        for (x, g) in theta.iter_mut().zip(&grad) {
            *x -= config.step_size * g;
        }
    }
    let (min_cost_step, min_cost) = costs
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty trace");
    Ok(OptimizationTrace {
        restart,
        init_seed,
        final_cost: *costs.last().expect("non-empty trace"),
        final_settings: MeasurementSettings::from_flat(&theta)?,
        costs,
        settings: history,
        min_cost,
        min_cost_step,
    })
}
