//! Experiment configuration files.
//!
//! A config is a JSON document with a `schema` version field. Unknown fields
//! are rejected so typos surface as errors instead of silent defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qtopo_core::simcore::rng::{derive_seed, rng_from_seed};
use qtopo_core::simcore::{SIGMA_X, SIGMA_Y, SIGMA_Z, C64};
use qtopo_core::varopt::InitStrategy;
use qtopo_core::{
    Angles, InferenceMethod, KrausChannel, MeasurementSettings, NetworkTopology, OptimizerConfig, ShotConfig,
    StatePrep, Threshold,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

// stream indices under the top-level seed
const OPTIMIZER_STREAM: u64 = 0;
const SHOT_STREAM: u64 = 1;
const ROTATION_STREAM: u64 = 2;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<NetworkTopology>,
    /// Path to a topology document, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology_file: Option<PathBuf>,
    /// One entry per source; GHZ everywhere when empty.
    #[serde(default)]
    pub sources: Vec<SourceConfig>,
    /// Same channel on every link.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<ChannelConfig>,
    /// One channel per qubit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub channels: Vec<ChannelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<InferenceMethod>,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub shots: Shots,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Fixed measurement basis for `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Basis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<Angles>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub kind: PrepName,
    /// `[re, im]` pairs, only for `pure`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotations: Option<Vec<Angles>>,
    /// Draw a hidden rotation per qubit from the seed.
    #[serde(default)]
    pub random_rotations: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrepName {
    Ghz,
    W,
    Bell,
    Zero,
    Pure,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelConfig {
    None,
    Depolarizing { gamma: f64 },
    AmplitudeDamping { gamma: f64 },
}

impl ChannelConfig {
    fn build(self) -> Result<KrausChannel, CliError> {
        let gamma = match self {
            ChannelConfig::None => return Ok(KrausChannel::identity(1)),
            ChannelConfig::Depolarizing { gamma } | ChannelConfig::AmplitudeDamping { gamma } => gamma,
        };
        if !(0.0..=1.0).contains(&gamma) {
            return Err(CliError::Config(format!("noise strength must lie in [0, 1], got {gamma}")));
        }
        Ok(match self {
            ChannelConfig::Depolarizing { .. } => KrausChannel::depolarizing(gamma)?,
            _ => KrausChannel::amplitude_damping(gamma)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Z,
    X,
    Y,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub step_size: f64,
    pub steps: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            step_size: d.step_size,
            steps: d.steps,
            restarts: d.restarts,
            seed: d.seed,
        }
    }
}

/// Shot budget: a positive count or `"analytic"`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ShotsRaw", into = "ShotsRaw")]
pub enum Shots {
    #[default]
    Analytic,
    Count(u64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ShotsRaw {
    Count(u64),
    Word(String),
}

impl TryFrom<ShotsRaw> for Shots {
    type Error = String;

    fn try_from(raw: ShotsRaw) -> Result<Self, Self::Error> {
        match raw {
            ShotsRaw::Count(0) => Err("shots must be at least 1".into()),
            ShotsRaw::Count(n) => Ok(Shots::Count(n)),
            ShotsRaw::Word(w) => w.parse(),
        }
    }
}

impl From<Shots> for ShotsRaw {
    fn from(s: Shots) -> Self {
        match s {
            Shots::Analytic => ShotsRaw::Word("analytic".into()),
            Shots::Count(n) => ShotsRaw::Count(n),
        }
    }
}

impl FromStr for Shots {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "analytic" {
            return Ok(Shots::Analytic);
        }
        match s.parse::<u64>() {
            Ok(0) => Err("shots must be at least 1".into()),
            Ok(n) => Ok(Shots::Count(n)),
            Err(_) => Err(format!("expected a shot count or \"analytic\", got {s:?}")),
        }
    }
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Analytic => f.write_str("analytic"),
            Shots::Count(n) => write!(f, "{n}"),
        }
    }
}

impl Shots {
    pub fn with_seed(self, seed: u64) -> ShotConfig {
        match self {
            Shots::Analytic => ShotConfig::Analytic,
            Shots::Count(shots) => ShotConfig::Finite { shots, seed },
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<Shots>,
    pub threshold: Option<f64>,
    pub method: Option<InferenceMethod>,
}

/// Everything a command needs, with overrides applied and seeds split.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub topology: NetworkTopology,
    pub preps: Vec<StatePrep>,
    pub channels: Vec<KrausChannel>,
    pub method: InferenceMethod,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub shots: Shots,
    pub shot_config: ShotConfig,
    pub threshold: Threshold,
    pub settings: MeasurementSettings,
}

/// Parses a config document; errors name the line, column and field.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        CliError::Config(format!(
            "line {} column {}: field `{}`: {inner}",
            inner.line(),
            inner.column(),
            e.path()
        ))
    })?;
    if config.schema != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "unsupported schema {}; this build reads schema {SCHEMA_VERSION}",
            config.schema
        )));
    }
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = parse_config(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    if let Some(file) = &config.topology_file {
        if config.topology.is_some() {
            return Err(CliError::Config("give either `topology` or `topology_file`, not both".into()));
        }
        let file = path.parent().unwrap_or(Path::new(".")).join(file);
        let text = std::fs::read_to_string(&file)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", file.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let topology: NetworkTopology = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Config(format!("{}: field `{}`: {}", file.display(), e.path(), e.inner())))?;
        config.topology = Some(topology);
        config.topology_file = None;
    }
    Ok(config)
}

impl ExperimentConfig {
    /// A config carrying only optimizer settings, for commands that build
    /// their own states.
    pub fn optimizer_only(optimizer: OptimizerSection) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            topology: None,
            topology_file: None,
            sources: Vec::new(),
            noise: None,
            channels: Vec::new(),
            method: None,
            optimizer,
            shots: Shots::Analytic,
            threshold: None,
            basis: None,
            angles: None,
        }
    }

    pub fn seed(&self, overrides: &Overrides) -> u64 {
        overrides.seed.unwrap_or(self.optimizer.seed)
    }

    /// Optimizer settings with the descent seed split from `seed`.
    pub fn optimizer_config(&self, seed: u64) -> Result<OptimizerConfig, CliError> {
        let config = OptimizerConfig {
            step_size: self.optimizer.step_size,
            steps: self.optimizer.steps,
            restarts: self.optimizer.restarts,
            seed: derive_seed(seed, &[OPTIMIZER_STREAM]),
            init: InitStrategy::Random,
        };
        config.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn resolve(&self, overrides: &Overrides) -> Result<Resolved, CliError> {
        let topology = self
            .topology
            .clone()
            .ok_or_else(|| CliError::Config("missing `topology` or `topology_file`".into()))?;
        let seed = self.seed(overrides);
        let preps = self.preps(&topology, seed)?;
        let channels = self.channels(topology.n_qubits())?;
        let shots = overrides.shots.unwrap_or(self.shots);
        let threshold = overrides.threshold.or(self.threshold).unwrap_or(Threshold::DEFAULT.value());
        let threshold = Threshold::new(threshold).map_err(|e| CliError::Config(e.to_string()))?;
        let settings = self.settings(topology.n_qubits())?;
        Ok(Resolved {
            preps,
            channels,
            method: overrides.method.or(self.method).unwrap_or(InferenceMethod::Covariance),
            seed,
            optimizer: self.optimizer_config(seed)?,
            shots,
            shot_config: shots.with_seed(derive_seed(seed, &[SHOT_STREAM])),
            threshold,
            settings,
            topology,
        })
    }

    fn preps(&self, topology: &NetworkTopology, seed: u64) -> Result<Vec<StatePrep>, CliError> {
        if self.sources.is_empty() {
            return Ok(topology.sources().iter().map(|s| StatePrep::ghz(s.len())).collect());
        }
        if self.sources.len() != topology.n_sources() {
            return Err(CliError::Config(format!(
                "`sources` has {} entries but the topology has {} sources",
                self.sources.len(),
                topology.n_sources()
            )));
        }
        self.sources
            .iter()
            .zip(topology.sources())
            .enumerate()
            .map(|(index, (source, qubits))| source.build(index, qubits.len(), seed))
            .collect()
    }

    fn channels(&self, n_qubits: usize) -> Result<Vec<KrausChannel>, CliError> {
        match (&self.noise, self.channels.is_empty()) {
            (Some(_), false) => Err(CliError::Config("give either `noise` or `channels`, not both".into())),
            (None, true) => Ok(Vec::new()),
            (Some(ChannelConfig::None), true) => Ok(Vec::new()),
            (Some(c), true) => {
                let ch = c.build()?;
                Ok(vec![ch; n_qubits])
            }
            (None, false) => {
                if self.channels.len() != n_qubits {
                    return Err(CliError::Config(format!(
                        "`channels` has {} entries for {n_qubits} qubits",
                        self.channels.len()
                    )));
                }
                self.channels.iter().map(|c| c.build()).collect()
            }
        }
    }

    fn settings(&self, n_qubits: usize) -> Result<MeasurementSettings, CliError> {
        match (&self.basis, &self.angles) {
            (Some(_), Some(_)) => Err(CliError::Config("give either `basis` or `angles`, not both".into())),
            (_, Some(angles)) => {
                if angles.len() != n_qubits {
                    return Err(CliError::Config(format!(
                        "`angles` has {} entries for {n_qubits} qubits",
                        angles.len()
                    )));
                }
                MeasurementSettings::new(angles.clone()).map_err(|e| CliError::Config(e.to_string()))
            }
            (basis, None) => Ok(MeasurementSettings::uniform(
                n_qubits,
                match basis.unwrap_or(Basis::Z) {
                    Basis::Z => SIGMA_Z,
                    Basis::X => SIGMA_X,
                    Basis::Y => SIGMA_Y,
                },
            )),
        }
    }
}

impl SourceConfig {
    fn build(&self, index: usize, size: usize, seed: u64) -> Result<StatePrep, CliError> {
        let bad = |msg: String| CliError::Config(format!("sources[{index}]: {msg}"));
        if self.amplitudes.is_some() && self.kind != PrepName::Pure {
            return Err(bad("`amplitudes` is only valid for kind `pure`".into()));
        }
        let prep = match self.kind {
            PrepName::Ghz => StatePrep::ghz(size),
            PrepName::W => StatePrep::w(size),
            PrepName::Zero => StatePrep::zero(size),
            PrepName::Bell if size == 2 => StatePrep::bell(),
            PrepName::Bell => return Err(bad(format!("a Bell source needs 2 qubits, this one has {size}"))),
            PrepName::Pure => {
                let amps = self.amplitudes.as_ref().ok_or_else(|| bad("kind `pure` needs `amplitudes`".into()))?;
                if amps.len() != 1 << size {
                    return Err(bad(format!("expected {} amplitudes, found {}", 1usize << size, amps.len())));
                }
                StatePrep::new(qtopo_core::PrepKind::Pure(amps.iter().map(|&[re, im]| C64::new(re, im)).collect()))
            }
        };
        let rotations = match (&self.rotations, self.random_rotations) {
            (Some(_), true) => return Err(bad("give either `rotations` or `random_rotations`, not both".into())),
            (Some(r), false) if r.len() != size => {
                return Err(bad(format!("expected {size} rotations, found {}", r.len())));
            }
            (Some(r), false) => Some(r.clone()),
            (None, true) => {
                let mut rng = rng_from_seed(derive_seed(seed, &[ROTATION_STREAM, index as u64]));
                let tau = std::f64::consts::TAU;
                Some(
                    (0..size)
                        .map(|_| [rng.random_range(0.0..tau), rng.random_range(0.0..tau), rng.random_range(0.0..tau)])
                        .collect(),
                )
            }
            (None, false) => None,
        };
        let prep = match rotations {
            Some(r) => prep.with_rotations(r),
            None => prep,
        };
        // surface bad amplitudes as config errors rather than physics errors
        prep.density_matrix().map_err(|e| bad(e.to_string()))?;
        Ok(prep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const W_BELL: &str = r#"{
        "schema": 1,
        "topology": {"qubits": 5, "sources": [[0, 1, 2], [3, 4]], "nodes": [[0], [1], [2], [3], [4]]},
        "sources": [{"kind": "w", "random_rotations": true}, {"kind": "bell"}],
        "noise": {"kind": "depolarizing", "gamma": 0.1},
        "shots": 1000
    }"#;

    #[test]
    fn parses_and_resolves() {
        let config = parse_config(W_BELL).unwrap();
        let r = config.resolve(&Overrides::default()).unwrap();
        assert_eq!(r.topology.n_sources(), 2);
        assert_eq!(r.channels.len(), 5);
        assert_eq!(r.method, InferenceMethod::Covariance);
        assert_eq!(r.shots, Shots::Count(1000));
        assert!(matches!(r.shot_config, ShotConfig::Finite { shots: 1000, .. }));
        assert!(r.preps[0].rotations.is_some());
        let again = config.resolve(&Overrides::default()).unwrap();
        assert_eq!(again.preps, r.preps);
        let other = config.resolve(&Overrides { seed: Some(9), ..Default::default() }).unwrap();
        assert_ne!(other.preps, r.preps);
    }

    #[test]
    fn overrides_take_precedence() {
        let config = parse_config(W_BELL).unwrap();
        let r = config
            .resolve(&Overrides {
                seed: Some(3),
                shots: Some(Shots::Analytic),
                threshold: Some(0.2),
                method: Some(InferenceMethod::CharacteristicShared),
            })
            .unwrap();
        assert_eq!(r.seed, 3);
        assert_eq!(r.shot_config, ShotConfig::Analytic);
        assert_eq!(r.threshold.value(), 0.2);
        assert_eq!(r.method, InferenceMethod::CharacteristicShared);
    }

    #[test]
    fn errors_name_the_field() {
        let text = W_BELL.replace("\"kind\": \"bell\"", "\"kind\": \"bel\"");
        let CliError::Config(msg) = parse_config(&text).unwrap_err() else { panic!() };
        assert!(msg.contains("sources[1].kind"), "{msg}");
        assert!(msg.contains("line 4"), "{msg}");
        let text = W_BELL.replace("\"shots\": 1000", "\"shots\": 0");
        assert!(matches!(parse_config(&text), Err(CliError::Config(_))));
        let text = W_BELL.replace("\"schema\": 1", "\"schema\": 2");
        assert!(matches!(parse_config(&text), Err(CliError::Config(_))));
        let text = W_BELL.replace("\"shots\"", "\"shot\"");
        assert!(matches!(parse_config(&text), Err(CliError::Config(_))));
        let text = W_BELL.replace("[3, 4]], \"nodes\"", "[3, 7]], \"nodes\"");
        let CliError::Config(msg) = parse_config(&text).unwrap_err() else { panic!() };
        assert!(msg.contains("topology"), "{msg}");
    }

    #[test]
    fn semantic_checks() {
        let resolve = |text: String| parse_config(&text).unwrap().resolve(&Overrides::default());
        assert!(matches!(resolve(W_BELL.replace("0.1}", "1.5}")), Err(CliError::Config(_))));
        assert!(matches!(resolve(W_BELL.replace("\"kind\": \"w\"", "\"kind\": \"bell\"")), Err(CliError::Config(_))));
        let one_source = W_BELL.replace(", {\"kind\": \"bell\"}", "");
        assert!(matches!(resolve(one_source), Err(CliError::Config(_))));
        let pure = W_BELL.replace(
            "{\"kind\": \"bell\"}",
            "{\"kind\": \"pure\", \"amplitudes\": [[1, 0], [0, 0], [0, 0], [0, 0]]}",
        );
        assert!(resolve(pure).is_ok());
        let unnormalized = W_BELL.replace(
            "{\"kind\": \"bell\"}",
            "{\"kind\": \"pure\", \"amplitudes\": [[1, 0], [1, 0], [0, 0], [0, 0]]}",
        );
        assert!(matches!(resolve(unnormalized), Err(CliError::Config(_))));
    }

    #[test]
    fn shots_parse() {
        assert_eq!("analytic".parse::<Shots>(), Ok(Shots::Analytic));
        assert_eq!("250".parse::<Shots>(), Ok(Shots::Count(250)));
        assert!("0".parse::<Shots>().is_err());
        assert!("many".parse::<Shots>().is_err());
        assert_eq!(serde_json::to_string(&Shots::Analytic).unwrap(), "\"analytic\"");
    }
}
