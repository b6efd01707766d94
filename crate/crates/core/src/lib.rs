//! Simulation and topology inference for networks of independent quantum
//! sources measured by local nodes.
//!
//! The modules build on each other: [`simcore`] prepares and measures
//! network states, [`quantify`] turns outcome statistics into correlation
//! matrices, [`varopt`] searches measurement bases, [`infer`] decodes
//! topologies, and [`netmodel`] describes the networks themselves.
//!
//! ```
//! use qtopo_core::{infer_pipeline, same_topology, NetworkExperiment, NetworkTopology, PipelineConfig, StatePrep};
//!
//! # fn main() -> Result<(), qtopo_core::Error> {
//! let topology = NetworkTopology::new(5, vec![vec![0, 1, 2], vec![3, 4]], (0..5).map(|q| vec![q]).collect())?;
//! let experiment = NetworkExperiment::from_topology(&topology, &[StatePrep::w(3), StatePrep::bell()], &[])?;
//! let (result, _run) = infer_pipeline(&experiment, &PipelineConfig::default())?;
//! assert!(same_topology(&result.topology, &topology));
//! # Ok(())
//! # }
//! ```

pub mod infer;
pub mod netmodel;
pub mod quantify;
pub mod simcore;
pub mod varopt;

use thiserror::Error;

pub use infer::{
    compare_node_matrices, decode_correlations, decode_topology, infer_pipeline, measure_correlations,
    recover_counts_known_noise, CorrelationRun, InferError, InferenceMethod, InferenceResult, NetworkExperiment,
    PipelineConfig, QubitNodeAssignment,
};
pub use netmodel::{find_isomorphism, same_topology, NetworkTopology, QubitId, TopologyError, TopologySampler};
pub use quantify::{CorrelationMatrix, MatrixKind, QuantError, Threshold};
pub use simcore::{
    Angles, DensityMatrix, KrausChannel, MeasurementEngine, MeasurementSettings, OutcomeDistribution, PrepKind,
    ShotConfig, SimError, StatePrep,
};
pub use varopt::{gradient_descent, CostKind, CostSpec, DescentReport, OptError, OptimizationTrace, OptimizerConfig};

/// Any error raised by this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Infer(#[from] InferError),
}
