//! Variational optimization of local measurement bases.

mod cost;
mod optimizer;

use thiserror::Error;

use crate::quantify::QuantError;
use crate::simcore::SimError;

pub use cost::{evaluate_cost, parameter_shift_gradient, CostKind, CostSpec, CostTerm, PROB_FLOOR};
pub use optimizer::{gradient_descent, DescentReport, InitStrategy, OptimizationTrace, OptimizerConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptError {
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid cost: {0}")]
    InvalidCost(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Quant(#[from] QuantError),
}
