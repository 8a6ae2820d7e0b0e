//! Finite differences for the coupled system: forward solves, the exact
//! discrete transpose, penalized HUM controls and the fictitious control
//! assembly on manufactured solutions.

mod assembly;
mod discrete;
mod export;
mod forward;
mod grid;
mod hum;

use thiserror::Error;

pub use assembly::{assemble_fields, fictitious_assembly, manufactured_controls, AssemblyLevel, AssemblyReport};
pub use discrete::{discretize, discretize_with_potential, mollified_indicator, ControlMode, DiscreteSystem};
pub use export::{write_sweep_csv, write_trajectory_csv};
pub use forward::{solve_forward, solve_with_forcing, Trajectory};
pub use grid::Grid;
pub use hum::{hum_control, hum_sweep, loglog_slope, HumOptions, HumResult};

use crate::symbolic::EvalError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("grid: {0}")]
    Grid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("singular {0}")]
    Singular(String),
    #[error("expected length {expected}, found {found}")]
    Shape { expected: usize, found: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}
