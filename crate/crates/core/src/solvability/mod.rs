//! Algebraic solvability: the operators of a system in normal form, the
//! module-membership test on `ã22`, the commutator elimination and the
//! assembly of a right inverse of the full operator.

mod assemble;
mod condition;
mod eliminate;
mod operators;
mod testfn;
mod verify;

use thiserror::Error;

pub use assemble::{assemble_full_solver, FullSolver};
pub use condition::{check_condition, ConditionReport, SliceGrid, SliceResidual, Verdict, DEFAULT_TOLERANCE};
pub use eliminate::{eliminate, EliminationOptions, EliminationResult, EliminationSummary, StepRecord};
pub use operators::{build_system_operators, split_x1, SystemOperators};
pub use testfn::random_test_function;
pub use verify::{relative_residual, relative_residual_scaled, verify_identity, verify_identity_pair, verify_pair};

use crate::symbolic::EvalError;
use crate::system::{SystemError, Window};

#[derive(Debug, Error)]
pub enum SolvabilityError {
    #[error("coupling g21·∇ + a21 is not ∂x1 on the control window; normalize first")]
    NormalForm,
    #[error("second operator still has x1-derivatives")]
    NotReduced,
    #[error("non-solvable on window {window:?}: {reason}")]
    NonSolvable { window: Window, reason: String },
    #[error("window shrank below minimum volume ({volume:e})")]
    WindowTooSmall { volume: f64 },
    #[error("expression blow-up: {nodes} nodes in one coefficient")]
    Blowup { nodes: usize },
    #[error("identity {what} holds only to {residual:e}")]
    Inaccurate { what: &'static str, residual: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    System(#[from] SystemError),
}
