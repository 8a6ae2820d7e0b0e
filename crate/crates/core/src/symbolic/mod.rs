//! Expressions, exact differentiation, evaluation, quadrature and linear
//! differential operators.

mod diff;
mod eval;
mod expr;
mod jet;
mod multiindex;
mod op;
mod parse;
mod print;
mod quad;

use thiserror::Error;

pub use diff::{differentiate, Differentiator};
pub use eval::{Tape, Workspace};
pub use expr::{Bump, Expr, FieldRef, Integral, Kind, ScalarField, Step, MAX_VARS, TIME};
pub use jet::{any_bump, bump_derivative, poly_bump_derivative, step_derivative};
pub use multiindex::{binomial, MultiIndex};
pub use op::{LinDiffOp, OpMatrix, TermText};
pub use parse::{parse_expression, parse_with, ParseContext, ParseError};
pub use print::format_number;
pub use quad::{integrate_adaptive, integrate_adaptive_fn, integrate_piecewise_fn};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero at {point:?}")]
    DivisionByZero { point: Vec<f64> },
    #[error("non-finite value at {point:?}")]
    NonFinite { point: Vec<f64> },
    #[error("point has {got} coordinates, expression needs {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("quadrature on [{lo}, {hi}] did not converge (error estimate {error:e})")]
    Quadrature { lo: f64, hi: f64, error: f64 },
    #[error("field evaluation failed: {0}")]
    Field(String),
}
