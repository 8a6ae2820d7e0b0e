//! Non-controllability witnesses: a potential whose adjoint eigenfunction is
//! flat on a window, the one-dimensional cascade counterexample with
//! its exact discrete counterpart, and Fattorini-type eigen tests.

mod blended;
mod counterexample;
mod fattorini;
mod invariant;
mod witness;

use thiserror::Error;

pub use blended::{build_blended_potential_nd, cascade_system, BlendedPotential, BlendedSummary};
pub use counterexample::{
    build_counterexample_1d, CounterexampleChecks, CounterexampleData, CounterexampleOptions, Dichotomy,
    Theta1Profile, S_WITNESS,
};
pub use fattorini::{
    adjoint_eigen_sweep, consistent_potential, dirichlet_laplacian, fattorini_check, fattorini_coupled,
    sample_potential, AdjointCandidate, FattoriniMode, FattoriniOptions, FattoriniReport, Obstruction, PairReport,
};
pub use invariant::{invariant_functional_test, InvariantReport};
pub use witness::{discrete_counterexample, witness_window, DiscreteWitness};

use crate::simulate::SimError;
use crate::symbolic::EvalError;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("nesting: {0}")]
    Nesting(String),
    #[error("construction: {0}")]
    Construction(String),
    #[error("eigensolver: {0}")]
    Eigen(String),
    #[error("no qualifying discrete eigenvector: {0}")]
    NoWitness(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
