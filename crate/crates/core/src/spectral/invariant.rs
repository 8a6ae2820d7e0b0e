//! The component of the state along an invisible adjoint eigenvector evolves
//! without the control: if `Sᵀw = λw` and `Bᵀw = 0` then
//! `⟨y^K, w⟩ = λ^K ⟨y⁰, w⟩` whatever `u` is.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::SpectralError;
use crate::linalg::{dot, norm2};
use crate::simulate::{solve_forward, ControlMode, DiscreteSystem};

#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub lambda: f64,
    pub eigen_residual: f64,
    pub visibility: f64,
    pub zero_control_drift: f64,
    pub drifts: Vec<f64>,
    pub max_drift: f64,
}

/// Requires `‖Sᵀw − λw‖ ≤ tol‖w‖` and `‖Bᵀw‖ ≤ tol‖w‖` (one control); then
/// drives the system from `y0` with `controls` random controls (seeded) and
/// returns the relative drift of `⟨y^K, w⟩` from `λ^K⟨y⁰, w⟩`.
pub fn invariant_functional_test(
    ds: &DiscreteSystem,
    w: &[f64],
    lambda: f64,
    y0: &[f64],
    controls: usize,
    seed: u64,
    tol: f64,
) -> Result<InvariantReport, SpectralError> {
    let mode = ControlMode::OneControl;
    let nw = norm2(w);
    let sw = ds.apply_s_transpose(w);
    let eigen_residual = sw.iter().zip(w).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt() / nw;
    let visibility = (0..ds.grid.steps)
        .filter(|&n| ds.active_steps[n])
        .map(|n| norm2(&ds.apply_b_transpose(w, mode, n)))
        .fold(0.0, f64::max)
        / nw;
    if !(eigen_residual <= tol && visibility <= tol) {
        return Err(SpectralError::NoWitness(format!(
            "eigen residual {eigen_residual:e}, visibility {visibility:e} (tolerance {tol:e})"
        )));
    }
    let k = ds.grid.steps as i32;
    let expected = lambda.powi(k) * dot(y0, w);
    let drift = |yt: &[f64]| (dot(yt, w) - expected).abs() / (expected.abs() + norm2(yt) * nw);

    let free = solve_forward(ds, y0, None)?;
    let zero_control_drift = drift(free.terminal());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = ds.state_len();
    let mut drifts = Vec::with_capacity(controls);
    for _ in 0..controls {
        let u: Vec<Vec<f64>> =
            (0..ds.grid.steps).map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let traj = solve_forward(ds, y0, Some((&u, mode)))?;
        drifts.push(drift(traj.terminal()));
    }
    let max_drift = drifts.iter().copied().fold(zero_control_drift, f64::max);
    Ok(InvariantReport { lambda, eigen_residual, visibility, zero_control_drift, drifts, max_drift })
}
