//! Exact discrete counterpart of the 1D witness: for the central-difference
//! operator `A = [[Δh, 0], [Dh, Δh + a_h]]`, an eigenvector `w` of `Aᵀ` whose
//! first component vanishes on every node of `ω`. The potential is chosen
//! node-wise so that the grid function `ψ_h` is an exact eigenvector of
//! `Δh + a_h`, and the constants are re-solved on the grid.

use std::f64::consts::PI;

use serde::Serialize;

use super::counterexample::{CounterexampleData, Dichotomy};
use super::{cascade_system, SpectralError};
use crate::linalg::norm2;
use crate::simulate::{discretize_with_potential, ControlMode, DiscreteSystem, Grid};
use crate::symbolic::{Expr, Tape};
use crate::system::{BoxDomain, ParabolicSystem};

/// Control region `ω = (7π/15, 8π/15)` of the cascade counterexample.
pub fn witness_window() -> BoxDomain {
    BoxDomain { lo: vec![7.0 * PI / 15.0], hi: vec![8.0 * PI / 15.0] }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscreteWitness {
    pub cells: usize,
    pub h: f64,
    /// `(4/h²) sin²(3h/2)`, the eigenvalue of `−Δh` on `sin 3x`.
    pub s_h: f64,
    pub c: [f64; 3],
    pub alpha: f64,
    /// `ψ_h` on interior nodes.
    pub psi: Vec<f64>,
    /// Node-wise potential `(−Δhψ − s_h ψ)/ψ`.
    pub a: Vec<f64>,
    /// Interleaved `(w1, w2)`, `w2 = −ψ_h`, unit discrete L² norm.
    #[serde(skip)]
    pub w: Vec<f64>,
    /// Largest `|w1|` on nodes of `ω` before normalization, relative to `‖w1‖∞`.
    pub w1_on_omega: f64,
}

/// Values on all nodes, boundary nodes pinned to the Dirichlet zero.
fn nodal(e: &Expr, cells: usize, h: f64) -> Result<Vec<f64>, SpectralError> {
    let tape = Tape::single(e);
    (0..=cells)
        .map(|i| if i == 0 || i == cells { Ok(0.0) } else { Ok(tape.eval1(&[0.0, i as f64 * h])?) })
        .collect()
}

/// `w1` from `w1_0 = 0`, `w1_1 = start` and `−Δh w1 − Dh ψ = s w1`.
fn shoot(start: f64, psi: &[f64], s: f64, h: f64) -> Vec<f64> {
    let n = psi.len() - 1;
    let mut w = vec![0.0; n + 1];
    if n >= 1 {
        w[1] = start;
    }
    for i in 1..n {
        let dpsi = (psi[i + 1] - psi[i - 1]) / (2.0 * h);
        w[i + 1] = (2.0 - h * h * s) * w[i] - w[i - 1] - h * h * dpsi;
    }
    w
}

pub fn discrete_counterexample(data: &CounterexampleData, cells: usize) -> Result<DiscreteWitness, SpectralError> {
    let omega = witness_window();
    let h = PI / cells as f64;
    let s = 4.0 / (h * h) * (1.5 * h).sin().powi(2);
    let k0 = (omega.lo[0] / h).floor() as usize + 1;
    let k1 = (omega.hi[0] / h).ceil() as usize - 1;
    if k1 < k0 + 2 {
        return Err(SpectralError::Construction(format!("{cells} cells do not resolve ω")));
    }
    let base = nodal(&data.psi_base, cells, h)?;
    let th: Vec<Vec<f64>> = data.theta.iter().map(|t| nodal(t, cells, h)).collect::<Result<_, _>>()?;
    let sin3: Vec<f64> =
        (0..=cells).map(|k| if k == 0 || k == cells { 0.0 } else { (3.0 * k as f64 * h).sin() }).collect();
    let zero = vec![0.0; cells + 1];

    // w1 is affine in (α, C1, C2, C3): superpose the shots
    let r_alpha = shoot(1.0, &zero, s, h);
    let r0 = shoot(0.0, &base, s, h);
    let r: Vec<Vec<f64>> = th.iter().map(|t| shoot(0.0, t, s, h)).collect();
    // θ2, θ3 live right of ω: w1 on ω depends on α and C1 only
    let m = [[r_alpha[k0], r[0][k0]], [r_alpha[k0 + 1], r[0][k0 + 1]]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-300 {
        return Err(SpectralError::Construction("degenerate ω conditions".into()));
    }
    let (b0, b1) = (-r0[k0], -r0[k0 + 1]);
    let alpha = (b0 * m[1][1] - b1 * m[0][1]) / det;
    let c1 = (m[0][0] * b1 - m[1][0] * b0) / det;
    let partial: Vec<f64> = (0..=cells).map(|i| alpha * r_alpha[i] + r0[i] + c1 * r[0][i]).collect();
    // close w1(π) = 0 with the bump the continuous construction used, or
    // the other one if the grid flips the sign
    let order = match data.dichotomy {
        Dichotomy::UseTheta2 => [1, 2],
        Dichotomy::UseTheta3 => [2, 1],
    };
    let mut c = [c1, 0.0, 0.0];
    let mut closed = false;
    for k in order {
        let ck = -partial[cells] / r[k][cells];
        if ck.is_finite() && ck >= 0.0 {
            c[k] = ck;
            closed = true;
            break;
        }
    }
    if !closed {
        return Err(SpectralError::Construction("no nonnegative constant closes w1(π) = 0".into()));
    }
    let w1: Vec<f64> = (0..=cells).map(|i| partial[i] + c[1] * r[1][i] + c[2] * r[2][i]).collect();
    let psi: Vec<f64> = (0..=cells).map(|i| base[i] + c[0] * th[0][i] + c[1] * th[1][i] + c[2] * th[2][i]).collect();

    // a_h from the deviation from sin 3x, which Δh maps to −s sin 3x exactly
    let mut a = Vec::with_capacity(cells - 1);
    for i in 1..cells {
        let dev = |k: usize| psi[k] - sin3[k];
        let num = -(dev(i + 1) - 2.0 * dev(i) + dev(i - 1)) / (h * h) - s * dev(i);
        if psi[i] == 0.0 && num != 0.0 {
            return Err(SpectralError::Construction(format!("ψ_h vanishes at node {i}")));
        }
        a.push(if num == 0.0 { 0.0 } else { num / psi[i] });
    }
    let scale = w1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let on_omega = (k0..=k1).map(|i| w1[i].abs()).fold(0.0, f64::max) / scale;
    let mut w = Vec::with_capacity(2 * (cells - 1));
    for i in 1..cells {
        w.push(w1[i]);
        w.push(-psi[i]);
    }
    let norm = norm2(&w) * h.sqrt();
    w.iter_mut().for_each(|v| *v /= norm);
    Ok(DiscreteWitness {
        cells,
        h,
        s_h: s,
        c,
        alpha,
        psi: psi[1..cells].to_vec(),
        a,
        w,
        w1_on_omega: on_omega,
    })
}

impl DiscreteWitness {
    /// Cascade system on `(0, π)` with control on `ω`; `a22` is the
    /// continuous potential, overridden node-wise by [`Self::discretize`].
    pub fn system(&self, data: &CounterexampleData, omega: &BoxDomain, horizon: f64) -> ParabolicSystem {
        let domain = BoxDomain { lo: vec![0.0], hi: vec![PI] };
        cascade_system(&domain, omega, data.a.clone(), horizon)
    }

    pub fn discretize(&self, sys: &ParabolicSystem, steps: usize, theta: f64) -> Result<DiscreteSystem, SpectralError> {
        let grid = Grid::new(&sys.domain, &[self.cells], sys.horizon, steps)?;
        Ok(discretize_with_potential(sys, &grid, theta, Some(&self.a))?)
    }

    /// Eigenvalue of `Sᵀ` carried by `w`: `(1 − (1−θ)Δt s)/(1 + θΔt s)`.
    pub fn step_eigenvalue(&self, ds: &DiscreteSystem) -> f64 {
        let mu = -self.s_h;
        let dt = ds.grid.dt;
        (1.0 + (1.0 - ds.theta) * dt * mu) / (1.0 - ds.theta * dt * mu)
    }

    /// `(‖Sᵀw − λw‖, max_n ‖Bᵀ_n w‖)`, both relative to `‖w‖`, one control.
    pub fn verify(&self, ds: &DiscreteSystem) -> (f64, f64) {
        let lambda = self.step_eigenvalue(ds);
        let sw = ds.apply_s_transpose(&self.w);
        let nw = norm2(&self.w);
        let eig = sw.iter().zip(&self.w).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt() / nw;
        let vis = (0..ds.grid.steps)
            .filter(|&n| ds.active_steps[n])
            .map(|n| norm2(&ds.apply_b_transpose(&self.w, ControlMode::OneControl, n)))
            .fold(0.0, f64::max)
            / nw;
        (eig, vis)
    }
}
