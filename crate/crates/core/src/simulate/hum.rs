//! Penalized HUM: minimize `J(u) = ½‖u‖² + (1/2ε)‖y(T)‖²` by conjugate
//! gradients on the normal equations `(I + ε⁻¹L♯L) u = −ε⁻¹L♯ y_free`,
//! where `L: u ↦ y(T)` from zero data and `L♯` is its adjoint for the
//! weighted products `‖u‖² = Δt hᴺ Σ|u|²`, `‖y‖² = hᴺ Σ|y|²`. Since `L♯` is
//! built from the exact transposes, the CG operator is symmetric and CG
//! decreases `J` monotonically.

use rayon::prelude::*;
use serde::Serialize;

use super::{solve_forward, ControlMode, DiscreteSystem, SimError};
use crate::linalg::dot;

#[derive(Clone, Debug, Serialize)]
pub struct HumResult {
    pub epsilon: f64,
    pub mode: ControlMode,
    #[serde(skip)]
    pub control: Vec<Vec<f64>>,
    #[serde(skip)]
    pub terminal_state: Vec<f64>,
    pub terminal_norm: f64,
    pub control_norm: f64,
    pub cost: f64,
    /// `J` after every iteration, starting from `u = 0`.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct HumOptions {
    pub cg_tol: f64,
    pub max_iter: usize,
}

impl Default for HumOptions {
    fn default() -> Self {
        HumOptions { cg_tol: 1e-10, max_iter: 2000 }
    }
}

type Control = Vec<Vec<f64>>;

/// `L u`: terminal state from zero data.
fn apply_l(ds: &DiscreteSystem, u: &Control, mode: ControlMode) -> Vec<f64> {
    let mut y = vec![0.0; ds.state_len()];
    for (n, un) in u.iter().enumerate() {
        y = ds.step(&y, Some((un, mode)), n);
    }
    y
}

/// `(L♯ q)_n = Δt⁻¹ Bᵀ (Sᵀ)^{K−1−n} q`.
fn apply_l_sharp(ds: &DiscreteSystem, q: &[f64], mode: ControlMode) -> Control {
    let k = ds.grid.steps;
    let mut out = vec![Vec::new(); k];
    let mut p = q.to_vec();
    let inv_dt = 1.0 / ds.grid.dt;
    for n in (0..k).rev() {
        let mut b = ds.apply_b_transpose(&p, mode, n);
        b.iter_mut().for_each(|v| *v *= inv_dt);
        out[n] = b;
        if n > 0 {
            p = ds.apply_s_transpose(&p);
        }
    }
    out
}

fn u_dot(ds: &DiscreteSystem, a: &Control, b: &Control) -> f64 {
    ds.grid.dt * ds.grid.cell_volume() * a.iter().zip(b).map(|(x, y)| dot(x, y)).sum::<f64>()
}

fn axpy(a: f64, x: &Control, y: &mut Control) {
    for (yn, xn) in y.iter_mut().zip(x) {
        yn.iter_mut().zip(xn).for_each(|(p, q)| *p += a * q);
    }
}

pub fn hum_control(
    ds: &DiscreteSystem,
    y0: &[f64],
    epsilon: f64,
    mode: ControlMode,
    opts: HumOptions,
) -> Result<HumResult, SimError> {
    if !(epsilon > 0.0) {
        return Err(SimError::Unsupported(format!("penalty ε = {epsilon} must be positive")));
    }
    let free = solve_forward(ds, y0, None)?;
    let y_free = free.terminal().to_vec();
    let hess = |v: &Control| -> Control {
        let lv = apply_l(ds, v, mode);
        let mut out = apply_l_sharp(ds, &lv, mode);
        for (o, vn) in out.iter_mut().zip(v) {
            o.iter_mut().zip(vn).for_each(|(p, q)| *p = q + *p / epsilon);
        }
        out
    };
    let mut b = apply_l_sharp(ds, &y_free, mode);
    b.iter_mut().for_each(|bn| bn.iter_mut().for_each(|v| *v /= -epsilon));
    let constant = 0.5 * ds.inner(&y_free, &y_free) / epsilon;

    let k = ds.grid.steps;
    let mut u: Control = vec![vec![0.0; ds.state_len()]; k];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = u_dot(ds, &r, &r);
    let r0 = rr.sqrt();
    let mut history = vec![constant];
    let mut iterations = 0;
    let mut converged = r0 == 0.0;
    while !converged && iterations < opts.max_iter {
        let hp = hess(&p);
        let php = u_dot(ds, &p, &hp);
        if !(php > 0.0) {
            break;
        }
        let alpha = rr / php;
        axpy(alpha, &p, &mut u);
        axpy(-alpha, &hp, &mut r);
        iterations += 1;
        // J(u) = const − ½⟨b + r, u⟩ for the current residual r = b − Hu
        let mut br = b.clone();
        axpy(1.0, &r, &mut br);
        history.push(constant - 0.5 * u_dot(ds, &br, &u));
        let rr_new = u_dot(ds, &r, &r);
        if rr_new.sqrt() <= opts.cg_tol * r0 {
            converged = true;
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pn, rn) in p.iter_mut().zip(&r) {
            pn.iter_mut().zip(rn).for_each(|(a, c)| *a = c + beta * *a);
        }
    }
    let traj = solve_forward(ds, y0, Some((&u, mode)))?;
    let y_t = traj.terminal().to_vec();
    let terminal_norm = ds.norm(&y_t);
    let control_norm = u_dot(ds, &u, &u).sqrt();
    Ok(HumResult {
        epsilon,
        mode,
        cost: 0.5 * control_norm * control_norm + 0.5 * terminal_norm * terminal_norm / epsilon,
        control: u,
        terminal_state: y_t,
        terminal_norm,
        control_norm,
        cost_history: history,
        iterations,
        converged,
    })
}

/// Independent solves over a list of penalties, in the given order.
pub fn hum_sweep(
    ds: &DiscreteSystem,
    y0: &[f64],
    epsilons: &[f64],
    mode: ControlMode,
    opts: HumOptions,
) -> Result<Vec<HumResult>, SimError> {
    epsilons.par_iter().map(|&e| hum_control(ds, y0, e, mode, opts)).collect()
}

/// Least-squares slope of `log ‖y(T)‖` against `log ε`.
pub fn loglog_slope(results: &[HumResult]) -> f64 {
    let pts: Vec<(f64, f64)> = results.iter().map(|r| (r.epsilon.ln(), r.terminal_norm.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
