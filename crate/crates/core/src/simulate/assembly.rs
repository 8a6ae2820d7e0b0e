//! Fictitious control assembly on manufactured data: `ŷ` solves the
//! two-control system with `û := L(ŷ, 0)`, `(z, v) := M(û)` solves
//! `L(z, v) = û`, and `(y, u) := (ŷ − z, −v)` solves the one-control system.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{discretize, DiscreteSystem, Grid, SimError};
use crate::solvability::{FullSolver, SystemOperators};
use crate::symbolic::{Differentiator, Expr, Tape, Workspace};
use crate::system::{ParabolicSystem, Window};

#[derive(Clone, Debug, Serialize)]
pub struct AssemblyLevel {
    pub cells: usize,
    pub h: f64,
    pub dt: f64,
    /// Max-norm truncation residual of the one-control scheme on `(y, u)`.
    pub residual_max: f64,
    /// Discrete `L²(Q_T)` norm of the same residual.
    pub residual_l2: f64,
    pub terminal_max: f64,
    /// Largest `|z|, |v|` at nodes outside `ω_T`.
    pub support_leak: f64,
    /// Largest `|u|` at nodes outside the spatial control region.
    pub control_leak: f64,
    pub initial_z_max: f64,
    pub terminal_z_max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AssemblyReport {
    pub levels: Vec<AssemblyLevel>,
    /// Observed orders between consecutive levels (max norm).
    pub orders: Vec<f64>,
    /// `max |L(y, u)|` at random points of `Q_T`, relative to the size of `û`.
    pub symbolic_residual: f64,
    pub support_ok: bool,
    pub terminal_max: f64,
}

/// `û = L(ŷ1, ŷ2, 0)`: the two-control forcing that `ŷ` solves exactly.
pub fn manufactured_controls(ops: &SystemOperators, y_hat: &[Expr; 2]) -> [Expr; 2] {
    let mut d = Differentiator::new();
    let u = ops.l.apply_with(&[y_hat[0].clone(), y_hat[1].clone(), Expr::zero()], &mut d);
    [u[0].clone(), u[1].clone()]
}

/// Fields `(y1, y2, u, z1, z2, v)` of the assembly.
pub fn assemble_fields(solver: &FullSolver, y_hat: &[Expr; 2], u_hat: &[Expr; 2]) -> [Expr; 6] {
    let mut d = Differentiator::new();
    let zv = solver.m.apply_with(&[u_hat[0].clone(), u_hat[1].clone()], &mut d);
    [
        &y_hat[0] - &zv[0],
        &y_hat[1] - &zv[1],
        zv[2].scale(-1.0),
        zv[0].clone(),
        zv[1].clone(),
        zv[2].clone(),
    ]
}

pub fn fictitious_assembly(
    sys: &ParabolicSystem,
    ops: &SystemOperators,
    solver: &FullSolver,
    y_hat: &[Expr; 2],
    cells: &[usize],
    theta: f64,
) -> Result<AssemblyReport, SimError> {
    let u_hat = manufactured_controls(ops, y_hat);
    let fields = assemble_fields(solver, y_hat, &u_hat);
    let symbolic_residual = symbolic_check(sys, ops, &fields, &u_hat)?;
    let tape = Tape::compile(&fields);
    let mut levels = Vec::new();
    for &c in cells {
        let grid = Grid::new(&sys.domain, &vec![c; sys.dimension], sys.horizon, c)?;
        let ds = discretize(sys, &grid, theta)?;
        levels.push(measure_level(&ds, &tape, &sys.control_window)?);
    }
    let orders = levels
        .windows(2)
        .map(|w| (w[0].residual_max / w[1].residual_max).ln() / (w[0].h / w[1].h).ln())
        .collect();
    let support_ok = levels.iter().all(|l| l.support_leak == 0.0 && l.control_leak == 0.0)
        && sys.control_window.contains(&solver.window);
    let terminal_max = levels.iter().map(|l| l.terminal_max).fold(0.0, f64::max);
    Ok(AssemblyReport { levels, orders, symbolic_residual, support_ok, terminal_max })
}

fn symbolic_check(sys: &ParabolicSystem, ops: &SystemOperators, fields: &[Expr; 6], u_hat: &[Expr; 2]) -> Result<f64, SimError> {
    let mut d = Differentiator::new();
    // one-control system: R1(y) − u = 0 and the second row of L on y
    let res = ops.l.apply_with(&[fields[0].clone(), fields[1].clone(), fields[2].clone()], &mut d);
    let mut all = res;
    all.extend(u_hat.iter().cloned());
    let tape = Tape::compile(&all);
    let mut rng = ChaCha8Rng::seed_from_u64(0xa55e);
    let st = sys.space_time();
    let window = Window::new(st.lo.clone(), st.hi.clone());
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let v = tape.eval(&window.random_point(&mut rng))?;
        worst = worst.max(v[0].abs()).max(v[1].abs());
        scale = scale.max(v[2].abs()).max(v[3].abs());
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

fn measure_level(ds: &DiscreteSystem, tape: &Tape, window: &Window) -> Result<AssemblyLevel, SimError> {
    let g = &ds.grid;
    let (len, nodes, k) = (g.state_len(), g.nodes(), g.steps);
    let mut ws = Workspace::default();
    let mut v = [0.0; 6];
    let mut y = vec![vec![0.0; len]; k + 1];
    let mut f = vec![vec![0.0; len]; k + 1];
    let (mut support_leak, mut control_leak, mut z0, mut zt) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for n in 0..=k {
        for node in 0..nodes {
            let p = g.point(n, node);
            tape.eval_into(&p, &mut ws, &mut v)?;
            y[n][2 * node] = v[0];
            y[n][2 * node + 1] = v[1];
            let in_space = (1..p.len()).all(|i| p[i] > window.lo[i] && p[i] < window.hi[i]);
            f[n][2 * node] = if in_space { v[2] } else { 0.0 };
            if !in_space {
                control_leak = control_leak.max(v[2].abs());
            }
            if !window.contains_point(&p) {
                support_leak = support_leak.max(v[3].abs()).max(v[4].abs()).max(v[5].abs());
            }
            let zmax = v[3].abs().max(v[4].abs());
            if n == 0 {
                z0 = z0.max(zmax);
            }
            if n == k {
                zt = zt.max(zmax);
            }
        }
    }
    let (th, dt) = (ds.theta, g.dt);
    let mut mid = vec![0.0; len];
    let mut ay = vec![0.0; len];
    let (mut rmax, mut r2) = (0.0f64, 0.0);
    for n in 0..k {
        for i in 0..len {
            mid[i] = th * y[n + 1][i] + (1.0 - th) * y[n][i];
        }
        ds.a.mul_into(&mid, &mut ay);
        for i in 0..len {
            let r = (y[n + 1][i] - y[n][i]) / dt - ay[i] - (th * f[n + 1][i] + (1.0 - th) * f[n][i]);
            rmax = rmax.max(r.abs());
            r2 += r * r;
        }
    }
    let terminal_max = y[k].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(AssemblyLevel {
        cells: g.cells[0],
        h: g.h[0],
        dt,
        residual_max: rmax,
        residual_l2: (r2 * dt * g.cell_volume()).sqrt(),
        terminal_max,
        support_leak,
        control_leak,
        initial_z_max: z0,
        terminal_z_max: zt,
    })
}
