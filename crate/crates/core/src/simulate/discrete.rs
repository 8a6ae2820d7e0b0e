//! Central finite differences in space, implicit θ-scheme in time.
//!
//! The state interleaves the components node by node, `[y1(0), y2(0), y1(1), ...]`,
//! which keeps the system matrix banded. One step reads
//!
//! ```text
//! (I − θΔt A) y⁺ = (I + (1−θ)Δt A) y + Δt χ u
//! ```
//!
//! so `S = (I − θΔtA)⁻¹(I + (1−θ)ΔtA)` and `B = Δt (I − θΔtA)⁻¹ χ`.

use serde::{Deserialize, Serialize};

use super::{Grid, SimError};
use crate::linalg::{BandLu, Csr};
use crate::symbolic::{differentiate, Expr, Tape, Workspace};
use crate::system::{ParabolicSystem, Window};

/// Which equations the control acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// Both equations, as in the first step of the fictitious control method.
    TwoControl,
    /// Equation 1 only, the system of interest.
    OneControl,
}

pub struct DiscreteSystem {
    pub grid: Grid,
    pub theta: f64,
    /// Spatial operator on the interleaved state.
    pub a: Csr,
    explicit: Csr,
    implicit: BandLu,
    /// Mollified indicator of the spatial control region, per node.
    pub mask: Vec<f64>,
    /// Time levels `n` whose step `n → n+1` carries a control.
    pub active_steps: Vec<bool>,
}

/// Cubic smoothstep clamped to `[0, 1]`.
fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Indicator of `(lo, hi)` mollified over two cells inside the interval.
pub fn mollified_indicator(x: f64, lo: f64, hi: f64, h: f64) -> f64 {
    smoothstep((x - lo) / (2.0 * h)) * smoothstep((hi - x) / (2.0 * h))
}

pub fn discretize(sys: &ParabolicSystem, grid: &Grid, theta: f64) -> Result<DiscreteSystem, SimError> {
    discretize_with_potential(sys, grid, theta, None)
}

/// As [`discretize`], with the zero-order coefficient of equation 2 given
/// node by node instead of sampled from `a22`.
pub fn discretize_with_potential(
    sys: &ParabolicSystem,
    grid: &Grid,
    theta: f64,
    a22_nodal: Option<&[f64]>,
) -> Result<DiscreteSystem, SimError> {
    if !(theta >= 0.5 && theta <= 1.0) {
        return Err(SimError::Unsupported(format!("θ = {theta} outside [1/2, 1]")));
    }
    if sys.dimension != grid.dimension {
        return Err(SimError::Grid(format!("system is {}D, grid {}D", sys.dimension, grid.dimension)));
    }
    if !sys.is_time_independent() {
        return Err(SimError::Unsupported("time-dependent coefficients".into()));
    }
    if let Some(a) = a22_nodal {
        if a.len() != grid.nodes() {
            return Err(SimError::Shape { expected: grid.nodes(), found: a.len() });
        }
    }
    let a = assemble_operator(sys, grid, a22_nodal)?;
    let dt = grid.dt;
    let explicit = a.shifted(1.0, (1.0 - theta) * dt);
    let implicit = BandLu::factor(&a.shifted(1.0, -theta * dt))
        .map_err(|e| SimError::Singular(format!("implicit matrix, column {}", e.column)))?;
    let mask = control_mask(grid, &sys.control_window)?;
    let (t0, t1) = (sys.control_window.lo[0], sys.control_window.hi[0]);
    let active_steps = (0..grid.steps)
        .map(|n| {
            let tm = (n as f64 + 0.5) * dt;
            tm > t0 && tm < t1
        })
        .collect();
    Ok(DiscreteSystem { grid: grid.clone(), theta, a, explicit, implicit, mask, active_steps })
}

fn control_mask(grid: &Grid, window: &Window) -> Result<Vec<f64>, SimError> {
    let n = grid.dimension;
    if window.dims() != n + 1 {
        return Err(SimError::Grid(format!("control window has {} coordinates, expected {}", window.dims(), n + 1)));
    }
    for axis in 0..n {
        let (lo, hi) = (window.lo[axis + 1], window.hi[axis + 1]);
        let count = (1..grid.cells[axis])
            .filter(|&k| mollified_indicator(grid.coord(axis, k), lo, hi, grid.h[axis]) > 0.0)
            .count();
        if count < 8 {
            return Err(SimError::Grid(format!("only {count} nodes inside the control window along x{}", axis + 1)));
        }
    }
    Ok((0..grid.nodes())
        .map(|node| {
            let x = grid.node_coords(node);
            (0..n).map(|i| mollified_indicator(x[i], window.lo[i + 1], window.hi[i + 1], grid.h[i])).product()
        })
        .collect())
}

/// Per-equation coefficient layout in the compiled tape.
struct Layout {
    n: usize,
}

impl Layout {
    fn diffusion(&self, eq: usize, i: usize, j: usize) -> usize {
        eq * self.n * self.n + i * self.n + j
    }
    /// Drift of equation `eq` acting on component `c`.
    fn drift(&self, eq: usize, c: usize, i: usize) -> usize {
        2 * self.n * self.n + (2 * eq + c) * self.n + i
    }
    fn zero_order(&self, eq: usize, c: usize) -> usize {
        2 * self.n * self.n + 4 * self.n + 2 * eq + c
    }
    fn len(&self) -> usize {
        2 * self.n * self.n + 4 * self.n + 4
    }
}

fn coefficient_exprs(sys: &ParabolicSystem) -> Vec<Expr> {
    let n = sys.dimension;
    let lay = Layout { n };
    let mut e = vec![Expr::zero(); lay.len()];
    let ds = [&sys.d1, &sys.d2];
    let gs = [[&sys.g11, &sys.g12], [&sys.g21, &sys.g22]];
    let azs = [[&sys.a11, &sys.a12], [&sys.a21, &sys.a22]];
    for eq in 0..2 {
        for i in 0..n {
            for j in 0..n {
                e[lay.diffusion(eq, i, j)] = ds[eq][i][j].clone();
            }
        }
        for c in 0..2 {
            for j in 0..n {
                let mut b = gs[eq][c][j].clone();
                if c == eq {
                    // non-divergence form: Div(d∇y) = d:∇²y + (Div d)·∇y
                    for i in 0..n {
                        b = &b + &differentiate(&ds[eq][i][j], i + 1);
                    }
                }
                e[lay.drift(eq, c, j)] = b;
            }
            e[lay.zero_order(eq, c)] = azs[eq][c].clone();
        }
    }
    e
}

fn assemble_operator(sys: &ParabolicSystem, grid: &Grid, a22_nodal: Option<&[f64]>) -> Result<Csr, SimError> {
    let n = grid.dimension;
    let lay = Layout { n };
    let tape = Tape::compile(&coefficient_exprs(sys));
    let mut ws = Workspace::default();
    let mut c = vec![0.0; lay.len()];
    let mut trip = Vec::new();
    let unit = |axis: usize, s: isize| -> [isize; 2] {
        let mut o = [0isize; 2];
        o[axis] = s;
        o
    };
    for node in 0..grid.nodes() {
        let mut p = vec![0.0];
        p.extend(grid.node_coords(node));
        tape.eval_into(&p, &mut ws, &mut c)?;
        if let Some(a) = a22_nodal {
            c[lay.zero_order(1, 1)] = a[node];
        }
        let m = grid.node_multi(node);
        let here = [m[0] as isize, m[1] as isize];
        let at = |off: [isize; 2]| grid.node_at([here[0] + off[0], here[1] + off[1]]);
        for eq in 0..2 {
            let row = 2 * node + eq;
            let mut push = |off: [isize; 2], comp: usize, v: f64| {
                if v != 0.0 {
                    if let Some(k) = at(off) {
                        trip.push((row, 2 * k + comp, v));
                    }
                }
            };
            for i in 0..n {
                let h = grid.h[i];
                let dii = c[lay.diffusion(eq, i, i)];
                push(unit(i, 1), eq, dii / (h * h));
                push(unit(i, -1), eq, dii / (h * h));
                push([0, 0], eq, -2.0 * dii / (h * h));
            }
            if n == 2 {
                let dx = c[lay.diffusion(eq, 0, 1)] + c[lay.diffusion(eq, 1, 0)];
                let w = dx / (4.0 * grid.h[0] * grid.h[1]);
                push([1, 1], eq, w);
                push([-1, -1], eq, w);
                push([1, -1], eq, -w);
                push([-1, 1], eq, -w);
            }
            for comp in 0..2 {
                for i in 0..n {
                    let b = c[lay.drift(eq, comp, i)] / (2.0 * grid.h[i]);
                    push(unit(i, 1), comp, b);
                    push(unit(i, -1), comp, -b);
                }
                push([0, 0], comp, c[lay.zero_order(eq, comp)]);
            }
        }
    }
    Ok(Csr::from_triplets(grid.state_len(), &trip))
}

impl DiscreteSystem {
    pub fn state_len(&self) -> usize {
        self.grid.state_len()
    }

    /// Control weights in state layout: mask on equation 1, and on equation
    /// 2 only with two controls.
    pub fn actuator(&self, mode: ControlMode, comp: usize, node: usize) -> f64 {
        match (mode, comp) {
            (_, 0) | (ControlMode::TwoControl, 1) => self.mask[node],
            _ => 0.0,
        }
    }

    /// `y ↦ S y + B u` (`u = None` for the free step); returns the new state.
    pub fn step(&self, y: &[f64], u: Option<(&[f64], ControlMode)>, n: usize) -> Vec<f64> {
        let mut rhs = vec![0.0; y.len()];
        self.explicit.mul_into(y, &mut rhs);
        if let Some((u, mode)) = u {
            if self.active_steps[n] {
                let dt = self.grid.dt;
                for (k, r) in rhs.iter_mut().enumerate() {
                    *r += dt * self.actuator(mode, k % 2, k / 2) * u[k];
                }
            }
        }
        self.implicit.solve_in_place(&mut rhs);
        rhs
    }

    /// Step with a general forcing `θ f⁺ + (1−θ) f` (no mask).
    pub fn step_forced(&self, y: &[f64], f_now: &[f64], f_next: &[f64]) -> Vec<f64> {
        let mut rhs = vec![0.0; y.len()];
        self.explicit.mul_into(y, &mut rhs);
        let (th, dt) = (self.theta, self.grid.dt);
        for k in 0..rhs.len() {
            rhs[k] += dt * (th * f_next[k] + (1.0 - th) * f_now[k]);
        }
        self.implicit.solve_in_place(&mut rhs);
        rhs
    }

    pub fn apply_s(&self, y: &[f64]) -> Vec<f64> {
        self.step(y, None, 0)
    }

    pub fn apply_s_transpose(&self, q: &[f64]) -> Vec<f64> {
        let mut w = q.to_vec();
        self.implicit.solve_transpose_in_place(&mut w);
        let mut out = vec![0.0; q.len()];
        self.explicit.mul_transpose_into(&w, &mut out);
        out
    }

    pub fn apply_b(&self, u: &[f64], mode: ControlMode, n: usize) -> Vec<f64> {
        let zero = vec![0.0; u.len()];
        self.step(&zero, Some((u, mode)), n)
    }

    /// `Bᵀ q` for the step starting at level `n`.
    pub fn apply_b_transpose(&self, q: &[f64], mode: ControlMode, n: usize) -> Vec<f64> {
        if !self.active_steps[n] {
            return vec![0.0; q.len()];
        }
        let mut w = q.to_vec();
        self.implicit.solve_transpose_in_place(&mut w);
        let dt = self.grid.dt;
        w.iter_mut().enumerate().for_each(|(k, v)| *v *= dt * self.actuator(mode, k % 2, k / 2));
        w
    }

    /// Grid values of a pair of expressions at time level `n`, interleaved.
    pub fn sample(&self, fields: &[Expr; 2], n: usize) -> Result<Vec<f64>, SimError> {
        let tape = Tape::compile(fields);
        let mut ws = Workspace::default();
        let mut out = vec![0.0; self.state_len()];
        let mut v = [0.0; 2];
        for node in 0..self.grid.nodes() {
            tape.eval_into(&self.grid.point(n, node), &mut ws, &mut v)?;
            out[2 * node] = v[0];
            out[2 * node + 1] = v[1];
        }
        Ok(out)
    }

    /// `h^N Σ a·b`, the discrete L²(Ω) product.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.grid.cell_volume() * crate::linalg::dot(a, b)
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }
}
