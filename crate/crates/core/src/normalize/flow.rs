//! Characteristic flow of the coupling field `g21`, started on a base
//! segment `γ = {x1 = c}` and tabulated with its variational equation.

use std::io::Write;
use std::sync::Arc;

use ode_solvers::{DVector, Dopri5, System};
use serde::{Deserialize, Serialize};

use super::spline::{Axis, Hermite, NodeData};
use super::NormalizeError;
use crate::symbolic::{Differentiator, Expr, Tape, Workspace};

/// `γ = {x1 = x1} × (z_lo, z_hi)` (the `z` range is ignored for `N = 1`).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BaseSegment {
    pub x1: f64,
    pub z_lo: f64,
    pub z_hi: f64,
}

/// Position, Jacobian `J[i][a] = ∂x_i/∂ξ_a` and its derivatives
/// `dj[c][i][a] = ∂ξ_c J[i][a]` at a point `ξ = (s, z)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Chart {
    pub x: [f64; 2],
    pub j: [[f64; 2]; 2],
    pub dj: [[[f64; 2]; 2]; 2],
}

impl Chart {
    pub fn det(&self, n: usize) -> f64 {
        if n == 1 {
            self.j[0][0]
        } else {
            self.j[0][0] * self.j[1][1] - self.j[0][1] * self.j[1][0]
        }
    }

    /// `K = J⁻¹`.
    pub fn inverse(&self, n: usize) -> [[f64; 2]; 2] {
        let det = self.det(n);
        if n == 1 {
            [[1.0 / det, 0.0], [0.0, 0.0]]
        } else {
            [[self.j[1][1] / det, -self.j[0][1] / det], [-self.j[1][0] / det, self.j[0][0] / det]]
        }
    }
}

/// Tabulated `Λ(s, z) = Φ(s, F(z))`, `F(z) = (c, z)`.
#[derive(Clone, Debug)]
pub struct FlowMap {
    pub n: usize,
    pub base: BaseSegment,
    pub extent: f64,
    components: Vec<Hermite>,
}

struct Field {
    n: usize,
    g: Arc<Tape>,
    dg: Arc<Tape>,
}

impl Field {
    fn new(g21: &[Expr]) -> Field {
        let n = g21.len();
        let mut d = Differentiator::new();
        let dg: Vec<Expr> = (0..n).flat_map(|i| (0..n).map(move |k| (i, k))).map(|(i, k)| d.diff(&g21[i], k + 1)).collect();
        Field { n, g: Arc::new(Tape::compile(g21)), dg: Arc::new(Tape::compile(&dg)) }
    }

    fn point(&self, x: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n + 1];
        p[1..].copy_from_slice(&x[..self.n]);
        p
    }

    /// `g(x)` and `Dg(x)` (row-major).
    fn eval(&self, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let p = self.point(x);
        let mut ws = Workspace::default();
        let mut g = vec![0.0; self.n];
        let mut dg = vec![0.0; self.n * self.n];
        self.g.eval_into(&p, &mut ws, &mut g).ok()?;
        self.dg.eval_into(&p, &mut ws, &mut dg).ok()?;
        Some((g, dg))
    }
}

/// State `(x, ∂z x)`: the flow and its variational equation.
struct FlowOde<'a>(&'a Field);

impl System<f64, DVector<f64>> for FlowOde<'_> {
    fn system(&self, _s: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let n = self.0.n;
        let Some((g, dg)) = self.0.eval(y.as_slice()) else {
            dy.fill(f64::NAN);
            return;
        };
        for i in 0..n {
            dy[i] = g[i];
            if n == 2 {
                dy[n + i] = (0..n).map(|k| dg[i * n + k] * y[n + k]).sum();
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FlowOptions {
    pub ode_tol: f64,
    pub s_cells: usize,
    pub z_cells: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { ode_tol: 1e-9, s_cells: 64, z_cells: 64 }
    }
}

impl FlowMap {
    /// Integrates the flow of `g21` (time-independent) over `s ∈ [0, extent]`.
    pub fn tabulate(g21: &[Expr], base: &BaseSegment, extent: f64, opts: &FlowOptions) -> Result<FlowMap, NormalizeError> {
        let n = g21.len();
        assert!(n == 1 || n == 2, "straightening is implemented for N ≤ 2");
        let field = Field::new(g21);
        let s_axis = Axis { lo: 0.0, hi: extent, cells: opts.s_cells };
        let z_axis = (n == 2).then(|| Axis { lo: base.z_lo, hi: base.z_hi, cells: opts.z_cells });
        let nz = z_axis.as_ref().map_or(1, |a| a.cells + 1);
        let ns = opts.s_cells + 1;
        let mut data = vec![vec![NodeData::default(); ns * nz]; n];
        for jz in 0..nz {
            let z = z_axis.as_ref().map_or(0.0, |a| a.node(jz));
            let mut y = DVector::from_vec(if n == 2 { vec![base.x1, z, 0.0, 1.0] } else { vec![base.x1] });
            for is in 0..ns {
                if is > 0 {
                    let (a, b) = (s_axis.node(is - 1), s_axis.node(is));
                    let mut solver = Dopri5::new(FlowOde(&field), a, b, b - a, y.clone(), opts.ode_tol, opts.ode_tol * 1e-2);
                    solver.integrate().map_err(|e| NormalizeError::Ode(e.to_string()))?;
                    y = solver.y_out().last().cloned().ok_or_else(|| NormalizeError::Ode("no output".into()))?;
                }
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(NormalizeError::Ode(format!("flow left the coefficient domain at s = {}", s_axis.node(is))));
                }
                let (g, dg) = field.eval(y.as_slice()).ok_or_else(|| NormalizeError::Ode("coupling field not evaluable".into()))?;
                for i in 0..n {
                    let node = &mut data[i][jz * ns + is];
                    node.f = y[i];
                    node.fs = g[i];
                    if n == 2 {
                        node.fz = y[n + i];
                        node.fsz = (0..n).map(|k| dg[i * n + k] * y[n + k]).sum();
                    }
                }
            }
        }
        let components = data.into_iter().map(|nodes| Hermite { s: s_axis.clone(), z: z_axis.clone(), nodes }).collect();
        Ok(FlowMap { n, base: base.clone(), extent, components })
    }

    /// `Λ`, `J`, `∂J` at `(s, z)`.
    pub fn chart(&self, s: f64, z: f64) -> Chart {
        let mut c = Chart::default();
        for (i, h) in self.components.iter().enumerate() {
            let d = h.eval(s, z);
            c.x[i] = d[0];
            c.j[i][0] = d[1];
            c.dj[0][i][0] = d[3];
            if self.n == 2 {
                c.j[i][1] = d[2];
                c.dj[1][i][0] = d[4];
                c.dj[0][i][1] = d[4];
                c.dj[1][i][1] = d[5];
            }
        }
        c
    }

    /// Minimum of `|det J|` over the tabulation nodes and the midpoints.
    pub fn min_abs_det(&self) -> f64 {
        let s = &self.components[0].s;
        let zs: Vec<f64> = match &self.components[0].z {
            Some(z) => (0..=2 * z.cells).map(|k| z.lo + 0.5 * k as f64 * z.h()).collect(),
            None => vec![0.0],
        };
        let mut m = f64::INFINITY;
        for k in 0..=2 * s.cells {
            for &z in &zs {
                m = m.min(self.chart(s.lo + 0.5 * k as f64 * s.h(), z).det(self.n).abs());
            }
        }
        m
    }

    /// Parameter box `(0, extent) × (z_lo, z_hi)`.
    pub fn parameter_box(&self) -> (Vec<f64>, Vec<f64>) {
        if self.n == 1 {
            (vec![0.0], vec![self.extent])
        } else {
            (vec![0.0, self.base.z_lo], vec![self.extent, self.base.z_hi])
        }
    }

    /// Samples `Λ` on the tabulation nodes.
    pub fn node_images(&self) -> Vec<[f64; 2]> {
        let s = &self.components[0].s;
        let zs: Vec<f64> = self.components[0].z.as_ref().map_or(vec![0.0], |z| (0..=z.cells).map(|k| z.node(k)).collect());
        zs.iter().flat_map(|&z| (0..=s.cells).map(move |k| (s.node(k), z))).map(|(s, z)| self.chart(s, z).x).collect()
    }

    /// `Λ⁻¹(x)` by Newton iteration from the nearest node.
    pub fn inverse(&self, x: &[f64]) -> Option<(f64, f64)> {
        let n = self.n;
        let s_axis = &self.components[0].s;
        let z_nodes: Vec<f64> = self.components[0].z.as_ref().map_or(vec![0.0], |z| (0..=z.cells).map(|k| z.node(k)).collect());
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for &z in &z_nodes {
            for k in 0..=s_axis.cells {
                let c = self.chart(s_axis.node(k), z);
                let d: f64 = (0..n).map(|i| (c.x[i] - x[i]).powi(2)).sum();
                if d < best.0 {
                    best = (d, s_axis.node(k), z);
                }
            }
        }
        let (mut s, mut z) = (best.1, best.2);
        for _ in 0..50 {
            let c = self.chart(s, z);
            let k = c.inverse(n);
            let r: Vec<f64> = (0..n).map(|i| c.x[i] - x[i]).collect();
            let ds: f64 = (0..n).map(|i| k[0][i] * r[i]).sum();
            let dz: f64 = if n == 2 { (0..n).map(|i| k[1][i] * r[i]).sum() } else { 0.0 };
            s -= ds;
            z -= dz;
            if ds.abs() + dz.abs() < 1e-14 * (1.0 + s.abs() + z.abs()) {
                return Some((s, z));
            }
        }
        let c = self.chart(s, z);
        ((0..n).map(|i| (c.x[i] - x[i]).abs()).fold(0.0, f64::max) < 1e-10).then_some((s, z))
    }

    /// CSV rows `t, s, z, x1, x2, det_j` on the tabulation nodes (the map
    /// does not depend on `t`; `t` is echoed).
    pub fn write_csv<W: Write>(&self, mut out: W, t: f64) -> std::io::Result<()> {
        writeln!(out, "t [time],s [length],z [length],x1 [length],x2 [length],det_j [1]")?;
        let s = &self.components[0].s;
        let zs: Vec<f64> = self.components[0].z.as_ref().map_or(vec![0.0], |z| (0..=z.cells).map(|k| z.node(k)).collect());
        for &z in &zs {
            for k in 0..=s.cells {
                let c = self.chart(s.node(k), z);
                writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", t, s.node(k), z, c.x[0], c.x[1], c.det(self.n))?;
            }
        }
        Ok(())
    }
}
