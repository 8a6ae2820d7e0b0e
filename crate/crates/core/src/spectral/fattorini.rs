//! Fattorini-type tests on discretized adjoint eigenproblems: a nontrivial
//! eigenfunction that the control cannot see obstructs approximate
//! controllability.
//!
//! - single: `−Δh φ − a φ = s φ` with Dirichlet data, test `∂x1 φ` on a window;
//! - coupled: eigenvectors of `Aᵀ` for the cascade operator `A` assembled by
//!   `simulate`, test the controlled component on the actuator support.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{BlendedPotential, SpectralError};
use crate::linalg::{dot, norm2, BandLu, Csr};
use crate::simulate::{DiscreteSystem, Grid};
use crate::symbolic::{Expr, Tape};
use crate::system::BoxDomain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FattoriniMode {
    Single,
    Coupled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Obstruction {
    Obstructed,
    NoObstructionFound,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FattoriniOptions {
    /// Eigenpairs examined (lowest for single, closest to 0 for coupled).
    pub pairs: usize,
    /// Eigen-residual bound, relative to the operator's ∞-norm.
    pub residual_tol: f64,
    /// Bound on the window quantity of a unit eigenvector.
    pub vanish_tol: f64,
    /// Inverse-iteration sweeps after the dense solve.
    pub refine: usize,
}

impl Default for FattoriniOptions {
    fn default() -> Self {
        FattoriniOptions { pairs: 8, residual_tol: 1e-10, vanish_tol: 1e-12, refine: 2 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairReport {
    /// `s` in `−Δφ − aφ = sφ` (single) or `−μ` for `Aᵀw = μw` (coupled).
    pub eigenvalue: f64,
    pub residual: f64,
    /// `max |∂x1 φ|` on the window (single) or `max |w1|` on the actuator support (coupled).
    pub vanishing: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FattoriniReport {
    pub mode: FattoriniMode,
    pub nodes: usize,
    pub pairs: Vec<PairReport>,
    pub verdict: Obstruction,
    /// Index into `pairs` of the first qualifying eigenpair.
    pub witness: Option<usize>,
    pub residual_tol: f64,
    pub vanish_tol: f64,
}

fn verdict(pairs: &[PairReport], opts: &FattoriniOptions) -> (Obstruction, Option<usize>) {
    let hit = pairs.iter().position(|p| {
        p.residual <= opts.residual_tol && p.vanishing <= opts.vanish_tol && (p.norm - 1.0).abs() <= 1e-12
    });
    (if hit.is_some() { Obstruction::Obstructed } else { Obstruction::NoObstructionFound }, hit)
}

/// `−Δh` with homogeneous Dirichlet data on the interior nodes.
pub fn dirichlet_laplacian(grid: &Grid) -> Csr {
    let mut t = Vec::new();
    for node in 0..grid.nodes() {
        let m = grid.node_multi(node);
        let here = [m[0] as isize, m[1] as isize];
        for axis in 0..grid.dimension {
            let w = 1.0 / (grid.h[axis] * grid.h[axis]);
            t.push((node, node, 2.0 * w));
            for s in [-1isize, 1] {
                let mut o = here;
                o[axis] += s;
                if let Some(k) = grid.node_at(o) {
                    t.push((node, k, -w));
                }
            }
        }
    }
    Csr::from_triplets(grid.nodes(), &t)
}

/// `a` sampled at the interior nodes.
pub fn sample_potential(a: &Expr, grid: &Grid) -> Result<Vec<f64>, SpectralError> {
    let tape = Tape::single(a);
    (0..grid.nodes()).map(|k| Ok(tape.eval1(&grid.point(0, k))?)).collect()
}

/// Node-wise potential for which the nodal `φ` of a blended potential is an
/// exact eigenvector of `−Δh − a_h`, eigenvalue `Σ (4/h²) sin²(πh/2L)`.
pub fn consistent_potential(bp: &BlendedPotential, grid: &Grid) -> Result<Vec<f64>, SpectralError> {
    let n = grid.dimension;
    let len: Vec<f64> = (0..n).map(|i| grid.hi[i] - grid.lo[i]).collect();
    let lambda_h: f64 =
        (0..n).map(|i| 4.0 / grid.h[i].powi(2) * (std::f64::consts::PI * grid.h[i] / (2.0 * len[i])).sin().powi(2)).sum();
    let phi = sample_potential(&bp.phi, grid)?;
    // deviation from the first eigenfunction, which −Δh maps to λ_h φ1
    let dev: Vec<f64> = (0..grid.nodes())
        .map(|k| {
            let x = grid.node_coords(k);
            let phi1: f64 =
                (0..n).map(|i| (std::f64::consts::PI * (x[i] - grid.lo[i]) / len[i]).sin()).product();
            phi[k] - phi1
        })
        .collect();
    let lap = dirichlet_laplacian(grid);
    let mut ld = vec![0.0; dev.len()];
    lap.mul_into(&dev, &mut ld);
    (0..grid.nodes())
        .map(|k| {
            let num = ld[k] - lambda_h * dev[k];
            if num == 0.0 {
                Ok(0.0)
            } else if phi[k] > 0.0 {
                Ok(num / phi[k])
            } else {
                Err(SpectralError::Construction(format!("φ = {} at node {k}", phi[k])))
            }
        })
        .collect()
}

fn inf_norm(m: &Csr) -> f64 {
    let mut rows = vec![0.0; m.dim()];
    for (i, _, v) in m.entries() {
        rows[i] += v.abs();
    }
    rows.into_iter().fold(0.0, f64::max)
}

fn residual(m: &Csr, v: &[f64], s: f64) -> f64 {
    let mut mv = vec![0.0; v.len()];
    m.mul_into(v, &mut mv);
    mv.iter().zip(v).map(|(a, b)| (a - s * b).powi(2)).sum::<f64>().sqrt() / norm2(v)
}

/// Shifted inverse iteration from a dense eigenpair; keeps the input if the
/// shifted matrix happens to be singular to working precision.
fn refine(m: &Csr, s: f64, v: &mut Vec<f64>, sweeps: usize) -> f64 {
    let mut s = s;
    for _ in 0..sweeps {
        let delta = 1e-9 * s.abs().max(1.0);
        let Ok(lu) = BandLu::factor(&m.shifted(-(s - delta), 1.0)) else { break };
        let mut x = v.clone();
        lu.solve_in_place(&mut x);
        let nx = norm2(&x);
        if !nx.is_finite() || nx == 0.0 {
            break;
        }
        x.iter_mut().for_each(|e| *e /= nx);
        let mut mx = vec![0.0; x.len()];
        m.mul_into(&x, &mut mx);
        s = dot(&x, &mx);
        *v = x;
    }
    s
}

fn window_nodes(grid: &Grid, window: &BoxDomain) -> Vec<usize> {
    (0..grid.nodes())
        .filter(|&k| {
            let x = grid.node_coords(k);
            (0..grid.dimension).all(|i| x[i] >= window.lo[i] && x[i] <= window.hi[i])
        })
        .collect()
}

/// Single mode: lowest eigenpairs of `−Δh − a`, `∂x1 φ` by central
/// differences on the nodes whose `x1`-neighbours also lie in `window`.
pub fn fattorini_check(
    grid: &Grid,
    potential: &[f64],
    window: &BoxDomain,
    opts: &FattoriniOptions,
) -> Result<FattoriniReport, SpectralError> {
    let n = grid.nodes();
    if potential.len() != n {
        return Err(SpectralError::Construction(format!("{} potential values for {n} nodes", potential.len())));
    }
    let lap = dirichlet_laplacian(grid);
    let mut t: Vec<_> = lap.entries().collect();
    t.extend(potential.iter().enumerate().map(|(k, &a)| (k, k, -a)));
    let m = Csr::from_triplets(n, &t);
    let scale = inf_norm(&m);

    let rows = m.to_dense();
    let dense = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let eig = SymmetricEigen::try_new(dense, 1e-15, 10_000)
        .ok_or_else(|| SpectralError::Eigen("symmetric QR did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let vol = grid.cell_volume();
    let h0 = grid.h[0];
    let probe: Vec<(usize, usize)> = window_nodes(grid, window)
        .into_iter()
        .filter_map(|k| {
            let mi = grid.node_multi(k);
            let l = grid.node_at([mi[0] as isize - 1, mi[1] as isize])?;
            let r = grid.node_at([mi[0] as isize + 1, mi[1] as isize])?;
            let inside = |j: usize| {
                let x = grid.node_coords(j);
                x[0] >= window.lo[0] && x[0] <= window.hi[0]
            };
            (inside(l) && inside(r)).then_some((l, r))
        })
        .collect();
    if probe.is_empty() {
        return Err(SpectralError::Construction("grid does not resolve the window".into()));
    }

    let mut pairs = Vec::new();
    for &j in order.iter().take(opts.pairs.min(n)) {
        let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
        let s = refine(&m, eig.eigenvalues[j], &mut v, opts.refine);
        let unit = (vol * dot(&v, &v)).sqrt();
        v.iter_mut().for_each(|e| *e /= unit);
        let vanishing = probe.iter().map(|&(l, r)| ((v[r] - v[l]) / (2.0 * h0)).abs()).fold(0.0, f64::max);
        pairs.push(PairReport {
            eigenvalue: s,
            residual: residual(&m, &v, s) / scale,
            vanishing,
            norm: (vol * dot(&v, &v)).sqrt(),
        });
    }
    let (verdict, witness) = verdict(&pairs, opts);
    Ok(FattoriniReport {
        mode: FattoriniMode::Single,
        nodes: n,
        pairs,
        verdict,
        witness,
        residual_tol: opts.residual_tol,
        vanish_tol: opts.vanish_tol,
    })
}

/// Eigenvector of `Aᵀ` in the interleaved layout.
#[derive(Clone, Debug)]
pub struct AdjointCandidate {
    pub mu: f64,
    /// Unit discrete L² norm.
    pub w: Vec<f64>,
    /// `‖Aᵀw − μw‖ / ‖A‖∞`.
    pub residual: f64,
    /// `‖χ w1‖` with `χ` the control mask.
    pub visibility: f64,
    /// `max |w1|` on nodes where the mask is positive.
    pub on_support: f64,
}

fn block(a: &Csr, n: usize, r: usize, c: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (i, j, v) in a.entries() {
        if i % 2 == r && j % 2 == c {
            m[(i / 2, j / 2)] += v;
        }
    }
    m
}

fn symmetric_eigen(m: DMatrix<f64>, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>, SpectralError> {
    let asym = (&m - m.transpose()).amax();
    if asym > 1e-12 * m.amax() {
        return Err(SpectralError::Eigen(format!("{what} is not symmetric ({asym:e})")));
    }
    SymmetricEigen::try_new(m, 1e-15, 10_000).ok_or_else(|| SpectralError::Eigen(format!("{what}: no convergence")))
}

/// Eigenvectors of `Aᵀ` for a cascade operator (`A12 = 0`, symmetric
/// diagonal blocks): for the `pairs` eigenvalues `μ` of `A22` closest to 0,
/// `w2` is the eigenvector and `w1` solves `(A11ᵀ − μ)w1 = −A21ᵀw2`, the
/// kernel component chosen to minimize `‖χw1‖`; plus the `w2 = 0` family
/// from `A11`.
pub fn adjoint_eigen_sweep(ds: &DiscreteSystem, pairs: usize) -> Result<Vec<AdjointCandidate>, SpectralError> {
    let n = ds.grid.nodes();
    let a = &ds.a;
    if a.entries().any(|(i, j, v)| i % 2 == 0 && j % 2 == 1 && v != 0.0) {
        return Err(SpectralError::Eigen("not a cascade: equation 1 sees component 2".into()));
    }
    let a11 = block(a, n, 0, 0);
    let a21 = block(a, n, 1, 0);
    let a22 = block(a, n, 1, 1);
    let e11 = symmetric_eigen(a11, "A11")?;
    let e22 = symmetric_eigen(a22, "A22")?;
    let scale = inf_norm(a);
    let chi = DVector::from_iterator(n, (0..n).map(|k| ds.mask[k]));
    let vol = ds.grid.cell_volume();

    let closest = |vals: &DVector<f64>| {
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        idx.sort_by(|&x, &y| vals[x].abs().total_cmp(&vals[y].abs()));
        idx.truncate(pairs.min(vals.len()));
        idx
    };
    let finish = |mu: f64, w1: DVector<f64>, w2: DVector<f64>| {
        let mut w = Vec::with_capacity(2 * n);
        for k in 0..n {
            w.push(w1[k]);
            w.push(w2[k]);
        }
        let unit = (vol * dot(&w, &w)).sqrt();
        w.iter_mut().for_each(|e| *e /= unit);
        let mut atw = vec![0.0; 2 * n];
        a.mul_transpose_into(&w, &mut atw);
        let res = atw.iter().zip(&w).map(|(p, q)| (p - mu * q).powi(2)).sum::<f64>().sqrt() / norm2(&w) / scale;
        let vis = (vol * (0..n).map(|k| (chi[k] * w[2 * k]).powi(2)).sum::<f64>()).sqrt();
        let on = (0..n).filter(|&k| chi[k] > 0.0).map(|k| w[2 * k].abs()).fold(0.0, f64::max);
        AdjointCandidate { mu, w, residual: res, visibility: vis, on_support: on }
    };

    let q = &e11.eigenvectors;
    let gap_tol = 1e-9 * scale;
    let mut out = Vec::new();
    for j in closest(&e22.eigenvalues) {
        let mu = e22.eigenvalues[j];
        let w2 = e22.eigenvectors.column(j).into_owned();
        let rhs = -(a21.transpose() * &w2);
        let coef = q.transpose() * rhs;
        let mut particular = DVector::zeros(n);
        let mut kernel = Vec::new();
        for k in 0..n {
            let d = e11.eigenvalues[k] - mu;
            if d.abs() <= gap_tol {
                kernel.push(k);
            } else {
                particular += q.column(k) * (coef[k] / d);
            }
        }
        // min ‖χ (p + K c)‖ over the kernel coefficients
        let mut w1 = particular.clone();
        if !kernel.is_empty() {
            let kmat = DMatrix::from_fn(n, kernel.len(), |r, c| chi[r] * q[(r, kernel[c])]);
            let target = -particular.component_mul(&chi);
            if let Ok(c) = kmat.clone().svd(true, true).solve(&target, 1e-14) {
                for (i, &k) in kernel.iter().enumerate() {
                    w1 += q.column(k) * c[i];
                }
            }
        }
        out.push(finish(mu, w1, w2));
    }
    for j in closest(&e11.eigenvalues) {
        let w1 = e11.eigenvectors.column(j).into_owned();
        out.push(finish(e11.eigenvalues[j], w1, DVector::zeros(n)));
    }
    Ok(out)
}

/// Coupled mode: the sweep above summarized as a report; `vanishing` is
/// `max |w1|` on the actuator support.
pub fn fattorini_coupled(ds: &DiscreteSystem, opts: &FattoriniOptions) -> Result<FattoriniReport, SpectralError> {
    let cands = adjoint_eigen_sweep(ds, opts.pairs)?;
    let vol = ds.grid.cell_volume();
    let pairs: Vec<PairReport> = cands
        .iter()
        .map(|c| PairReport {
            eigenvalue: -c.mu,
            residual: c.residual,
            vanishing: c.on_support,
            norm: (vol * dot(&c.w, &c.w)).sqrt(),
        })
        .collect();
    let (verdict, witness) = verdict(&pairs, opts);
    Ok(FattoriniReport {
        mode: FattoriniMode::Coupled,
        nodes: ds.grid.nodes(),
        pairs,
        verdict,
        witness,
        residual_tol: opts.residual_tol,
        vanish_tol: opts.vanish_tol,
    })
}
