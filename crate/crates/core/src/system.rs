//! Coefficient bundle of the two-equation system
//!
//! ```text
//! ∂t y1 = Div(d1∇y1) + g11·∇y1 + g12·∇y2 + a11 y1 + a12 y2 + 1_ω u
//! ∂t y2 = Div(d2∇y2) + g21·∇y1 + g22·∇y2 + a21 y1 + a22 y2
//! ```
//!
//! on a box `Ω ⊂ R^N` with Dirichlet conditions, plus the control window.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symbolic::{parse_with, EvalError, Expr, LinDiffOp, MultiIndex, ParseContext, ParseError, Tape, Workspace};

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("invalid system specification:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("ellipticity violated for d{which}: min ξ·dξ/|ξ|² = {found:e} < d0 = {d0:e} at {point:?}")]
    Ellipticity { which: usize, found: f64, d0: f64, point: Vec<f64> },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Axis-aligned open box in `(t, x1, ..., xN)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Window {
        assert_eq!(lo.len(), hi.len(), "window bounds of different lengths");
        assert!(lo.iter().zip(&hi).all(|(a, b)| a < b), "empty window {lo:?} {hi:?}");
        Window { lo, hi }
    }

    /// Number of coordinates (time included).
    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dims()).map(|i| self.width(i)).product()
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dims()).map(|i| self.width(i).powi(2)).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *x > *a && *x < *b)
    }

    /// Closed containment of another window.
    pub fn contains(&self, other: &Window) -> bool {
        (0..self.dims()).all(|i| other.lo[i] >= self.lo[i] && other.hi[i] <= self.hi[i])
    }

    /// Window shrunk by `fraction` of its width on every side.
    pub fn shrink(&self, fraction: f64) -> Window {
        let lo = (0..self.dims()).map(|i| self.lo[i] + fraction * self.width(i)).collect();
        let hi = (0..self.dims()).map(|i| self.hi[i] - fraction * self.width(i)).collect();
        Window::new(lo, hi)
    }

    /// Cell-centred sample coordinate `k` of `n` along `axis`.
    pub fn sample(&self, axis: usize, k: usize, n: usize) -> f64 {
        self.lo[axis] + (k as f64 + 0.5) * self.width(axis) / n as f64
    }

    /// Uniformly random interior point.
    pub fn random_point<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dims()).map(|i| rng.gen_range(self.lo[i]..self.hi[i])).collect()
    }
}

/// Spatial box `Ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn dimension(&self) -> usize {
        self.lo.len()
    }
}

#[derive(Clone, Debug)]
pub struct ParabolicSystem {
    pub dimension: usize,
    /// Full symmetric diffusion matrices, `d[l][i][j]` for `l ∈ {0, 1}` (equations 1 and 2), 0-based space indices.
    pub d1: Vec<Vec<Expr>>,
    pub d2: Vec<Vec<Expr>>,
    pub g11: Vec<Expr>,
    pub g12: Vec<Expr>,
    pub g21: Vec<Expr>,
    pub g22: Vec<Expr>,
    pub a11: Expr,
    pub a12: Expr,
    pub a21: Expr,
    pub a22: Expr,
    pub domain: BoxDomain,
    pub horizon: f64,
    /// Control window `ω_T = (t0, t1) × 𝒪`.
    pub control_window: Window,
    pub d0: f64,
}

/// `Div(d ∇ ·)` expanded as `Σ d^{ij} ∂ij + Σ_j (Σ_i ∂_i d^{ij}) ∂_j`.
pub fn div_grad(d: &[Vec<Expr>]) -> LinDiffOp {
    let n = d.len();
    let mut op = LinDiffOp::zero();
    for i in 0..n {
        for j in 0..n {
            let idx = MultiIndex::unit(i + 1).add(&MultiIndex::unit(j + 1));
            op.add_term(idx, d[i][j].clone());
            let di = crate::symbolic::differentiate(&d[i][j], i + 1);
            op.add_term(MultiIndex::unit(j + 1), di);
        }
    }
    op
}

/// `g · ∇`.
pub fn drift(g: &[Expr]) -> LinDiffOp {
    LinDiffOp::from_terms(g.iter().enumerate().map(|(i, c)| (MultiIndex::unit(i + 1), c.clone())))
}

/// `Div(g)`.
pub fn divergence(g: &[Expr]) -> Expr {
    Expr::sum(g.iter().enumerate().map(|(i, c)| crate::symbolic::differentiate(c, i + 1)))
}

impl ParabolicSystem {
    /// The space-time variables the coefficients depend on, as a bit mask.
    pub fn variables(&self) -> u8 {
        self.all_coefficients().iter().fold(0, |m, c| m | c.vars())
    }

    pub fn all_coefficients(&self) -> Vec<Expr> {
        let mut v: Vec<Expr> = Vec::new();
        for d in [&self.d1, &self.d2] {
            for row in d.iter() {
                v.extend(row.iter().cloned());
            }
        }
        for g in [&self.g11, &self.g12, &self.g21, &self.g22] {
            v.extend(g.iter().cloned());
        }
        v.extend([self.a11.clone(), self.a12.clone(), self.a21.clone(), self.a22.clone()]);
        v
    }

    pub fn is_time_independent(&self) -> bool {
        self.variables() & 1 == 0
    }

    /// Full space-time box `(0, T) × Ω`.
    pub fn space_time(&self) -> Window {
        let mut lo = vec![0.0];
        lo.extend(self.domain.lo.iter());
        let mut hi = vec![self.horizon];
        hi.extend(self.domain.hi.iter());
        Window::new(lo, hi)
    }

    /// Samples `ξ·d_l ξ ≥ d0 |ξ|²` on a grid of `(0,T)×Ω` for 16 random
    /// directions plus the coordinate axes.
    pub fn check_ellipticity(&self, per_axis: usize, seed: u64) -> Result<(), SystemError> {
        let n = self.dimension;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dirs: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        for _ in 0..16 {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            dirs.push(v.iter().map(|x| x / norm).collect());
        }
        let st = self.space_time();
        for (which, d) in [(1usize, &self.d1), (2, &self.d2)] {
            let flat: Vec<Expr> = d.iter().flat_map(|r| r.iter().cloned()).collect();
            let tape = Tape::compile(&flat);
            let mut ws = Workspace::default();
            let mut vals = vec![0.0; n * n];
            for p in grid_points(&st, per_axis) {
                tape.eval_into(&p, &mut ws, &mut vals)?;
                for xi in &dirs {
                    let q: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| xi[i] * vals[i * n + j] * xi[j]).sum();
                    if q < self.d0 {
                        return Err(SystemError::Ellipticity { which, found: q, d0: self.d0, point: p });
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether `g21·∇ + a21 = ∂x1` on the control window (sampled).
    pub fn has_normal_form(&self, per_axis: usize) -> Result<bool, SystemError> {
        let mut targets = self.g21.clone();
        targets[0] = &targets[0] - &Expr::one();
        targets.push(self.a21.clone());
        if targets.iter().all(|e| e.is_zero()) {
            return Ok(true);
        }
        let tape = Tape::compile(&targets);
        let mut ws = Workspace::default();
        let mut vals = vec![0.0; targets.len()];
        for p in grid_points(&self.control_window, per_axis) {
            tape.eval_into(&p, &mut ws, &mut vals)?;
            if vals.iter().any(|v| v.abs() > 1e-12) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Cell-centred tensor grid with `per_axis` points on every axis of `w`.
pub fn grid_points(w: &Window, per_axis: usize) -> Vec<Vec<f64>> {
    let d = w.dims();
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut k| {
            (0..d)
                .map(|axis| {
                    let i = k % per_axis;
                    k /= per_axis;
                    w.sample(axis, i, per_axis)
                })
                .collect()
        })
        .collect()
}

/// Textual system description, as found in experiment configs.
#[derive(Clone, Debug, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub dimension: Option<usize>,
    /// Diffusion matrices as rows of expression texts (symmetric; the upper
    /// triangle is authoritative when both are given). Default: identity.
    #[serde(default)]
    pub d1: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub d2: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub g11: Option<Vec<String>>,
    #[serde(default)]
    pub g12: Option<Vec<String>>,
    #[serde(default)]
    pub g21: Option<Vec<String>>,
    #[serde(default)]
    pub g22: Option<Vec<String>>,
    #[serde(default)]
    pub a11: Option<String>,
    #[serde(default)]
    pub a12: Option<String>,
    #[serde(default)]
    pub a21: Option<String>,
    #[serde(default)]
    pub a22: Option<String>,
    pub domain: Option<BoxDomain>,
    pub horizon: Option<f64>,
    pub control_window: Option<Window>,
    #[serde(default)]
    pub d0: Option<f64>,
    /// Named constants usable inside expression texts.
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

impl SystemSpec {
    pub fn parse_context(&self) -> ParseContext {
        ParseContext { dimension: self.dimension.unwrap_or(0), constants: self.constants.clone() }
    }

    /// Builds the system, collecting every failing field.
    pub fn build(&self) -> Result<ParabolicSystem, SystemError> {
        let mut errors = Vec::new();
        let n = match self.dimension {
            Some(n) if (1..=3).contains(&n) => n,
            Some(n) => {
                errors.push(format!("system.dimension: {n} is not in 1..=3"));
                1
            }
            None => {
                errors.push("system.dimension: required".to_string());
                1
            }
        };
        let mut b = FieldParser { ctx: ParseContext { dimension: n, constants: self.constants.clone() }, n, errors };
        let d1 = b.matrix("system.d1", &self.d1);
        let d2 = b.matrix("system.d2", &self.d2);
        let g11 = b.vector("system.g11", &self.g11, 0.0);
        let g12 = b.vector("system.g12", &self.g12, 0.0);
        let g21 = b.vector("system.g21", &self.g21, 1.0);
        let g22 = b.vector("system.g22", &self.g22, 0.0);
        let a11 = b.scalar("system.a11", &self.a11);
        let a12 = b.scalar("system.a12", &self.a12);
        let a21 = b.scalar("system.a21", &self.a21);
        let a22 = b.scalar("system.a22", &self.a22);
        let mut errors = b.errors;
        let domain = match &self.domain {
            Some(d) if d.lo.len() == n && d.hi.len() == n && d.lo.iter().zip(&d.hi).all(|(a, b)| a < b) => d.clone(),
            Some(_) => {
                errors.push(format!("system.domain: needs lo < hi with {n} entries each"));
                BoxDomain { lo: vec![0.0; n], hi: vec![1.0; n] }
            }
            None => {
                errors.push("system.domain: required".to_string());
                BoxDomain { lo: vec![0.0; n], hi: vec![1.0; n] }
            }
        };
        let horizon = match self.horizon {
            Some(t) if t > 0.0 => t,
            Some(t) => {
                errors.push(format!("system.horizon: {t} is not positive"));
                1.0
            }
            None => {
                errors.push("system.horizon: required".to_string());
                1.0
            }
        };
        let control_window = match &self.control_window {
            Some(w) if w.lo.len() == n + 1 && w.hi.len() == n + 1 && w.lo.iter().zip(&w.hi).all(|(a, b)| a < b) => {
                let inside = w.lo[0] >= 0.0
                    && w.hi[0] <= horizon
                    && (0..n).all(|i| w.lo[i + 1] >= domain.lo[i] && w.hi[i + 1] <= domain.hi[i]);
                if !inside {
                    errors.push("system.control_window: must lie inside (0,T)×Ω".to_string());
                }
                w.clone()
            }
            Some(_) => {
                errors.push(format!("system.control_window: needs lo < hi with {} entries (t first)", n + 1));
                Window::new(vec![0.0; n + 1], vec![1.0; n + 1])
            }
            None => {
                errors.push("system.control_window: required".to_string());
                Window::new(vec![0.0; n + 1], vec![1.0; n + 1])
            }
        };
        let d0 = self.d0.unwrap_or(1e-3);
        if d0 <= 0.0 {
            errors.push(format!("system.d0: {d0} is not positive"));
        }
        if !errors.is_empty() {
            return Err(SystemError::Invalid(errors));
        }
        Ok(ParabolicSystem { dimension: n, d1, d2, g11, g12, g21, g22, a11, a12, a21, a22, domain, horizon, control_window, d0 })
    }
}

struct FieldParser {
    ctx: ParseContext,
    n: usize,
    errors: Vec<String>,
}

impl FieldParser {
    fn parse(&mut self, field: &str, text: &str) -> Expr {
        parse_with(text, &self.ctx).unwrap_or_else(|e: ParseError| {
            self.errors.push(format!("{field}: {e} in \"{text}\""));
            Expr::zero()
        })
    }

    fn scalar(&mut self, field: &str, v: &Option<String>) -> Expr {
        v.as_ref().map_or_else(Expr::zero, |s| self.parse(field, s))
    }

    /// Missing vectors default to `(first, 0, ..., 0)`.
    fn vector(&mut self, field: &str, v: &Option<Vec<String>>, first: f64) -> Vec<Expr> {
        let n = self.n;
        match v {
            Some(items) if items.len() == n => items.iter().enumerate().map(|(i, s)| self.parse(&format!("{field}[{i}]"), s)).collect(),
            Some(items) => {
                self.errors.push(format!("{field}: expected {n} entries, got {}", items.len()));
                vec![Expr::zero(); n]
            }
            None => (0..n).map(|i| if i == 0 { Expr::constant(first) } else { Expr::zero() }).collect(),
        }
    }

    /// Missing matrices default to the identity; the upper triangle is used.
    fn matrix(&mut self, field: &str, m: &Option<Vec<Vec<String>>>) -> Vec<Vec<Expr>> {
        let n = self.n;
        let mut out: Vec<Vec<Expr>> = (0..n).map(|i| (0..n).map(|j| if i == j { Expr::one() } else { Expr::zero() }).collect()).collect();
        let Some(rows) = m else { return out };
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            self.errors.push(format!("{field}: expected a {n}x{n} matrix"));
            return out;
        }
        for i in 0..n {
            for j in i..n {
                let e = self.parse(&format!("{field}[{i}][{j}]"), &rows[i][j]);
                out[i][j] = e.clone();
                out[j][i] = e;
            }
        }
        out
    }
}
