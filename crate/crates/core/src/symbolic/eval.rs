//! Compiled evaluation of expression DAGs.
//!
//! A [`Tape`] linearizes one or more expressions into a topologically ordered
//! instruction list with shared subexpressions evaluated once. Alongside each
//! value the evaluator can propagate a first-order estimate of the absolute
//! rounding error, which the solvability engine uses to decide whether a
//! sampled coefficient is numerically zero.

use std::collections::HashMap;
use std::sync::Arc;

use super::expr::{Expr, FieldRef, Kind, MAX_VARS};
use super::jet::{any_bump, step_derivative};
use super::quad::integrate_piecewise_fn;
use super::EvalError;

const EPS: f64 = f64::EPSILON;

enum Op {
    Const(f64),
    Var(usize),
    Sum(Vec<usize>),
    Product(Vec<usize>),
    Pow(usize, i32),
    Sin(usize),
    Cos(usize),
    Exp(usize),
    Bump { var: usize, lo: f64, hi: f64, order: u32, power: u32, peak: f64 },
    Step { var: usize, lo: f64, hi: f64, order: u32, peak: f64 },
    Integral { integrand: Arc<Tape>, var: usize, lower: f64, tol: f64, breaks: Arc<[f64]> },
    Field(FieldRef),
}

pub struct Tape {
    ops: Vec<Op>,
    roots: Vec<usize>,
    dimension: usize,
}

/// Reusable scratch buffers for repeated evaluation of one tape.
#[derive(Default)]
pub struct Workspace {
    values: Vec<f64>,
    noise: Vec<f64>,
}

/// Largest magnitude of a primitive's derivative over its transition region,
/// used as the scale of its rounding noise.
fn sampled_peak(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 256;
    (1..n).map(|i| f(lo + (hi - lo) * i as f64 / n as f64).abs()).fold(0.0, f64::max)
}

impl Tape {
    pub fn compile(exprs: &[Expr]) -> Tape {
        let mut ops = Vec::new();
        let mut index: HashMap<*const (), usize> = HashMap::new();
        let mut dimension = 0usize;
        let roots = exprs.iter().map(|e| compile_node(e, &mut ops, &mut index, &mut dimension)).collect();
        Tape { ops, roots, dimension }
    }

    pub fn single(e: &Expr) -> Tape {
        Tape::compile(std::slice::from_ref(e))
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn roots(&self) -> usize {
        self.roots.len()
    }

    /// Number of coordinates a point must provide (highest variable index + 1).
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut ws = Workspace::default();
        self.run(point, &mut ws, false)?;
        Ok(self.roots.iter().map(|&r| ws.values[r]).collect())
    }

    pub fn eval1(&self, point: &[f64]) -> Result<f64, EvalError> {
        let mut ws = Workspace::default();
        self.run(point, &mut ws, false)?;
        Ok(ws.values[self.roots[0]])
    }

    /// Values of all roots written into `out`.
    pub fn eval_into(&self, point: &[f64], ws: &mut Workspace, out: &mut [f64]) -> Result<(), EvalError> {
        self.run(point, ws, false)?;
        for (o, &r) in out.iter_mut().zip(&self.roots) {
            *o = ws.values[r];
        }
        Ok(())
    }

    /// Values and absolute rounding-noise estimates of all roots.
    pub fn eval_with_noise(&self, point: &[f64], ws: &mut Workspace) -> Result<Vec<(f64, f64)>, EvalError> {
        self.run(point, ws, true)?;
        Ok(self.roots.iter().map(|&r| (ws.values[r], ws.noise[r])).collect())
    }

    fn run(&self, point: &[f64], ws: &mut Workspace, track: bool) -> Result<(), EvalError> {
        if point.len() < self.dimension {
            return Err(EvalError::Dimension { expected: self.dimension, got: point.len() });
        }
        let n = self.ops.len();
        ws.values.clear();
        ws.values.resize(n, 0.0);
        if track {
            ws.noise.clear();
            ws.noise.resize(n, 0.0);
        }
        for i in 0..n {
            let (v, noise) = self.step(i, point, ws, track)?;
            if !v.is_finite() {
                return Err(EvalError::NonFinite { point: point.to_vec() });
            }
            ws.values[i] = v;
            if track {
                ws.noise[i] = noise;
            }
        }
        Ok(())
    }

    fn step(&self, i: usize, point: &[f64], ws: &Workspace, track: bool) -> Result<(f64, f64), EvalError> {
        let val = &ws.values;
        let nz = |j: usize| if track { ws.noise[j] } else { 0.0 };
        Ok(match &self.ops[i] {
            Op::Const(c) => (*c, 0.5 * EPS * c.abs()),
            Op::Var(v) => (point[*v], 0.0),
            Op::Sum(ts) => {
                let v: f64 = ts.iter().map(|&j| val[j]).sum();
                let noise = if track { ts.iter().map(|&j| nz(j) + EPS * val[j].abs()).sum() } else { 0.0 };
                (v, noise)
            }
            Op::Product(fs) => {
                let v: f64 = fs.iter().map(|&j| val[j]).product();
                let noise = if track {
                    // Σ_i n_i Π_{j≠i} |v_j| via prefix/suffix products.
                    let k = fs.len();
                    let mut suffix = vec![1.0; k + 1];
                    for idx in (0..k).rev() {
                        suffix[idx] = suffix[idx + 1] * val[fs[idx]].abs();
                    }
                    let mut prefix = 1.0;
                    let mut acc = 0.0;
                    for idx in 0..k {
                        acc += nz(fs[idx]) * prefix * suffix[idx + 1];
                        prefix *= val[fs[idx]].abs();
                    }
                    acc + EPS * (k as f64 - 1.0) * v.abs()
                } else {
                    0.0
                };
                (v, noise)
            }
            Op::Pow(b, n) => {
                let base = val[*b];
                if base == 0.0 && *n < 0 {
                    return Err(EvalError::DivisionByZero { point: point.to_vec() });
                }
                let v = base.powi(*n);
                let noise = if track {
                    (*n as f64).abs() * base.abs().powi(n - 1) * nz(*b) + EPS * v.abs() * (1.0 + (n.unsigned_abs() as f64).log2())
                } else {
                    0.0
                };
                (v, noise)
            }
            Op::Sin(a) => (val[*a].sin(), nz(*a) + EPS),
            Op::Cos(a) => (val[*a].cos(), nz(*a) + EPS),
            Op::Exp(a) => {
                let v = val[*a].exp();
                (v, v * (nz(*a) + EPS))
            }
            Op::Bump { var, lo, hi, order, power, peak } => {
                let v = any_bump(point[*var], *lo, *hi, *power, *order);
                (v, 16.0 * EPS * (*order as f64 + 1.0) * peak)
            }
            Op::Step { var, lo, hi, order, peak } => {
                let v = step_derivative(point[*var], *lo, *hi, *order);
                let inside = point[*var] > *lo && point[*var] < *hi;
                (v, if inside { 16.0 * EPS * (*order as f64 + 1.0) * peak } else { 0.0 })
            }
            Op::Integral { integrand, var, lower, tol, breaks } => {
                let upper = point[*var];
                let mut p = [0.0; MAX_VARS];
                p[..point.len().min(MAX_VARS)].copy_from_slice(&point[..point.len().min(MAX_VARS)]);
                let mut inner = Workspace::default();
                let f = |y: f64| -> Result<f64, EvalError> {
                    let mut q = p;
                    q[*var] = y;
                    integrand.run(&q, &mut inner, false)?;
                    Ok(inner.values[integrand.roots[0]])
                };
                let v = integrate_piecewise_fn(f, *lower, upper, breaks, *tol)?;
                (v, tol + EPS * v.abs())
            }
            Op::Field(f) => {
                let v = f.field.eval(point, &f.order)?;
                (v, 8.0 * EPS * v.abs())
            }
        })
    }
}

fn compile_node(e: &Expr, ops: &mut Vec<Op>, index: &mut HashMap<*const (), usize>, dimension: &mut usize) -> usize {
    if let Some(&i) = index.get(&e.node_ptr()) {
        return i;
    }
    // Iterative post-order traversal: deep DAGs would overflow the stack.
    let mut stack: Vec<(Expr, bool)> = vec![(e.clone(), false)];
    while let Some((node, expanded)) = stack.pop() {
        if index.contains_key(&node.node_ptr()) {
            continue;
        }
        if !expanded {
            stack.push((node.clone(), true));
            node.for_each_child(|c| {
                if !index.contains_key(&c.node_ptr()) && !matches!(node.kind(), Kind::Integral(_)) {
                    stack.push((c.clone(), false));
                }
            });
            continue;
        }
        let id = |c: &Expr| index[&c.node_ptr()];
        let op = match node.kind() {
            Kind::Const(c) => Op::Const(*c),
            Kind::Var(v) => {
                *dimension = (*dimension).max(v + 1);
                Op::Var(*v)
            }
            Kind::Sum(ts) => Op::Sum(ts.iter().map(id).collect()),
            Kind::Product(fs) => Op::Product(fs.iter().map(id).collect()),
            Kind::Pow(b, n) => Op::Pow(id(b), *n),
            Kind::Sin(a) => Op::Sin(id(a)),
            Kind::Cos(a) => Op::Cos(id(a)),
            Kind::Exp(a) => Op::Exp(id(a)),
            Kind::Bump(b) => {
                *dimension = (*dimension).max(b.var + 1);
                let peak = sampled_peak(|x| any_bump(x, b.lo, b.hi, b.power, b.order), b.lo, b.hi);
                Op::Bump { var: b.var, lo: b.lo, hi: b.hi, order: b.order, power: b.power, peak }
            }
            Kind::Step(s) => {
                *dimension = (*dimension).max(s.var + 1);
                let peak = sampled_peak(|x| step_derivative(x, s.lo, s.hi, s.order), s.lo, s.hi).max(1.0);
                Op::Step { var: s.var, lo: s.lo, hi: s.hi, order: s.order, peak }
            }
            Kind::Integral(i) => {
                let tape = i.tape.get_or_init(|| Arc::new(Tape::single(&i.integrand))).clone();
                *dimension = (*dimension).max(tape.dimension).max(i.var + 1);
                Op::Integral { integrand: tape, var: i.var, lower: i.lower, tol: i.tol, breaks: i.integrand.breakpoints(i.var).into() }
            }
            Kind::Field(f) => {
                let mask = f.field.variables();
                let top = (0..MAX_VARS).filter(|v| mask & (1 << v) != 0).max().map_or(0, |v| v + 1);
                *dimension = (*dimension).max(top);
                Op::Field(f.clone())
            }
        };
        index.insert(node.node_ptr(), ops.len());
        ops.push(op);
    }
    index[&e.node_ptr()]
}

impl Expr {
    /// One-off evaluation; compile a [`Tape`] for repeated use.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        Tape::single(self).eval1(point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_subexpressions_compile_once() {
        let s = Expr::sin(Expr::x(1) * 3.0);
        let e = &s * &s + &s;
        let tape = Tape::single(&e);
        // x1, 3, 3*x1, sin, sin^2, sum
        assert_eq!(tape.len(), 6);
        let v = tape.eval1(&[0.0, 0.2]).unwrap();
        let sv = (0.6f64).sin();
        assert!((v - (sv * sv + sv)).abs() < 1e-15);
    }

    #[test]
    fn pole_is_an_error() {
        let e = Expr::one() / Expr::x(1);
        assert!(matches!(e.eval(&[0.0, 0.0]), Err(EvalError::DivisionByZero { .. })));
    }

    #[test]
    fn cancellation_is_within_noise() {
        let a = Expr::sin(Expr::x(1));
        let b = Expr::cos(Expr::x(1));
        // sin^2 + cos^2 - 1 is zero but not structurally
        let e = &(&a * &a) + &(&b * &b) - Expr::one();
        let tape = Tape::single(&e);
        let mut ws = Workspace::default();
        for i in 0..50 {
            let x = 0.1 * i as f64;
            let (v, n) = tape.eval_with_noise(&[0.0, x], &mut ws).unwrap()[0];
            assert!(v.abs() <= 4.0 * n.max(1e-300), "x={x} v={v} n={n}");
        }
    }
}
