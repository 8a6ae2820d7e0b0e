//! Pull-back of the system through `x = Λ(s, z)`, which turns the coupling
//! field `g21·∇` into `∂s`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::flow::{BaseSegment, Chart, FlowMap, FlowOptions};
use super::NormalizeError;
use crate::symbolic::{Differentiator, EvalError, Expr, MultiIndex, ScalarField, Tape};
use crate::system::{BoxDomain, ParabolicSystem, Window};

static FLOW_ID: AtomicUsize = AtomicUsize::new(0);

/// Step for the central differences behind field derivatives (with one
/// Richardson extrapolation).
const FD_STEP: f64 = 1e-3;

/// Second-order operator `d:∇² + c·∇` in the original variables, as data at a point.
struct OperatorSource {
    n: usize,
    /// `[d^{ij}] ++ [∂k d^{ij}] ++ [c^i]`, `c = Div d + g`.
    tape: Tape,
}

impl OperatorSource {
    fn new(d: &[Vec<Expr>], g: &[Expr]) -> OperatorSource {
        let n = d.len();
        let mut diff = Differentiator::new();
        let mut all: Vec<Expr> = d.iter().flat_map(|r| r.iter().cloned()).collect();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    all.push(diff.diff(&d[i][j], k + 1));
                }
            }
        }
        for j in 0..n {
            all.push(&g[j] + &Expr::sum((0..n).map(|i| diff.diff(&d[i][j], i + 1))));
        }
        OperatorSource { n, tape: Tape::compile(&all) }
    }

    /// Divergence-form coefficients `(D̃, g̃)` at a chart.
    fn pull_back(&self, t: f64, chart: &Chart) -> Result<([[f64; 2]; 2], [f64; 2]), EvalError> {
        let n = self.n;
        let mut p = vec![t];
        p.extend_from_slice(&chart.x[..n]);
        let v = self.tape.eval(&p)?;
        let d = |i: usize, j: usize| v[i * n + j];
        let dd = |i: usize, j: usize, k: usize| v[n * n + (i * n + j) * n + k];
        let c = |i: usize| v[n * n + n * n * n + i];
        let k = chart.inverse(n);
        // ∂_c K = −K (∂_c J) K
        let mut dk = [[[0.0; 2]; 2]; 2];
        for cc in 0..n {
            for a in 0..n {
                for i in 0..n {
                    dk[cc][a][i] = -(0..n).flat_map(|b| (0..n).map(move |m| (b, m))).map(|(b, m)| k[a][b] * chart.dj[cc][b][m] * k[m][i]).sum::<f64>();
                }
            }
        }
        let mut dt = [[0.0; 2]; 2];
        let mut g = [0.0; 2];
        for a in 0..n {
            for b in 0..n {
                dt[a][b] = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| d(i, j) * k[a][i] * k[b][j]).sum();
            }
            // c̃^a = Σ c^i K_ai + Σ d^{ij} ∂_{x_j} K_ai, ∂_{x_j} = Σ_c K_cj ∂_c
            let mut ca: f64 = (0..n).map(|i| c(i) * k[a][i]).sum();
            for i in 0..n {
                for j in 0..n {
                    ca += d(i, j) * (0..n).map(|cc| k[cc][j] * dk[cc][a][i]).sum::<f64>();
                }
            }
            g[a] = ca;
        }
        // g̃^b = c̃^b − Σ_a ∂_a D̃^{ab}
        for b in 0..n {
            for a in 0..n {
                let mut div = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let ddij: f64 = (0..n).map(|m| dd(i, j, m) * chart.j[m][a]).sum();
                        div += ddij * k[a][i] * k[b][j] + d(i, j) * (dk[a][a][i] * k[b][j] + k[a][i] * dk[a][b][j]);
                    }
                }
                g[b] -= div;
            }
        }
        Ok((dt, g))
    }
}

#[derive(Debug, Clone, Copy)]
enum Quantity {
    Diffusion(usize, usize),
    Drift(usize),
    /// Component `a` of `K v` for a first-order vector `v`.
    Vector(usize),
    Scalar,
}

/// A coefficient of the transformed system, evaluated through the flow map.
struct PulledBack {
    name: String,
    flow: Arc<FlowMap>,
    quantity: Quantity,
    source: Option<Arc<OperatorSource>>,
    /// Scalar: `[e, ∂1 e, .., ∂n e]`; vector: components.
    exprs: Tape,
    vars: u8,
}

impl std::fmt::Debug for PulledBack {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name)
    }
}

impl PulledBack {
    fn value(&self, point: &[f64]) -> Result<f64, EvalError> {
        let n = self.flow.n;
        let z = if n == 2 { point[2] } else { 0.0 };
        let chart = self.flow.chart(point[1], z);
        let mut p = vec![point[0]];
        p.extend_from_slice(&chart.x[..n]);
        Ok(match self.quantity {
            Quantity::Diffusion(a, b) => self.source.as_ref().expect("operator source").pull_back(point[0], &chart)?.0[a][b],
            Quantity::Drift(b) => self.source.as_ref().expect("operator source").pull_back(point[0], &chart)?.1[b],
            Quantity::Vector(a) => {
                let v = self.exprs.eval(&p)?;
                let k = chart.inverse(n);
                (0..n).map(|i| k[a][i] * v[i]).sum()
            }
            Quantity::Scalar => self.exprs.eval(&p)?[0],
        })
    }

    /// First derivative of a scalar by the chain rule.
    fn scalar_gradient(&self, point: &[f64], var: usize) -> Result<f64, EvalError> {
        let n = self.flow.n;
        let z = if n == 2 { point[2] } else { 0.0 };
        let chart = self.flow.chart(point[1], z);
        let mut p = vec![point[0]];
        p.extend_from_slice(&chart.x[..n]);
        let v = self.exprs.eval(&p)?;
        Ok(if var == 0 { v[n + 1] } else { (0..n).map(|m| v[1 + m] * chart.j[m][var - 1]).sum() })
    }

    fn derivative(&self, point: &[f64], order: &MultiIndex) -> Result<f64, EvalError> {
        if order.is_zero() {
            return self.value(point);
        }
        let var = (0..4).find(|&v| order.get(v) > 0).expect("nonzero order");
        let rest = order.checked_sub(&MultiIndex::unit(var)).expect("unit");
        if matches!(self.quantity, Quantity::Scalar) && rest.is_zero() {
            return self.scalar_gradient(point, var);
        }
        let central = |h: f64| -> Result<f64, EvalError> {
            let mut a = point.to_vec();
            let mut b = point.to_vec();
            a[var] += h;
            b[var] -= h;
            Ok((self.derivative(&a, &rest)? - self.derivative(&b, &rest)?) / (2.0 * h))
        };
        let h = FD_STEP * (1.0 + point[var].abs());
        Ok((4.0 * central(0.5 * h)? - central(h)?) / 3.0)
    }
}

impl ScalarField for PulledBack {
    fn name(&self) -> &str {
        &self.name
    }

    fn eval(&self, point: &[f64], order: &MultiIndex) -> Result<f64, EvalError> {
        if order.0.iter().enumerate().any(|(v, &a)| a > 0 && self.vars & (1 << v) == 0) {
            return Ok(0.0);
        }
        self.derivative(point, order)
    }

    fn variables(&self) -> u8 {
        self.vars
    }
}

struct Builder {
    flow: Arc<FlowMap>,
    id: usize,
    time: bool,
}

impl Builder {
    fn vars(&self, time: bool) -> u8 {
        let space = if self.flow.n == 2 { 0b110 } else { 0b10 };
        space | u8::from(time && self.time)
    }

    fn field(&self, label: String, quantity: Quantity, source: Option<Arc<OperatorSource>>, exprs: Vec<Expr>, time: bool) -> Expr {
        let f = PulledBack {
            name: format!("flow{}.{label}", self.id),
            flow: self.flow.clone(),
            quantity,
            source,
            exprs: Tape::compile(&exprs),
            vars: self.vars(time),
        };
        Expr::field(Arc::new(f))
    }

    fn scalar(&self, label: &str, e: &Expr) -> Expr {
        if e.vars() & !1 == 0 {
            return e.clone();
        }
        let n = self.flow.n;
        let mut d = Differentiator::new();
        let mut exprs = vec![e.clone()];
        exprs.extend((1..=n).map(|k| d.diff(e, k)));
        exprs.push(d.diff(e, 0));
        self.field(label.to_string(), Quantity::Scalar, None, exprs, e.depends_on(0))
    }

    fn vector(&self, label: &str, v: &[Expr]) -> Vec<Expr> {
        let n = self.flow.n;
        if v.iter().all(|e| e.is_zero()) {
            return v.to_vec();
        }
        let time = v.iter().any(|e| e.depends_on(0));
        (0..n).map(|a| self.field(format!("{label}[{a}]"), Quantity::Vector(a), None, v.to_vec(), time)).collect()
    }

    fn operator(&self, label: &str, d: &[Vec<Expr>], g: &[Expr]) -> (Vec<Vec<Expr>>, Vec<Expr>) {
        let n = self.flow.n;
        let src = Arc::new(OperatorSource::new(d, g));
        let time = d.iter().flatten().chain(g).any(|e| e.depends_on(0));
        let dt = (0..n)
            .map(|a| (0..n).map(|b| self.field(format!("{label}.d[{}][{}]", a.min(b), a.max(b)), Quantity::Diffusion(a.min(b), a.max(b)), Some(src.clone()), vec![], time)).collect())
            .collect();
        let gt = (0..n).map(|b| self.field(format!("{label}.g[{b}]"), Quantity::Drift(b), Some(src.clone()), vec![], time)).collect();
        (dt, gt)
    }
}

#[derive(Clone, Debug)]
pub struct Straightened {
    pub system: ParabolicSystem,
    pub flow: Arc<FlowMap>,
}

/// Default base segment: a vertical line near the edge of `ω0` that the
/// field `g21·e1` points away from, at the window centre line's sign.
pub fn default_base(sys: &ParabolicSystem) -> Result<BaseSegment, NormalizeError> {
    let w = &sys.control_window;
    let n = sys.dimension;
    let mut p = w.center();
    let g1 = sys.g21[0].eval(&p)?;
    if g1 == 0.0 {
        return Err(NormalizeError::NoTransversal);
    }
    let margin = 0.05 * w.width(1);
    let x1 = if g1 < 0.0 { w.hi[1] - margin } else { w.lo[1] + margin };
    p[1] = x1;
    let (z_lo, z_hi) = if n == 2 {
        let m = 0.25 * w.width(2);
        (w.lo[2] + m, w.hi[2] - m)
    } else {
        (0.0, 1.0)
    };
    Ok(BaseSegment { x1, z_lo, z_hi })
}

/// Straightens `g21·∇` into `∂s` on `(t0, t1) × (0, ε) × U`. The extent
/// `ε` starts so that the flow crosses about 80% of `ω0` and is halved
/// while the flow leaves `ω0` or the Jacobian degenerates.
pub fn straighten_coupling(sys: &ParabolicSystem, base: &BaseSegment, opts: &FlowOptions) -> Result<Straightened, NormalizeError> {
    let n = sys.dimension;
    if n > 2 {
        return Err(NormalizeError::Dimension(n));
    }
    if sys.g21.iter().any(|e| e.depends_on(0)) {
        return Err(NormalizeError::TimeDependent);
    }
    let w = &sys.control_window;
    let speed = sys.g21[0].eval(&w.center())?.abs().max(1e-12);
    let mut extent = 0.8 * w.width(1) / speed;
    let inside = |x: &[f64; 2]| (0..n).all(|i| x[i] > w.lo[i + 1] && x[i] < w.hi[i + 1]);
    let flow = loop {
        if extent < 1e-6 {
            return Err(NormalizeError::ExtentUnderflow);
        }
        match FlowMap::tabulate(&sys.g21, base, extent, opts) {
            Ok(f) => {
                let det0 = f.chart(0.0, 0.5 * (base.z_lo + base.z_hi)).det(n).abs();
                if f.node_images().iter().all(inside) && f.min_abs_det() > 1e-3 * det0 {
                    break f;
                }
            }
            Err(NormalizeError::Ode(_)) => {}
            Err(e) => return Err(e),
        }
        extent *= 0.5;
    };
    let flow = Arc::new(flow);
    let b = Builder { flow: flow.clone(), id: FLOW_ID.fetch_add(1, Ordering::Relaxed), time: true };
    let (d1, g11) = b.operator("d1", &sys.d1, &sys.g11);
    let (d2, g22) = b.operator("d2", &sys.d2, &sys.g22);
    let (lo, hi) = flow.parameter_box();
    let mut wlo = vec![w.lo[0]];
    wlo.extend(&lo);
    let mut whi = vec![w.hi[0]];
    whi.extend(&hi);
    let system = ParabolicSystem {
        dimension: n,
        d1,
        d2,
        g11,
        g12: b.vector("g12", &sys.g12),
        g21: b.vector("g21", &sys.g21),
        g22,
        a11: b.scalar("a11", &sys.a11),
        a12: b.scalar("a12", &sys.a12),
        a21: b.scalar("a21", &sys.a21),
        a22: b.scalar("a22", &sys.a22),
        domain: BoxDomain { lo, hi },
        horizon: sys.horizon,
        control_window: Window::new(wlo, whi),
        d0: sys.d0,
    };
    Ok(Straightened { system, flow })
}
