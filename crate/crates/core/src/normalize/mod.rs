//! Local reduction of the coupling `g21·∇ + a21` to `∂x1`: straightening
//! of the characteristics of `g21`, then a gauge removing `a21`.

mod flow;
mod gauge;
mod spline;
mod straighten;

use thiserror::Error;

pub use flow::{BaseSegment, Chart, FlowMap, FlowOptions};
pub use gauge::{gauge_transform, GaugeFunction, Gauged, GAUGE_QUAD_TOL};
pub use spline::{Axis, Hermite, NodeData};
pub use straighten::{default_base, straighten_coupling, Straightened};

use crate::symbolic::{EvalError, Expr, Tape, Workspace};
use crate::system::{grid_points, ParabolicSystem};

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("straightening is implemented for N ≤ 2, got N = {0}")]
    Dimension(usize),
    #[error("coupling field depends on t")]
    TimeDependent,
    #[error("g21·e1 vanishes at the window centre; no transversal base segment")]
    NoTransversal,
    #[error("flow integration failed: {0}")]
    Ode(String),
    #[error("flow extent underflow: the flow leaves the window or folds for every ε")]
    ExtentUnderflow,
    #[error("coupling is not ∂x1 + a21 (deviation {deviation:e})")]
    NotStraight { deviation: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Sampled `max |g21 − e1|` on the control window.
pub fn coupling_deviation(sys: &ParabolicSystem, per_axis: usize) -> Result<f64, EvalError> {
    let n = sys.dimension;
    let mut targets = sys.g21.clone();
    targets[0] = &targets[0] - &Expr::one();
    let tape = Tape::compile(&targets);
    let mut ws = Workspace::default();
    let mut v = vec![0.0; n];
    let mut worst = 0.0f64;
    for p in grid_points(&sys.control_window, per_axis) {
        tape.eval_into(&p, &mut ws, &mut v)?;
        worst = v.iter().fold(worst, |a, x| a.max(x.abs()));
    }
    Ok(worst)
}

/// Sampled `max |a21|` on the control window.
pub fn zero_order_coupling(sys: &ParabolicSystem, per_axis: usize) -> Result<f64, EvalError> {
    let tape = Tape::single(&sys.a21);
    let mut worst = 0.0f64;
    for p in grid_points(&sys.control_window, per_axis) {
        worst = worst.max(tape.eval1(&p)?.abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct Normalized {
    pub system: ParabolicSystem,
    pub flow: Option<std::sync::Arc<FlowMap>>,
    pub gauge: GaugeFunction,
    /// Sampled `|g21 − e1|` after straightening, before the gauge.
    pub coupling_deviation: f64,
}

/// Both reductions; the straightening is skipped when `g21 = e1` already.
pub fn normalize(sys: &ParabolicSystem, opts: &FlowOptions, coupling_tol: f64) -> Result<Normalized, NormalizeError> {
    let straight = coupling_deviation(sys, 8)? == 0.0;
    let (s, flow) = if straight {
        (sys.clone(), None)
    } else {
        let base = default_base(sys)?;
        let st = straighten_coupling(sys, &base, opts)?;
        (st.system, Some(st.flow))
    };
    let deviation = coupling_deviation(&s, 13)?;
    let g = gauge_transform(&s, coupling_tol, 13)?;
    Ok(Normalized { system: g.system, flow, gauge: g.gauge, coupling_deviation: deviation })
}
