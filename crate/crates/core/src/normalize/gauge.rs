//! Zero-order gauge: with `y = θ ȳ` and `∂x1 θ + a21 θ = 0`, the coupling
//! `∂x1 + a21` becomes `∂x1`.

use serde::Serialize;

use super::NormalizeError;
use crate::symbolic::{Differentiator, Expr, Tape, Workspace};
use crate::system::{grid_points, ParabolicSystem};

/// Quadrature tolerance of the `x1`-line integral in `θ`.
pub const GAUGE_QUAD_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct GaugeFunction {
    #[serde(serialize_with = "as_text")]
    pub theta: Expr,
    /// Sampled `min |θ|` on the control window.
    pub lower_bound: f64,
    /// Sampled `max |∂x1 θ + a21 θ|`.
    pub residual: f64,
}

fn as_text<S: serde::Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&e.to_string())
}

#[derive(Clone, Debug)]
pub struct Gauged {
    pub system: ParabolicSystem,
    pub gauge: GaugeFunction,
}

/// `Div(d∇θ)`.
fn div_d_grad(d: &[Vec<Expr>], theta: &Expr, diff: &mut Differentiator) -> Expr {
    let n = d.len();
    let grad: Vec<Expr> = (0..n).map(|j| diff.diff(theta, j + 1)).collect();
    Expr::sum((0..n).map(|i| {
        let flux = Expr::sum((0..n).map(|j| &d[i][j] * &grad[j]));
        diff.diff(&flux, i + 1)
    }))
}

fn dot_grad(g: &[Expr], theta: &Expr, diff: &mut Differentiator) -> Expr {
    Expr::sum(g.iter().enumerate().map(|(i, c)| c * &diff.diff(theta, i + 1)))
}

/// Requires the coupling vector to be `e1` within `coupling_tol` (sampled);
/// it is then set to `e1` exactly and `a21` is removed.
pub fn gauge_transform(sys: &ParabolicSystem, coupling_tol: f64, per_axis: usize) -> Result<Gauged, NormalizeError> {
    let n = sys.dimension;
    let w = &sys.control_window;
    let mut targets = sys.g21.clone();
    targets[0] = &targets[0] - &Expr::one();
    if !targets.iter().all(|e| e.is_zero()) {
        let tape = Tape::compile(&targets);
        let mut ws = Workspace::default();
        let mut v = vec![0.0; n];
        for p in grid_points(w, per_axis) {
            tape.eval_into(&p, &mut ws, &mut v)?;
            let dev = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if dev > coupling_tol {
                return Err(NormalizeError::NotStraight { deviation: dev });
            }
        }
    }
    let e1: Vec<Expr> = (0..n).map(|i| if i == 0 { Expr::one() } else { Expr::zero() }).collect();
    let lower = w.lo[1];
    let theta = Expr::exp(-Expr::integral(sys.a21.clone(), 1, lower, GAUGE_QUAD_TOL));
    let inv = Expr::recip(theta.clone());
    let mut d = Differentiator::new();
    let dt_theta = d.diff(&theta, 0);

    let drift = |dm: &[Vec<Expr>], g: &[Expr], d: &mut Differentiator| -> Vec<Expr> {
        (0..n)
            .map(|i| &g[i] + &(Expr::constant(2.0) * &inv * Expr::sum((0..n).map(|j| &dm[i][j] * &d.diff(&theta, j + 1)))))
            .collect()
    };
    let potential = |a: &Expr, dm: &[Vec<Expr>], g: &[Expr], d: &mut Differentiator| -> Expr {
        a + &(&inv * &(div_d_grad(dm, &theta, d) + dot_grad(g, &theta, d) - &dt_theta))
    };
    let cross = |a: &Expr, g: &[Expr], d: &mut Differentiator| -> Expr { a + &(&inv * &dot_grad(g, &theta, d)) };

    let a21 = cross(&sys.a21, &e1, &mut d);
    let system = ParabolicSystem {
        g11: drift(&sys.d1, &sys.g11, &mut d),
        g22: drift(&sys.d2, &sys.g22, &mut d),
        a11: potential(&sys.a11, &sys.d1, &sys.g11, &mut d),
        a22: potential(&sys.a22, &sys.d2, &sys.g22, &mut d),
        a12: cross(&sys.a12, &sys.g12, &mut d),
        a21,
        g21: e1,
        ..sys.clone()
    };

    let check = Tape::compile(&[theta.clone(), &d.diff(&theta, 1) + &(&sys.a21 * &theta)]);
    let mut ws = Workspace::default();
    let mut v = [0.0; 2];
    let (mut lower_bound, mut residual) = (f64::INFINITY, 0.0f64);
    for p in grid_points(w, per_axis.min(8)) {
        check.eval_into(&p, &mut ws, &mut v)?;
        lower_bound = lower_bound.min(v[0].abs());
        residual = residual.max(v[1].abs());
    }
    Ok(Gauged { system, gauge: GaugeFunction { theta, lower_bound, residual } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::parse_expression;
    use crate::system::SystemSpec;

    fn sys(a21: &str) -> ParabolicSystem {
        let spec: SystemSpec = serde_json::from_str(&format!(
            r#"{{"dimension": 2, "a21": "{a21}", "a22": "x2", "d2": [["1 + 0.1*x2^2", "0"], ["0", "2"]], "g22": ["x1", "0"],
                "domain": {{"lo": [0, 0], "hi": [1, 1]}}, "horizon": 1,
                "control_window": {{"lo": [0, 0.2, 0.2], "hi": [1, 0.8, 0.8]}}}}"#
        ))
        .unwrap();
        spec.build().unwrap()
    }

    #[test]
    fn zero_coupling_potential_leaves_system_unchanged() {
        let s = sys("0");
        let g = gauge_transform(&s, 1e-12, 4).unwrap();
        assert!(g.gauge.theta.is_one());
        assert_eq!(g.system.a22, s.a22);
        assert_eq!(g.system.g22, s.g22);
    }

    #[test]
    fn unit_coupling_potential() {
        let s = sys("1");
        let g = gauge_transform(&s, 1e-12, 4).unwrap();
        assert!(g.system.a21.is_zero() || g.system.a21.eval(&[0.5, 0.5, 0.5]).unwrap().abs() < 1e-12);
        // θ = e^{−(x1 − 0.2)}: ∇θ = (−θ, 0), Div(d∇θ) = ∂1(−d11 θ) = d11 θ
        // ā22 = a22 + θ⁻¹(d11 θ + g22·∇θ) = x2 + d11 − x1
        let p = [0.3, 0.55, 0.45];
        let (x1, x2) = (p[1], p[2]);
        let expected = x2 + (1.0 + 0.1 * x2 * x2) - x1;
        assert!((g.system.a22.eval(&p).unwrap() - expected).abs() < 1e-10);
        // ḡ22 = g22 + 2θ⁻¹ d2 ∇θ = (x1 − 2 d11, 0)
        assert!((g.system.g22[0].eval(&p).unwrap() - (x1 - 2.0 * (1.0 + 0.1 * x2 * x2))).abs() < 1e-10);
        assert!(g.gauge.residual < 1e-10);
    }

    #[test]
    fn product_coupling_potential_has_closed_form_gauge() {
        let s = sys("x2");
        let g = gauge_transform(&s, 1e-12, 4).unwrap();
        let closed = parse_expression("exp(-(x1 - 0.2)*x2)", 2).unwrap();
        for p in [[0.1, 0.3, 0.7], [0.9, 0.75, 0.25]] {
            assert!((g.gauge.theta.eval(&p).unwrap() - closed.eval(&p).unwrap()).abs() < 1e-12);
        }
        assert!(g.gauge.residual < 1e-10);
    }
}
