use std::collections::HashMap;

use super::expr::{Expr, Kind};
use super::multiindex::MultiIndex;

/// Symbolic differentiation with a memo shared across calls, so repeated
/// derivatives of related expressions reuse common subtrees.
#[derive(Default)]
pub struct Differentiator {
    memo: HashMap<(*const (), usize), (Expr, Expr)>,
}

// The raw pointers are only used as keys; the memo owns clones of the keyed
// expressions so the pointers stay valid.
unsafe impl Send for Differentiator {}

impl Differentiator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn diff(&mut self, e: &Expr, var: usize) -> Expr {
        if !e.depends_on(var) {
            return Expr::zero();
        }
        let key = (e.node_ptr(), var);
        if let Some((_, d)) = self.memo.get(&key) {
            return d.clone();
        }
        let d = match e.kind() {
            Kind::Const(_) => Expr::zero(),
            Kind::Var(v) => {
                if *v == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Kind::Sum(ts) => {
                let parts: Vec<Expr> = ts.iter().map(|t| self.diff(t, var)).collect();
                Expr::sum(parts)
            }
            Kind::Product(fs) => {
                let mut terms = Vec::with_capacity(fs.len());
                for i in 0..fs.len() {
                    let di = self.diff(&fs[i], var);
                    if di.is_zero() {
                        continue;
                    }
                    let others = fs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, f)| f.clone());
                    terms.push(Expr::product(others.chain(std::iter::once(di))));
                }
                Expr::sum(terms)
            }
            Kind::Pow(b, n) => {
                let db = self.diff(b, var);
                Expr::product([Expr::constant(*n as f64), Expr::powi(b.clone(), n - 1), db])
            }
            Kind::Sin(a) => {
                let da = self.diff(a, var);
                Expr::cos(a.clone()) * da
            }
            Kind::Cos(a) => {
                let da = self.diff(a, var);
                -(Expr::sin(a.clone()) * da)
            }
            Kind::Exp(a) => {
                let da = self.diff(a, var);
                e * &da
            }
            Kind::Bump(b) if b.power == 0 => Expr::bump_derivative(b.var, b.lo, b.hi, b.order + 1),
            Kind::Bump(b) => Expr::poly_bump_derivative(b.var, b.lo, b.hi, b.power, b.order + 1),
            Kind::Step(s) => Expr::step_derivative(s.var, s.lo, s.hi, s.order + 1),
            Kind::Integral(i) => {
                if i.var == var {
                    i.integrand.clone()
                } else {
                    let di = self.diff(&i.integrand, var);
                    Expr::integral(di, i.var, i.lower, i.tol)
                }
            }
            Kind::Field(f) => {
                let order = f.order.add(&MultiIndex::unit(var));
                Expr::field_derivative(f.field.clone(), order)
            }
        };
        self.memo.insert(key, (e.clone(), d.clone()));
        d
    }

    /// `D^α e`.
    pub fn derivative(&mut self, e: &Expr, alpha: &MultiIndex) -> Expr {
        let mut out = e.clone();
        for (v, &a) in alpha.0.iter().enumerate() {
            for _ in 0..a {
                out = self.diff(&out, v);
                if out.is_zero() {
                    return out;
                }
            }
        }
        out
    }
}

/// `∂e/∂x_var`.
pub fn differentiate(e: &Expr, var: usize) -> Expr {
    Differentiator::new().diff(e, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_rule_on_sine() {
        let e = Expr::sin(Expr::x(1) * 3.0);
        let d = differentiate(&e, 1);
        assert_eq!(d, Expr::cos(Expr::x(1) * 3.0) * 3.0);
    }

    #[test]
    fn time_derivative_of_static_expression_vanishes() {
        let e = Expr::exp(Expr::x(1)) / (Expr::x(2) + 2.0);
        assert!(differentiate(&e, 0).is_zero());
    }

    #[test]
    fn bump_derivative_keeps_support() {
        let lo = std::f64::consts::PI / 12.0;
        let hi = std::f64::consts::PI / 6.0;
        let d = differentiate(&Expr::bump(1, lo, hi), 1);
        assert!(matches!(d.kind(), Kind::Bump(b) if b.order == 1));
        assert_eq!(d.eval(&[0.0, 0.6]).unwrap(), 0.0);
        assert!(d.eval(&[0.0, 0.5]).unwrap() != 0.0);
    }

    #[test]
    fn quotient_rule() {
        let x = Expr::x(1);
        let e = Expr::one() / (&x * &x + 1.0);
        let d = differentiate(&e, 1);
        let x0: f64 = 0.7;
        let exact = -2.0 * x0 / (x0 * x0 + 1.0).powi(2);
        assert!((d.eval(&[0.0, x0]).unwrap() - exact).abs() < 1e-15);
    }
}
