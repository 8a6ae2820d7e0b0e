//! The operators attached to a system in normal form.

use super::SolvabilityError;
use crate::symbolic::{Differentiator, Expr, LinDiffOp, MultiIndex, OpMatrix};
use crate::system::{div_grad, divergence, drift, ParabolicSystem};

#[derive(Clone, Debug)]
pub struct SystemOperators {
    /// `L(z1, z2, v)`, two rows by three columns.
    pub l: OpMatrix,
    /// Row one restricted to `z`: `R1(z) = l[0][0] z1 + l[0][1] z2`.
    pub r1: OpMatrix,
    /// `L0(z1, z2)` (one row).
    pub l0: OpMatrix,
    /// Formal adjoint of `L0` (one column): `(L1, L2)`.
    pub l0_star: OpMatrix,
    pub l1: LinDiffOp,
    pub l2: LinDiffOp,
    /// `L2 − C∘L1`, free of `x1`-derivatives.
    pub l3: LinDiffOp,
    pub c: LinDiffOp,
    pub g22_tilde: Vec<Expr>,
    pub a22_tilde: Expr,
}

/// `∂t − Div(d∇) − g·∇ − a`.
fn parabolic(d: &[Vec<Expr>], g: &[Expr], a: &Expr) -> LinDiffOp {
    LinDiffOp::partial(0).sub(&div_grad(d)).sub(&drift(g)).sub(&LinDiffOp::multiplication(a.clone()))
}

/// Splits `op = rest + C∘∂x1` with `rest` free of `x1`-derivatives.
pub fn split_x1(op: &LinDiffOp) -> (LinDiffOp, LinDiffOp) {
    let mut rest = LinDiffOp::zero();
    let mut c = LinDiffOp::zero();
    for (alpha, coeff) in op.terms() {
        match alpha.checked_sub(&MultiIndex::unit(1)) {
            Some(beta) => c.add_term(beta, coeff.clone()),
            None => rest.add_term(*alpha, coeff.clone()),
        }
    }
    (rest, c)
}

pub fn build_system_operators(sys: &ParabolicSystem) -> Result<SystemOperators, SolvabilityError> {
    if !sys.has_normal_form(8)? {
        return Err(SolvabilityError::NormalForm);
    }
    let n = sys.dimension;
    let r1_z1 = parabolic(&sys.d1, &sys.g11, &sys.a11);
    let r1_z2 = drift(&sys.g12).add(&LinDiffOp::multiplication(sys.a12.clone())).scale(&Expr::constant(-1.0));
    let l0_z1 = LinDiffOp::partial(1).scale(&Expr::constant(-1.0));
    let l0_z2 = parabolic(&sys.d2, &sys.g22, &sys.a22);

    let mut d = Differentiator::new();
    let l1 = l0_z1.adjoint_with(&mut d);
    let l2 = l0_z2.adjoint_with(&mut d);
    let (l3, c) = split_x1(&l2);

    let g22_tilde: Vec<Expr> = (0..n)
        .map(|i| &sys.g22[i] - &Expr::sum((0..n).map(|j| d.diff(&sys.d2[i][j], j + 1))))
        .collect();
    let a22_tilde = &divergence(&sys.g22) - &sys.a22;

    let minus_id = LinDiffOp::multiplication(Expr::constant(-1.0));
    Ok(SystemOperators {
        l: OpMatrix::from_rows(vec![
            vec![r1_z1.clone(), r1_z2.clone(), minus_id],
            vec![l0_z1.clone(), l0_z2.clone(), LinDiffOp::zero()],
        ]),
        r1: OpMatrix::from_rows(vec![vec![r1_z1, r1_z2]]),
        l0: OpMatrix::from_rows(vec![vec![l0_z1, l0_z2]]),
        l0_star: OpMatrix::from_rows(vec![vec![l1.clone()], vec![l2.clone()]]),
        l1,
        l2,
        l3,
        c,
        g22_tilde,
        a22_tilde,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{BoxDomain, Window};

    pub(crate) fn constant_1d(a22: f64) -> ParabolicSystem {
        let one = || vec![vec![Expr::one()]];
        ParabolicSystem {
            dimension: 1,
            d1: one(),
            d2: one(),
            g11: vec![Expr::zero()],
            g12: vec![Expr::zero()],
            g21: vec![Expr::one()],
            g22: vec![Expr::zero()],
            a11: Expr::zero(),
            a12: Expr::zero(),
            a21: Expr::zero(),
            a22: Expr::constant(a22),
            domain: BoxDomain { lo: vec![0.0], hi: vec![1.0] },
            horizon: 1.0,
            control_window: Window::new(vec![0.0, 0.2], vec![1.0, 0.4]),
            d0: 0.5,
        }
    }

    #[test]
    fn constant_coefficient_reduction() {
        let ops = build_system_operators(&constant_1d(0.7)).unwrap();
        assert_eq!(ops.l1, LinDiffOp::partial(1));
        // L2 = −∂t − ∂11 − 0.7
        assert_eq!(ops.l2.coeff(&MultiIndex::unit(0)), Expr::constant(-1.0));
        assert_eq!(ops.l2.coeff(&MultiIndex::from_slice(&[0, 2])), Expr::constant(-1.0));
        assert_eq!(ops.l2.coeff(&MultiIndex::zero()), Expr::constant(-0.7));
        assert_eq!(ops.l3.order_in(1), 0);
        assert_eq!(ops.l3.len(), 2);
        assert_eq!(ops.c, LinDiffOp::partial(1).scale(&Expr::constant(-1.0)));
        assert_eq!(ops.a22_tilde, Expr::constant(-0.7));
    }

    #[test]
    fn normal_form_is_required() {
        let mut sys = constant_1d(0.0);
        sys.g21 = vec![Expr::constant(2.0)];
        assert!(matches!(build_system_operators(&sys), Err(SolvabilityError::NormalForm)));
    }
}
