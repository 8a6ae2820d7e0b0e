//! Right inverse of the full operator `L` from an elimination result for
//! the adjoint pair `(L1, L3)`.

use super::eliminate::EliminationResult;
use super::operators::SystemOperators;
use crate::symbolic::{Differentiator, LinDiffOp, OpMatrix};
use crate::system::Window;

#[derive(Clone, Debug)]
pub struct FullSolver {
    /// Maps `(f1, f2)` to `(z1, z2, v)`; `L∘M = Id` on `window`.
    pub m: OpMatrix,
    pub window: Window,
    /// Order of the `z`-rows.
    pub order_z: i32,
    /// Order of the `v`-row.
    pub order_v: i32,
    /// Order of the elimination pair `(M1, M2)`.
    pub order_pair: i32,
}

/// From `P∘L1 + Q∘L3 = Id` and `L3 = L2 − C∘L1`:
/// `(P − Q∘C)∘L1 + Q∘L2 = Id`; transposing gives `L0∘(M1*, M2*)ᵀ = Id`,
/// and row one of `L` is solved for `v`.
pub fn assemble_full_solver(ops: &SystemOperators, elim: &EliminationResult) -> FullSolver {
    let mut d = Differentiator::new();
    let m1_full = elim.m1.sub(&elim.m2.compose_with(&ops.c, &mut d));
    let m2_full = elim.m2.clone();
    let z1 = m1_full.adjoint_with(&mut d);
    let z2 = m2_full.adjoint_with(&mut d);
    let v = ops.r1.get(0, 0).compose_with(&z1, &mut d).add(&ops.r1.get(0, 1).compose_with(&z2, &mut d));
    let minus_id = LinDiffOp::identity().scale(&crate::symbolic::Expr::constant(-1.0));
    let m = OpMatrix::from_rows(vec![
        vec![LinDiffOp::zero(), z1],
        vec![LinDiffOp::zero(), z2],
        vec![minus_id, v],
    ]);
    FullSolver {
        order_z: m.row_order(0).max(m.row_order(1)),
        order_v: m.row_order(2),
        order_pair: elim.order,
        m,
        window: elim.window.clone(),
    }
}
