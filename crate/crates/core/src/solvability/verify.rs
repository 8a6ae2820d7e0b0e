//! Numerical checks of operator identities on random test functions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::testfn::random_test_function;
use crate::symbolic::{Differentiator, EvalError, Expr, LinDiffOp, OpMatrix, Tape, Workspace};
use crate::system::Window;

/// Points per test function at which identities are sampled.
const POINTS: usize = 16;

/// Max over points of `|l_i − r_i|`, relative to the largest `|l_i|, |r_i|` seen.
pub fn relative_residual(lhs: &[Expr], rhs: &[Expr], points: &[Vec<f64>]) -> Result<f64, EvalError> {
    relative_residual_scaled(lhs, rhs, &[], points)
}

/// As [`relative_residual`], with the magnitudes of `parts` (summands of
/// the sides, say) also entering the scale.
pub fn relative_residual_scaled(lhs: &[Expr], rhs: &[Expr], parts: &[Expr], points: &[Vec<f64>]) -> Result<f64, EvalError> {
    let mut all: Vec<Expr> = lhs.to_vec();
    all.extend_from_slice(rhs);
    all.extend_from_slice(parts);
    let tape = Tape::compile(&all);
    let mut ws = Workspace::default();
    let mut vals = vec![0.0; all.len()];
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    let k = lhs.len();
    for p in points {
        tape.eval_into(p, &mut ws, &mut vals)?;
        for i in 0..k {
            diff = diff.max((vals[i] - vals[k + i]).abs());
            scale = scale.max(vals[i].abs()).max(vals[k + i].abs());
        }
        for v in &vals[2 * k..] {
            scale = scale.max(v.abs());
        }
    }
    Ok(if scale == 0.0 { diff } else { diff / scale })
}

fn sample_points(window: &Window, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..POINTS).map(|_| window.random_point(rng)).collect()
}

fn window_vars(window: &Window) -> u8 {
    ((1u16 << window.dims()) - 1) as u8
}

/// Max relative residual of `N u = A(L1 u) + B(L2 u)` over random `u`.
#[allow(clippy::too_many_arguments)]
pub fn verify_pair(
    n: &LinDiffOp,
    a: &LinDiffOp,
    b: &LinDiffOp,
    l1: &LinDiffOp,
    l2: &LinDiffOp,
    window: &Window,
    trials: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Differentiator::new();
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let u = random_test_function(&mut rng, window_vars(window));
        let lhs = n.apply_with(&u, &mut d);
        let first = a.apply_with(&l1.apply_with(&u, &mut d), &mut d);
        let second = b.apply_with(&l2.apply_with(&u, &mut d), &mut d);
        let pts = sample_points(window, &mut rng);
        worst = worst.max(relative_residual_scaled(&[lhs], &[&first + &second], &[first, second], &pts)?);
    }
    Ok(worst)
}

/// Max relative residual of `M1∘L1 + M2∘L2 = Id` over random `u`.
pub fn verify_identity_pair(
    m1: &LinDiffOp,
    m2: &LinDiffOp,
    l1: &LinDiffOp,
    l2: &LinDiffOp,
    window: &Window,
    trials: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    verify_pair(&LinDiffOp::identity(), m1, m2, l1, l2, window, trials, seed)
}

/// Max relative residual of `L∘M = Id` on random vectors of test functions.
pub fn verify_identity(l: &OpMatrix, m: &OpMatrix, window: &Window, trials: usize, seed: u64) -> Result<f64, EvalError> {
    assert_eq!(l.cols, m.rows, "L and M are not composable");
    assert_eq!(l.rows, m.cols, "L∘M is not square");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Differentiator::new();
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let f: Vec<Expr> = (0..m.cols).map(|_| random_test_function(&mut rng, window_vars(window))).collect();
        let z = m.apply_with(&f, &mut d);
        let lz = l.apply_with(&z, &mut d);
        let pts = sample_points(window, &mut rng);
        worst = worst.max(relative_residual(&lz, &f, &pts)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_against_identity_is_exact() {
        let w = Window::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        let r = verify_identity(&OpMatrix::identity(1), &OpMatrix::identity(1), &w, 3, 1).unwrap();
        assert_eq!(r, 0.0);
    }
}
