//! Globally adaptive Gauss–Kronrod (7, 15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::eval::{Tape, Workspace};
use super::expr::{Expr, MAX_VARS};
use super::EvalError;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_489_0,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

/// Maximum number of subintervals before giving up.
const MAX_INTERVALS: usize = 4000;

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<Piece, EvalError>
where
    F: FnMut(f64) -> Result<f64, EvalError>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x)? + f(c + x)?;
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * h;
    let error = ((kronrod - gauss) * h).abs();
    Ok(Piece { a, b, value, error })
}

/// `∫_lo^hi f`, to absolute error `tol`; `lo > hi` flips the sign.
pub fn integrate_adaptive_fn<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, EvalError>
where
    F: FnMut(f64) -> Result<f64, EvalError>,
{
    if lo == hi {
        return Ok(0.0);
    }
    if lo > hi {
        return integrate_adaptive_fn(f, hi, lo, tol).map(|v| -v);
    }
    let first = gk15(&mut f, lo, hi)?;
    let mut total = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    while error > tol && error > 64.0 * f64::EPSILON * total.abs() {
        if heap.len() >= MAX_INTERVALS {
            return Err(EvalError::Quadrature { lo, hi, error });
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(EvalError::Quadrature { lo, hi, error });
        }
        let left = gk15(&mut f, worst.a, mid)?;
        let right = gk15(&mut f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed the drift of the running updates.
    Ok(heap.iter().map(|p| p.value).sum())
}

/// As [`integrate_adaptive_fn`], split at the `breaks` inside `(lo, hi)` so
/// that no panel straddles a transition narrower than the Kronrod nodes can
/// see; the tolerance is shared evenly between the panels.
pub fn integrate_piecewise_fn<F>(mut f: F, lo: f64, hi: f64, breaks: &[f64], tol: f64) -> Result<f64, EvalError>
where
    F: FnMut(f64) -> Result<f64, EvalError>,
{
    if lo > hi {
        return integrate_piecewise_fn(f, hi, lo, breaks, tol).map(|v| -v);
    }
    let mut cuts = vec![lo];
    cuts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    cuts.push(hi);
    let share = tol / (cuts.len() - 1) as f64;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate_adaptive_fn(&mut f, w[0], w[1], share)?;
    }
    Ok(total)
}

/// `∫_lo^hi e dx_var` with the remaining coordinates taken from `point`.
pub fn integrate_adaptive(e: &Expr, var: usize, lo: f64, hi: f64, tol: f64, point: &[f64]) -> Result<f64, EvalError> {
    if e.is_zero() {
        return Ok(0.0);
    }
    let tape = Tape::single(e);
    let mut p = [0.0; MAX_VARS];
    let n = point.len().min(MAX_VARS);
    p[..n].copy_from_slice(&point[..n]);
    let mut ws = Workspace::default();
    let mut out = [0.0];
    integrate_piecewise_fn(
        |y| {
            let mut q = p;
            q[var] = y;
            tape.eval_into(&q, &mut ws, &mut out)?;
            Ok(out[0])
        },
        lo,
        hi,
        &e.breakpoints(var),
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_up_to_degree_twelve() {
        for deg in 0..=12 {
            let v = integrate_adaptive_fn(|x| Ok(x.powi(deg)), -0.5, 1.5, 1e-13).unwrap();
            let exact = (1.5f64.powi(deg + 1) - (-0.5f64).powi(deg + 1)) / (deg + 1) as f64;
            assert!((v - exact).abs() <= 1e-13, "deg {deg}: {v} vs {exact}");
        }
    }

    #[test]
    fn sin_cos_product_matches_antiderivative() {
        let e = Expr::cos(Expr::x(1) * 3.0) * Expr::sin(Expr::x(1) * 3.0);
        let v = integrate_adaptive(&e, 1, 0.0, 7.0 * PI / 15.0, 1e-12, &[0.0, 0.0]).unwrap();
        let exact = (7.0 * PI / 5.0).sin().powi(2) / 6.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let v = integrate_adaptive_fn(|x| Ok(x.exp()), 1.0, 0.0, 1e-12).unwrap();
        assert!((v + (1f64.exp() - 1.0)).abs() < 1e-12);
    }
}
