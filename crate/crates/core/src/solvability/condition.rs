//! Numerical test of whether `ã22` lies in the module spanned, with
//! coefficients depending on `(t, x2, ..., xN)` only, by the derivative
//! coefficients of `L3`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::operators::SystemOperators;
use super::SolvabilityError;
use crate::symbolic::{Expr, MultiIndex, Tape, Workspace};
use crate::system::Window;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct SliceResidual {
    /// Fixed coordinates `(t, x2, ..., xN)` of the slice.
    pub coords: Vec<f64>,
    pub residual: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub verdict: Verdict,
    /// Sub-window around the slice with the largest residual.
    pub witness_window: Option<Window>,
    pub slices: Vec<SliceResidual>,
    pub tolerance: f64,
    /// Printed generators and target.
    pub generators: Vec<String>,
    pub target: String,
}

#[derive(Clone, Copy, Debug)]
pub struct SliceGrid {
    /// Slices per transverse axis the data depends on.
    pub slices_per_axis: usize,
    /// `x1` samples per slice.
    pub samples: usize,
}

impl Default for SliceGrid {
    fn default() -> Self {
        SliceGrid { slices_per_axis: 8, samples: 32 }
    }
}

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Relative size below which a sampled vector counts as zero.
const DEGENERATE: f64 = 1e-13;

pub fn check_condition(
    ops: &SystemOperators,
    window: &Window,
    grid: SliceGrid,
    tol: f64,
) -> Result<ConditionReport, SolvabilityError> {
    let generators: Vec<Expr> = ops.l3.terms().filter(|(a, _)| !a.is_zero()).map(|(_, c)| c.clone()).collect();
    let target = ops.l3.coeff(&MultiIndex::zero());
    let mut all = generators.clone();
    all.push(target.clone());
    let tape = Tape::compile(&all);
    let mask = all.iter().fold(0u8, |m, e| m | e.vars());
    let transverse: Vec<usize> = (0..window.dims()).filter(|&a| a != 1 && mask & (1 << a) != 0).collect();
    let n_slices = grid.slices_per_axis.pow(transverse.len() as u32);
    let k = generators.len();
    let m = grid.samples;

    let mut ws = Workspace::default();
    let mut vals = vec![0.0; all.len()];
    let mut slices = Vec::with_capacity(n_slices);
    let mut point = window.center();
    for s in 0..n_slices {
        let mut rem = s;
        for &axis in &transverse {
            point[axis] = window.sample(axis, rem % grid.slices_per_axis, grid.slices_per_axis);
            rem /= grid.slices_per_axis;
        }
        let mut g = DMatrix::<f64>::zeros(m, k);
        let mut rhs = DVector::<f64>::zeros(m);
        for i in 0..m {
            point[1] = window.sample(1, i, m);
            tape.eval_into(&point, &mut ws, &mut vals)?;
            for j in 0..k {
                g[(i, j)] = vals[j];
            }
            rhs[i] = vals[k];
        }
        let scale = g.iter().chain(rhs.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
        let target_norm = rhs.norm();
        let (residual, degenerate) = if scale < f64::MIN_POSITIVE {
            (0.0, true)
        } else if target_norm <= DEGENERATE * scale * (m as f64).sqrt() {
            (0.0, false)
        } else {
            let svd = g.clone().svd(true, true);
            let cutoff = 1e-12 * svd.singular_values.max();
            let lambda = svd.solve(&rhs, cutoff).map_err(|e| SolvabilityError::Numerical(e.to_string()))?;
            ((&rhs - &g * lambda).norm() / target_norm, false)
        };
        slices.push(SliceResidual { coords: transverse.iter().map(|&a| point[a]).collect(), residual, degenerate });
    }

    let max_res = slices.iter().map(|s| s.residual).fold(0.0f64, f64::max);
    let verdict = if max_res >= 10.0 * tol {
        Verdict::Holds
    } else if slices.iter().all(|s| !s.degenerate && s.residual <= tol) {
        Verdict::Fails
    } else {
        Verdict::Inconclusive
    };
    let witness_window = (verdict == Verdict::Holds).then(|| {
        let best = slices.iter().enumerate().max_by(|a, b| a.1.residual.total_cmp(&b.1.residual)).map(|(i, _)| i).unwrap_or(0);
        let mut w = window.clone();
        let mut rem = best;
        for &axis in &transverse {
            let c = rem % grid.slices_per_axis;
            rem /= grid.slices_per_axis;
            let h = window.width(axis) / grid.slices_per_axis as f64;
            w.lo[axis] = window.lo[axis] + c as f64 * h;
            w.hi[axis] = w.lo[axis] + h;
        }
        w
    });
    Ok(ConditionReport {
        verdict,
        witness_window,
        slices,
        tolerance: tol,
        generators: generators.iter().map(|g| g.to_string()).collect(),
        target: target.to_string(),
    })
}
