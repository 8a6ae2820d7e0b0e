//! Potential with an adjoint eigenfunction that is constant on a window:
//! `φ` is the first Dirichlet eigenfunction away from `ω2`, `1` on `ω1`, and
//! `a := (−Δφ − λ1 φ)/φ` makes `−Δφ − aφ = λ1 φ` hold identically.

use std::f64::consts::PI;

use serde::Serialize;

use super::SpectralError;
use crate::symbolic::{Differentiator, Expr, MultiIndex, Tape};
use crate::system::{grid_points, BoxDomain, ParabolicSystem, Window};

#[derive(Clone, Debug)]
pub struct BlendedPotential {
    pub domain: BoxDomain,
    pub omega: BoxDomain,
    pub omega1: BoxDomain,
    pub omega2: BoxDomain,
    pub phi: Expr,
    pub a: Expr,
    /// First Dirichlet eigenvalue `Σ (π/L_i)²` of `−Δ` on the box.
    pub lambda1: f64,
    /// Smallest sampled `φ` on `ω2`.
    pub min_phi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlendedSummary {
    pub phi: String,
    pub a: String,
    pub lambda1: f64,
    pub min_phi: f64,
}

fn strictly_inside(inner: &BoxDomain, outer: &BoxDomain) -> bool {
    inner.lo.len() == outer.lo.len()
        && (0..inner.lo.len()).all(|i| inner.lo[i] > outer.lo[i] && inner.hi[i] < outer.hi[i] && inner.lo[i] < inner.hi[i])
}

pub fn build_blended_potential_nd(
    domain: &BoxDomain,
    omega: &BoxDomain,
    omega1: &BoxDomain,
    omega2: &BoxDomain,
    delta: f64,
) -> Result<BlendedPotential, SpectralError> {
    let n = domain.dimension();
    if !(strictly_inside(omega, omega1) && strictly_inside(omega1, omega2) && strictly_inside(omega2, domain)) {
        return Err(SpectralError::Nesting("need ω ⊂⊂ ω1 ⊂⊂ ω2 ⊂⊂ Ω".into()));
    }
    if !(delta > 0.0) {
        return Err(SpectralError::Nesting(format!("δ = {delta} must be positive")));
    }
    let mut phi1 = Expr::one();
    let mut plateau = Expr::one();
    let mut lambda1 = 0.0;
    for i in 0..n {
        let len = domain.hi[i] - domain.lo[i];
        let arg = (&Expr::x(i + 1) - &Expr::constant(domain.lo[i])).scale(PI / len);
        phi1 = &phi1 * &Expr::sin(arg);
        lambda1 += (PI / len).powi(2);
        plateau = &plateau * &Expr::plateau(i + 1, omega2.lo[i], omega1.lo[i], omega1.hi[i], omega2.hi[i]);
    }
    // (1 − P) φ1 + P: a convex combination of positive functions on ω2
    let phi = &(&phi1 * &(&Expr::one() - &plateau)) + &plateau;
    let mut d = Differentiator::new();
    let lap = Expr::sum((1..=n).map(|i| d.derivative(&phi, &MultiIndex::unit(i).add(&MultiIndex::unit(i)))));
    let num = &lap.scale(-1.0) - &phi.scale(lambda1);
    let a = &num * &phi.clone().recip();

    let mut lo = vec![0.0];
    lo.extend(&omega2.lo);
    let mut hi = vec![1.0];
    hi.extend(&omega2.hi);
    let tape = Tape::single(&phi);
    let mut min_phi = f64::INFINITY;
    for p in grid_points(&Window::new(lo, hi), 41) {
        min_phi = min_phi.min(tape.eval1(&p)?);
    }
    if min_phi <= delta {
        return Err(SpectralError::Construction(format!("φ drops to {min_phi} ≤ δ = {delta} on ω2")));
    }
    Ok(BlendedPotential {
        domain: domain.clone(),
        omega: omega.clone(),
        omega1: omega1.clone(),
        omega2: omega2.clone(),
        phi,
        a,
        lambda1,
        min_phi,
    })
}

impl BlendedPotential {
    pub fn summary(&self) -> BlendedSummary {
        BlendedSummary { phi: self.phi.to_string(), a: self.a.to_string(), lambda1: self.lambda1, min_phi: self.min_phi }
    }

    /// `∂t y1 = Δy1 + 1_ω u`, `∂t y2 = Δy2 + a y2 + ∂x1 y1`, controlled on `(0,T) × ω`.
    pub fn system(&self, horizon: f64) -> ParabolicSystem {
        cascade_system(&self.domain, &self.omega, self.a.clone(), horizon)
    }
}

/// Identity diffusions, coupling `∂x1 y1`, potential `a` in equation 2.
pub fn cascade_system(domain: &BoxDomain, omega: &BoxDomain, a: Expr, horizon: f64) -> ParabolicSystem {
    let n = domain.dimension();
    let id: Vec<Vec<Expr>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { Expr::one() } else { Expr::zero() }).collect()).collect();
    let zeros = vec![Expr::zero(); n];
    let mut g21 = zeros.clone();
    g21[0] = Expr::one();
    let mut lo = vec![0.0];
    lo.extend(&omega.lo);
    let mut hi = vec![horizon];
    hi.extend(&omega.hi);
    ParabolicSystem {
        dimension: n,
        d1: id.clone(),
        d2: id,
        g11: zeros.clone(),
        g12: zeros.clone(),
        g21,
        g22: zeros,
        a11: Expr::zero(),
        a12: Expr::zero(),
        a21: Expr::zero(),
        a22: a,
        domain: domain.clone(),
        horizon,
        control_window: Window::new(lo, hi),
        d0: 1.0,
    }
}
