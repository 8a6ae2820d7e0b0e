//! One-dimensional witness on `Ω = (0, π)`, `ω = (7π/15, 8π/15)`: functions
//! `φ, ψ` and a potential `a` with
//!
//! ```text
//! −φ'' − ψ' = 9φ,   −ψ'' − aψ = 9ψ,   φ = ψ = 0 at 0 and π,   φ = 0 on ω.
//! ```
//!
//! `ψ` is `sin 3x` blended to the constant `sin(7π/5)` across the collars
//! around `ω`, plus nonnegative bumps `C1θ1 + C2θ2 + C3θ3`; `C1` and `α` kill
//! `φ` on `ω`, `C2` or `C3` kills `φ(π)`.

use std::f64::consts::PI;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::SpectralError;
use crate::symbolic::{differentiate, integrate_adaptive, Expr, Tape};

pub const S_WITNESS: f64 = 9.0;

/// Profile of the bump `θ1` on `(π/12, π/6)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Theta1Profile {
    /// `exp(−1/(1−r²))` scaled to unit mass.
    Bump,
    /// `eˣ` on `[lo, hi]`, cut off smoothly inside `(π/12, π/6)`.
    Exp { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleOptions {
    pub eps_blend: f64,
    pub quad_tol: f64,
    pub theta1: Theta1Profile,
    pub theta1_support: (f64, f64),
    pub theta2_support: (f64, f64),
    pub theta3_support: (f64, f64),
}

impl Default for CounterexampleOptions {
    fn default() -> Self {
        CounterexampleOptions {
            eps_blend: 1e-3,
            quad_tol: 1e-10,
            theta1: Theta1Profile::Exp { lo: PI / 12.0 + 0.06, hi: PI / 6.0 - 0.06 },
            theta1_support: (PI / 12.0, PI / 6.0),
            theta2_support: (9.0 * PI / 12.0, 5.0 * PI / 6.0),
            theta3_support: (5.0 * PI / 6.0, 11.0 * PI / 12.0),
        }
    }
}

/// Which constant closed `φ(π) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dichotomy {
    /// The quantity was negative: `C3 = 0`, `C2 > 0`.
    UseTheta2,
    /// The quantity was nonnegative: `C2 = 0`, `C3 > 0`.
    UseTheta3,
}

#[derive(Clone, Debug)]
pub struct CounterexampleData {
    pub psi: Expr,
    pub phi: Expr,
    pub a: Expr,
    /// `ψ` without the `θ` bumps: `sin 3x` blended to the constant on `ω̄`.
    pub psi_base: Expr,
    pub theta: [Expr; 3],
    pub c: [f64; 3],
    pub alpha: f64,
    pub s: f64,
    pub omega: (f64, f64),
    /// Half-width of the blend ramps next to `ω`.
    pub blend_width: f64,
    pub dichotomy_quantity: f64,
    pub dichotomy: Dichotomy,
    pub options: CounterexampleOptions,
    pub checks: CounterexampleChecks,
}

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleChecks {
    pub phi_at_0: f64,
    pub phi_at_pi: f64,
    pub psi_at_0: f64,
    pub psi_at_pi: f64,
    pub max_phi_on_omega: f64,
    pub max_psi_deviation_on_omega: f64,
    pub max_collar_deviation: f64,
    pub max_abs_a: f64,
    pub theta1_cos_moment: f64,
}

#[derive(Serialize)]
struct Witness<'a> {
    c1: f64,
    c2: f64,
    c3: f64,
    alpha: f64,
    s: f64,
    omega: (f64, f64),
    eps_blend: f64,
    blend_width: f64,
    dichotomy_quantity: f64,
    dichotomy: Dichotomy,
    psi: String,
    a: String,
    checks: &'a CounterexampleChecks,
}

fn x() -> Expr {
    Expr::x(1)
}

fn sin3() -> Expr {
    Expr::sin(x().scale(3.0))
}

fn cos3() -> Expr {
    Expr::cos(x().scale(3.0))
}

fn integrate(e: &Expr, lo: f64, hi: f64, tol: f64) -> Result<f64, SpectralError> {
    Ok(integrate_adaptive(e, 1, lo, hi, tol, &[0.0, 0.0])?)
}

fn unit_mass_bump(lo: f64, hi: f64, tol: f64) -> Result<Expr, SpectralError> {
    let b = Expr::bump(1, lo, hi);
    let mass = integrate(&b, lo, hi, tol)?;
    Ok(b.scale(1.0 / mass))
}

fn theta1(opts: &CounterexampleOptions) -> Result<Expr, SpectralError> {
    let (lo, hi) = opts.theta1_support;
    match opts.theta1 {
        Theta1Profile::Bump => unit_mass_bump(lo, hi, opts.quad_tol * 1e-3),
        Theta1Profile::Exp { lo: a, hi: b } => {
            if !(lo < a && a < b && b < hi) {
                return Err(SpectralError::Construction(format!("exp window ({a}, {b}) not inside ({lo}, {hi})")));
            }
            Ok(&Expr::exp(x()) * &Expr::plateau(1, lo, a, b, hi))
        }
    }
}

pub fn build_counterexample_1d(opts: &CounterexampleOptions) -> Result<CounterexampleData, SpectralError> {
    let omega = (7.0 * PI / 15.0, 8.0 * PI / 15.0);
    let collar = PI / 15.0;
    let c = (7.0 * PI / 5.0).sin();
    let tol = opts.quad_tol;
    // constants are integrated more tightly than the φ quadrature so that
    // the cancellation on ω is limited by the latter
    let ctol = tol * 1e-3;
    if !(opts.eps_blend > 0.0) {
        return Err(SpectralError::Construction("ε_blend must be positive".into()));
    }
    // |ψ0 − sin 3x| ≤ |c − sin 3x| ≤ 3·(distance to ∂ω) on the ramps
    let blend_width = (opts.eps_blend / 3.0 * (1.0 - 1e-9)).min(collar);
    let plateau = Expr::plateau(1, omega.0 - blend_width, omega.0, omega.1, omega.1 + blend_width);
    let psi_base = &sin3() + &(&plateau * &(&Expr::constant(c) - &sin3()));

    let th1 = theta1(opts)?;
    let th2 = unit_mass_bump(opts.theta2_support.0, opts.theta2_support.1, ctol)?;
    let th3 = unit_mass_bump(opts.theta3_support.0, opts.theta3_support.1, ctol)?;

    let cos_moment = |e: &Expr, lo: f64, hi: f64| integrate(&(&cos3() * e), lo, hi, ctol);
    let sin_moment = |e: &Expr, lo: f64, hi: f64| integrate(&(&sin3() * e), lo, hi, ctol);

    let m1 = cos_moment(&th1, opts.theta1_support.0, opts.theta1_support.1)?;
    if !(m1 > 0.0) {
        return Err(SpectralError::Construction(format!("∫cos(3y)θ1 = {m1} is not positive")));
    }
    // (1/3) sin²(7π/5) − ∫_0^{7π/15} cos(3y) ψ = 0
    let base_defect = c * c / 3.0 - cos_moment(&psi_base, 0.0, omega.0)?;
    let c1 = base_defect / m1;
    if !(c1 > 0.0) {
        return Err(SpectralError::Construction(format!(
            "C1 = {c1} is not positive; ε_blend = {} is too large for the sign condition",
            opts.eps_blend
        )));
    }
    let psi_c1 = &psi_base + &th1.scale(c1);
    let alpha = (7.0 * PI / 5.0).cos() * c / 3.0 + sin_moment(&psi_c1, 0.0, omega.0)?;

    let q = cos_moment(&psi_c1, 0.0, 2.0 * PI / 3.0)? / 3.0
        + integrate(&(&cos3() * &sin3()), 2.0 * PI / 3.0, PI, ctol)? / 3.0;
    // φ(π) = ∫_0^π cos(3y) ψ(y) dy
    let phi_pi = cos_moment(&psi_c1, 0.0, PI)?;
    let (dichotomy, c2, c3) = if q < 0.0 {
        let m2 = cos_moment(&th2, opts.theta2_support.0, opts.theta2_support.1)?;
        (Dichotomy::UseTheta2, -phi_pi / m2, 0.0)
    } else {
        let m3 = cos_moment(&th3, opts.theta3_support.0, opts.theta3_support.1)?;
        (Dichotomy::UseTheta3, 0.0, -phi_pi / m3)
    };
    if c2 < 0.0 || c3 < 0.0 || (c2 == 0.0 && c3 == 0.0) {
        return Err(SpectralError::Construction(format!("dichotomy gave C2 = {c2}, C3 = {c3}")));
    }
    let psi = Expr::sum([psi_base.clone(), th1.scale(c1), th2.scale(c2), th3.scale(c3)]);

    // φ = α sin 3x − (1/3)∫_0^x sin(3(x−y)) ψ'(y) dy
    //   = α sin 3x − sin 3x ∫_0^x sin(3y)ψ dy − cos 3x ∫_0^x cos(3y)ψ dy   (by parts, ψ(0) = 0)
    let i_s = Expr::integral(&sin3() * &psi, 1, 0.0, tol);
    let i_c = Expr::integral(&cos3() * &psi, 1, 0.0, tol);
    let phi = Expr::sum([sin3().scale(alpha), (&sin3() * &i_s).scale(-1.0), (&cos3() * &i_c).scale(-1.0)]);

    // a = (−ψ'' − 9ψ)/ψ; the sin 3x part cancels exactly, so with r = ψ − sin 3x
    // the numerator −(r'' + 9r) vanishes identically wherever ψ = sin 3x
    let r = &psi - &sin3();
    let r2 = differentiate(&differentiate(&r, 1), 1);
    let a = &(&r2 + &r.scale(S_WITNESS)).scale(-1.0) * &psi.clone().recip();

    let mut data = CounterexampleData {
        psi,
        phi,
        a,
        psi_base,
        theta: [th1, th2, th3],
        c: [c1, c2, c3],
        alpha,
        s: S_WITNESS,
        omega,
        blend_width,
        dichotomy_quantity: q,
        dichotomy,
        options: opts.clone(),
        checks: CounterexampleChecks {
            phi_at_0: 0.0,
            phi_at_pi: 0.0,
            psi_at_0: 0.0,
            psi_at_pi: 0.0,
            max_phi_on_omega: 0.0,
            max_psi_deviation_on_omega: 0.0,
            max_collar_deviation: 0.0,
            max_abs_a: 0.0,
            theta1_cos_moment: m1,
        },
    };
    data.checks = data.run_checks(1000)?;
    if !(data.checks.max_collar_deviation < opts.eps_blend) {
        return Err(SpectralError::Construction(format!(
            "collar deviation {} ≥ ε_blend {}",
            data.checks.max_collar_deviation, opts.eps_blend
        )));
    }
    if !data.checks.max_abs_a.is_finite() {
        return Err(SpectralError::Construction("potential is not finite on the samples".into()));
    }
    Ok(data)
}

impl CounterexampleData {
    fn run_checks(&self, samples: usize) -> Result<CounterexampleChecks, SpectralError> {
        let tape = Tape::compile(&[self.phi.clone(), self.psi.clone()]);
        let at = |x: f64| tape.eval(&[0.0, x]);
        // ψ vanishes at the ends, so a is only sampled inside
        let a_tape = Tape::single(&self.a);
        let (lo, hi) = self.omega;
        let c = (7.0 * PI / 5.0).sin();
        let (mut max_phi, mut max_dev) = (0.0f64, 0.0f64);
        for k in 0..=200 {
            let x = lo + (hi - lo) * k as f64 / 200.0;
            let v = at(x)?;
            max_phi = max_phi.max(v[0].abs());
            max_dev = max_dev.max((v[1] - c).abs());
        }
        let mut collar = 0.0f64;
        let mut max_a = 0.0f64;
        for k in 0..samples {
            let x = (k as f64 + 0.5) * PI / samples as f64;
            let v = at(x)?;
            let a = a_tape.eval1(&[0.0, x]);
            let in_collar = (x >= lo - PI / 15.0 && x <= lo) || (x >= hi && x <= hi + PI / 15.0);
            if in_collar {
                collar = collar.max((v[1] - (3.0 * x).sin()).abs());
            }
            max_a = match a {
                Ok(a) if a.is_finite() => max_a.max(a.abs()),
                _ => f64::INFINITY,
            };
        }
        for x in [lo - PI / 15.0, lo, hi, hi + PI / 15.0] {
            collar = collar.max((at(x)?[1] - (3.0 * x).sin()).abs());
        }
        let (v0, vpi) = (at(0.0)?, at(PI)?);
        Ok(CounterexampleChecks {
            phi_at_0: v0[0],
            phi_at_pi: vpi[0],
            psi_at_0: v0[1],
            psi_at_pi: vpi[1],
            max_phi_on_omega: max_phi,
            max_psi_deviation_on_omega: max_dev,
            max_collar_deviation: collar,
            max_abs_a: max_a,
            theta1_cos_moment: self.checks.theta1_cos_moment,
        })
    }

    /// `x ↦ ψ, φ, a` as CSV on `n` cell-centred points of `(0, π)`.
    pub fn write_samples<W: Write>(&self, out: &mut W, which: &str, n: usize) -> io::Result<()> {
        let e = match which {
            "psi" => &self.psi,
            "phi" => &self.phi,
            "a" => &self.a,
            other => return Err(io::Error::new(io::ErrorKind::InvalidInput, format!("unknown field {other}"))),
        };
        let tape = Tape::single(e);
        writeln!(out, "x [length],{which} [1]")?;
        for k in 0..n {
            let x = (k as f64 + 0.5) * PI / n as f64;
            let v = tape.eval1(&[0.0, x]).map_err(|e| io::Error::other(e.to_string()))?;
            writeln!(out, "{x:.16e},{v:.16e}")?;
        }
        Ok(())
    }

    pub fn witness_json(&self) -> serde_json::Value {
        serde_json::to_value(Witness {
            c1: self.c[0],
            c2: self.c[1],
            c3: self.c[2],
            alpha: self.alpha,
            s: self.s,
            omega: self.omega,
            eps_blend: self.options.eps_blend,
            blend_width: self.blend_width,
            dichotomy_quantity: self.dichotomy_quantity,
            dichotomy: self.dichotomy,
            psi: self.psi.to_string(),
            a: self.a.to_string(),
            checks: &self.checks,
        })
        .expect("witness serializes")
    }

    /// Nodal residuals of both eigen-equations at `s = 9` with central
    /// differences on `cells` uniform cells (max over interior nodes).
    pub fn discrete_residuals(&self, cells: usize) -> Result<(f64, f64), SpectralError> {
        let h = PI / cells as f64;
        let tape = Tape::compile(&[self.phi.clone(), self.psi.clone()]);
        let a_tape = Tape::single(&self.a);
        let mut vals = Vec::with_capacity(cells + 1);
        for i in 0..=cells {
            let x = i as f64 * h;
            let mut v = tape.eval(&[0.0, x])?;
            v.push(if i == 0 || i == cells { 0.0 } else { a_tape.eval1(&[0.0, x])? });
            vals.push(v);
        }
        let (mut r_phi, mut r_psi) = (0.0f64, 0.0f64);
        for i in 1..cells {
            let lap = |k: usize| (vals[i + 1][k] - 2.0 * vals[i][k] + vals[i - 1][k]) / (h * h);
            let dpsi = (vals[i + 1][1] - vals[i - 1][1]) / (2.0 * h);
            r_phi = r_phi.max((-lap(0) - dpsi - self.s * vals[i][0]).abs());
            r_psi = r_psi.max((-lap(1) - vals[i][2] * vals[i][1] - self.s * vals[i][1]).abs());
        }
        Ok((r_phi, r_psi))
    }
}
