use std::f64::consts::PI;
use std::sync::OnceLock;

use coupled_parabolic::linalg::dot;
use coupled_parabolic::simulate::{ControlMode, Grid};
use coupled_parabolic::solvability::{build_system_operators, check_condition, SliceGrid, Verdict, DEFAULT_TOLERANCE};
use coupled_parabolic::spectral::*;
use coupled_parabolic::symbolic::{differentiate, integrate_adaptive_fn, Expr, Tape};
use coupled_parabolic::system::BoxDomain;

fn interval(lo: f64, hi: f64) -> BoxDomain {
    BoxDomain { lo: vec![lo], hi: vec![hi] }
}

fn default_data() -> &'static CounterexampleData {
    static DATA: OnceLock<CounterexampleData> = OnceLock::new();
    DATA.get_or_init(|| build_counterexample_1d(&CounterexampleOptions::default()).unwrap())
}

fn wide_data() -> &'static CounterexampleData {
    static DATA: OnceLock<CounterexampleData> = OnceLock::new();
    DATA.get_or_init(|| {
        build_counterexample_1d(&CounterexampleOptions { eps_blend: 0.7, ..Default::default() }).unwrap()
    })
}

fn exp_window(d: &CounterexampleData) -> (f64, f64) {
    match d.options.theta1 {
        Theta1Profile::Exp { lo, hi } => (lo, hi),
        Theta1Profile::Bump => panic!("default θ1 is the exp profile"),
    }
}

#[test]
fn pure_sine_defect_matches_closed_form() {
    // ∫_0^{7π/15} cos 3y sin 3y dy = sin²(3y)/6 at 7π/15
    let c = (7.0 * PI / 5.0).sin();
    let quad = integrate_adaptive_fn(|y| Ok((3.0 * y).cos() * (3.0 * y).sin()), 0.0, 7.0 * PI / 15.0, 1e-14).unwrap();
    assert!((quad - c * c / 6.0).abs() < 1e-13);
    let defect = c * c / 3.0 - quad;
    assert!((defect - c * c / 6.0).abs() < 1e-13 && (defect - 0.15070).abs() < 1e-4, "defect {defect}");
}

#[test]
fn witness_invariants_hold() {
    let d = default_data();
    let ch = &d.checks;
    eprintln!("C = {:?}, α = {}, q = {}, {:?}", d.c, d.alpha, d.dichotomy_quantity, ch);
    assert!(d.c[0] > 0.0);
    assert!((d.c[1] == 0.0) != (d.c[2] == 0.0), "exactly one of C2, C3 vanishes");
    assert_eq!(d.s, 9.0);
    assert_eq!(ch.psi_at_0, 0.0);
    assert!(ch.psi_at_pi.abs() < 1e-15);
    assert!(ch.phi_at_0.abs() <= 1e-8 && ch.phi_at_pi.abs() <= 1e-8);
    assert!(ch.max_phi_on_omega <= 1e-8, "{}", ch.max_phi_on_omega);
    assert_eq!(ch.max_psi_deviation_on_omega, 0.0);
    assert!(ch.max_collar_deviation < d.options.eps_blend);
    assert!(ch.max_abs_a.is_finite());
    assert!(ch.theta1_cos_moment > 0.0);
}

#[test]
fn phi_solves_the_first_equation() {
    // −φ'' − ψ' = 9φ at interior points, φ'' from the integral nodes
    let d = wide_data();
    let r = &(&differentiate(&differentiate(&d.phi, 1), 1) + &differentiate(&d.psi, 1)).scale(-1.0) - &d.phi.scale(9.0);
    let tape = Tape::single(&r);
    for k in 1..50 {
        let x = k as f64 * PI / 50.0 + 0.01;
        let v = tape.eval1(&[0.0, x]).unwrap();
        assert!(v.abs() < 1e-8, "residual {v} at {x}");
    }
}

#[test]
fn potential_on_exp_window_has_closed_form() {
    let d = default_data();
    let (lo, hi) = exp_window(d);
    let c1 = d.c[0];
    let a = Tape::single(&d.a);
    let mut spread = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..=100 {
        let x = lo + (hi - lo) * k as f64 / 100.0;
        let want = -10.0 * c1 * x.exp() / ((3.0 * x).sin() + c1 * x.exp());
        let got = a.eval1(&[0.0, x]).unwrap();
        assert!((got - want).abs() <= 1e-10, "{got} vs {want} at {x}");
        spread = (spread.0.min(got), spread.1.max(got));
    }
    assert!(spread.1 - spread.0 > 1e-3, "a should vary on ω1");

    // ã22 = a is not constant on ω1, so the membership test finds no obstruction there
    let sys = cascade_system(&interval(0.0, PI), &interval(lo, hi), d.a.clone(), 1.0);
    let ops = build_system_operators(&sys).unwrap();
    let rep = check_condition(&ops, &sys.control_window, SliceGrid::default(), DEFAULT_TOLERANCE).unwrap();
    assert_eq!(rep.verdict, Verdict::Holds);
}

#[test]
fn potential_vanishes_where_psi_is_the_sine() {
    let d = default_data();
    let a = Tape::single(&d.a);
    for x in [0.05, 1.0, 2.2, 3.0] {
        assert_eq!(a.eval1(&[0.0, x]).unwrap(), 0.0, "at {x}");
    }
    // a = −9 on ω, where ψ is the constant sin(7π/5)
    let v = a.eval1(&[0.0, PI / 2.0]).unwrap();
    assert!((v + 9.0).abs() < 1e-12, "{v}");
}

#[test]
fn samples_and_witness_export() {
    let d = default_data();
    for field in ["psi", "phi", "a"] {
        let mut buf = Vec::new();
        d.write_samples(&mut buf, field, 1000).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1001);
        assert_eq!(lines[0], format!("x [length],{field} [1]"));
        assert!(lines[1..].iter().all(|l| l.split(',').all(|v| v.parse::<f64>().unwrap().is_finite())));
    }
    let j = d.witness_json();
    for key in ["c1", "c2", "c3", "alpha", "s", "psi", "a", "checks", "dichotomy"] {
        assert!(j.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn bad_options_are_rejected() {
    let bad_window = CounterexampleOptions { theta1: Theta1Profile::Exp { lo: 0.1, hi: 0.4 }, ..Default::default() };
    assert!(matches!(build_counterexample_1d(&bad_window), Err(SpectralError::Construction(_))));
    let bad_eps = CounterexampleOptions { eps_blend: 0.0, ..Default::default() };
    assert!(build_counterexample_1d(&bad_eps).is_err());
}

#[test]
fn blended_potential_shape() {
    let bp = build_blended_potential_nd(
        &interval(0.0, PI),
        &interval(0.45 * PI, 0.55 * PI),
        &interval(2.0 * PI / 5.0, 3.0 * PI / 5.0),
        &interval(0.3 * PI, 0.7 * PI),
        0.1,
    )
    .unwrap();
    assert!((bp.lambda1 - 1.0).abs() < 1e-15);
    let a = Tape::single(&bp.a);
    let dphi = Tape::single(&differentiate(&bp.phi, 1));
    for k in 0..=50 {
        let x = 2.0 * PI / 5.0 + k as f64 * (PI / 5.0) / 50.0;
        assert!((a.eval1(&[0.0, x]).unwrap() + 1.0).abs() < 1e-14);
        assert!(dphi.eval1(&[0.0, x]).unwrap().abs() <= 1e-14);
    }
    for x in [0.1, 0.5, 2.5, 3.0] {
        assert!(a.eval1(&[0.0, x]).unwrap().abs() < 1e-12, "a({x})");
    }
    assert!(bp.min_phi > 0.1);

    // ω1 not inside ω2
    let err = build_blended_potential_nd(
        &interval(0.0, PI),
        &interval(1.4, 1.6),
        &interval(1.0, 2.0),
        &interval(1.2, 1.8),
        0.1,
    );
    assert!(matches!(err, Err(SpectralError::Nesting(_))));
}

#[test]
fn blended_potential_in_two_dimensions() {
    let sq = |lo: f64, hi: f64| BoxDomain { lo: vec![lo, lo], hi: vec![hi, hi] };
    let bp = build_blended_potential_nd(&sq(0.0, PI), &sq(1.4, 1.7), &sq(1.2, 1.9), &sq(0.9, 2.2), 0.05).unwrap();
    assert!((bp.lambda1 - 2.0).abs() < 1e-15);
    let a = Tape::single(&bp.a);
    assert!((a.eval1(&[0.0, 1.5, 1.5]).unwrap() + 2.0).abs() < 1e-14);
    assert!(a.eval1(&[0.0, 0.3, 2.8]).unwrap().abs() < 1e-12);
}

#[test]
fn fattorini_single_mode() {
    let bp = build_blended_potential_nd(
        &interval(0.0, PI),
        &interval(0.45 * PI, 0.55 * PI),
        &interval(0.4 * PI, 0.6 * PI),
        &interval(0.3 * PI, 0.7 * PI),
        0.1,
    )
    .unwrap();
    let grid = Grid::new(&bp.domain, &[200], 1.0, 1).unwrap();
    let a = consistent_potential(&bp, &grid).unwrap();
    let rep = fattorini_check(&grid, &a, &bp.omega1, &FattoriniOptions::default()).unwrap();
    assert_eq!(rep.verdict, Obstruction::Obstructed);
    let w = &rep.pairs[rep.witness.unwrap()];
    let lambda_h = 4.0 / grid.h[0].powi(2) * (grid.h[0] / 2.0).sin().powi(2);
    assert!((w.eigenvalue - lambda_h).abs() < 1e-10);

    // the continuous potential sampled on the grid: same eigenpair up to O(h²)
    let sampled = sample_potential(&bp.a, &grid).unwrap();
    let rep = fattorini_check(&grid, &sampled, &bp.omega1, &FattoriniOptions::default()).unwrap();
    assert_eq!(rep.verdict, Obstruction::NoObstructionFound);
    assert!(rep.pairs[0].vanishing < 1e-3 && (rep.pairs[0].eigenvalue - 1.0).abs() < 1e-3);

    // a ≡ 0: eigenfunctions sin kx are never flat on an interval
    let zero = vec![0.0; grid.nodes()];
    let rep = fattorini_check(&grid, &zero, &bp.omega1, &FattoriniOptions::default()).unwrap();
    assert_eq!(rep.verdict, Obstruction::NoObstructionFound);
    for (k, p) in rep.pairs.iter().enumerate() {
        let k = (k + 1) as f64;
        assert!((p.eigenvalue - 4.0 / grid.h[0].powi(2) * (k * grid.h[0] / 2.0).sin().powi(2)).abs() < 1e-9);
        assert!(p.vanishing > 1e-3);
    }
}

#[test]
fn discrete_witness_is_invisible() {
    let d = wide_data();
    let w = discrete_counterexample(d, 200).unwrap();
    let sys = w.system(d, &witness_window(), 0.05);
    let ds = w.discretize(&sys, 20, 1.0).unwrap();
    let (eig, vis) = w.verify(&ds);
    assert!(eig < 1e-12 && vis < 1e-14, "{eig:e} {vis:e}");
    assert!(w.w1_on_omega < 1e-12);
    assert!(w.c.iter().all(|&c| c >= 0.0) && w.c[0] > 0.0);
    assert!(w.c[1] == 0.0 || w.c[2] == 0.0);
    // unit discrete norm
    assert!((ds.norm(&w.w) - 1.0).abs() < 1e-12);

    // the coupled sweep finds the same eigenvalue independently
    let rep = fattorini_coupled(&ds, &FattoriniOptions { pairs: 12, vanish_tol: 1e-10, ..Default::default() }).unwrap();
    assert_eq!(rep.verdict, Obstruction::Obstructed);
    let hit = &rep.pairs[rep.witness.unwrap()];
    assert!((hit.eigenvalue - w.s_h).abs() < 1e-8 * w.s_h);
}

#[test]
fn invariant_functional_is_control_independent() {
    let d = wide_data();
    let w = discrete_counterexample(d, 200).unwrap();
    let sys = w.system(d, &witness_window(), 0.05);
    let ds = w.discretize(&sys, 25, 1.0).unwrap();
    let lambda = w.step_eigenvalue(&ds);
    let mut y0 = ds.sample(&[Expr::sin(Expr::x(1)), Expr::sin(Expr::x(1).scale(2.0))], 0).unwrap();
    y0.iter_mut().zip(&w.w).for_each(|(y, v)| *y += v);
    let rep = invariant_functional_test(&ds, &w.w, lambda, &y0, 5, 11, 1e-10).unwrap();
    assert!(rep.zero_control_drift < 1e-13, "{}", rep.zero_control_drift);
    assert!(rep.max_drift <= 1e-6, "{}", rep.max_drift);
    assert!(dot(&y0, &w.w) != 0.0);

    // a visible direction is rejected
    let visible = ds.sample(&[Expr::sin(Expr::x(1)), Expr::zero()], 0).unwrap();
    assert!(matches!(
        invariant_functional_test(&ds, &visible, 1.0, &y0, 1, 0, 1e-10),
        Err(SpectralError::NoWitness(_))
    ));
}

#[test]
fn controllable_window_has_no_witness() {
    let d = wide_data();
    let w = discrete_counterexample(d, 200).unwrap();
    let (lo, hi) = exp_window(d);
    let sys = w.system(d, &interval(lo, hi), 1.0);
    let ds = w.discretize(&sys, 20, 1.0).unwrap();
    let cands = adjoint_eigen_sweep(&ds, 12).unwrap();
    assert!(cands.iter().all(|c| c.residual < 1e-12));
    let y0 = vec![1.0; ds.state_len()];
    for c in &cands {
        let lambda = 1.0 / (1.0 - ds.grid.dt * c.mu);
        let r = invariant_functional_test(&ds, &c.w, lambda, &y0, 1, 0, 1e-8);
        assert!(matches!(r, Err(SpectralError::NoWitness(_))), "μ = {} visibility {}", c.mu, c.visibility);
    }
    let rep = fattorini_coupled(&ds, &FattoriniOptions { pairs: 12, ..Default::default() }).unwrap();
    assert_eq!(rep.verdict, Obstruction::NoObstructionFound);
    let _ = ControlMode::OneControl;
}
