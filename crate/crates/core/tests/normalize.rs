use coupled_parabolic::normalize::*;
use coupled_parabolic::symbolic::{parse_expression, Expr};
use coupled_parabolic::system::{ParabolicSystem, SystemSpec};

fn system(n: usize, g21: &str, a21: &str, d2: &str) -> ParabolicSystem {
    let (domain, window) = if n == 1 {
        (r#"{"lo": [0], "hi": [2]}"#, r#"{"lo": [0, 0.5], "hi": [1, 1.5]}"#)
    } else {
        (r#"{"lo": [0, 0], "hi": [2, 2]}"#, r#"{"lo": [0, 0.5, 0.5], "hi": [1, 1.5, 1.5]}"#)
    };
    let spec: SystemSpec = serde_json::from_str(&format!(
        r#"{{"dimension": {n}, "g21": {g21}, "a21": "{a21}", "d2": {d2}, "g22": {g22}, "a22": "x1",
            "domain": {domain}, "horizon": 1, "control_window": {window}}}"#,
        g22 = if n == 1 { r#"["0.5"]"# } else { r#"["0.5", "x1"]"# }
    ))
    .unwrap();
    spec.build().unwrap()
}

const D2_2D: &str = r#"[["1 + 0.1*x2^2", "0.2"], ["0.2", "1.5 + 0.1*sin(x1)"]]"#;

#[test]
fn constant_flow_in_one_dimension() {
    let sys = system(1, r#"["-1"]"#, "0", r#"[["1"]]"#);
    let base = default_base(&sys).unwrap();
    let st = straighten_coupling(&sys, &base, &FlowOptions::default()).unwrap();
    for s in [0.0, 0.1, 0.37, st.flow.extent] {
        let c = st.flow.chart(s, 0.0);
        assert!((c.x[0] - (base.x1 - s)).abs() < 1e-12);
        assert!((c.j[0][0] + 1.0).abs() < 1e-12);
    }
    assert!(coupling_deviation(&st.system, 13).unwrap() < 1e-12);
}

#[test]
fn translation_flow_keeps_diffusion() {
    let sys = system(2, r#"["-1", "0"]"#, "0", D2_2D);
    let base = default_base(&sys).unwrap();
    let st = straighten_coupling(&sys, &base, &FlowOptions::default()).unwrap();
    // Λ(s, z) = (c − s, z); J = diag(−1, 1): d̃ = J⁻¹ d J⁻ᵀ flips the off-diagonal sign.
    let p = [0.5, 0.3, 0.9];
    let x = [0.5, base.x1 - p[1], p[2]];
    for (i, j, sign) in [(0, 0, 1.0), (0, 1, -1.0), (1, 1, 1.0)] {
        let got = st.system.d2[i][j].eval(&p).unwrap();
        let want = sign * sys.d2[i][j].eval(&x).unwrap();
        assert!((got - want).abs() < 1e-10, "d[{i}][{j}]: {got} vs {want}");
    }
}

/// Second-order operator `Div(d∇u) + g·∇u` in the given coordinates, with
/// derivatives of `u` and of `d` by central differences.
fn apply_divergence_form(d: &[Vec<Expr>], g: &[Expr], u: &dyn Fn(&[f64]) -> f64, p: &[f64]) -> f64 {
    let h = 1e-4;
    let shift = |q: &[f64], k: usize, dx: f64| {
        let mut r = q.to_vec();
        r[k + 1] += dx;
        r
    };
    let grad = |q: &[f64], j: usize| (u(&shift(q, j, h)) - u(&shift(q, j, -h))) / (2.0 * h);
    let n = g.len();
    let mut total = 0.0;
    for i in 0..n {
        let flux = |q: &[f64]| (0..n).map(|j| d[i][j].eval(q).unwrap() * grad(q, j)).sum::<f64>();
        total += (flux(&shift(p, i, h)) - flux(&shift(p, i, -h))) / (2.0 * h);
        total += g[i].eval(p).unwrap() * grad(p, i);
    }
    total
}

#[test]
fn curved_characteristics() {
    let sys = system(2, r#"["-1", "0.3*sin(x1)"]"#, "0.4 + 0.2*x2", D2_2D);
    let base = default_base(&sys).unwrap();
    let st = straighten_coupling(&sys, &base, &FlowOptions { ode_tol: 1e-9, s_cells: 64, z_cells: 64 }).unwrap();
    let dev = coupling_deviation(&st.system, 13).unwrap();
    eprintln!("coupling deviation {dev:e}");
    assert!(dev <= 1e-6, "coupling deviation {dev:e}");

    // ∂s(u∘Λ) = (g21·∇u)∘Λ on test functions
    let u = parse_expression("sin(1.3*x1 - 0.4*x2) + x1*x2^2", 2).unwrap();
    let du = [coupled_parabolic::symbolic::differentiate(&u, 1), coupled_parabolic::symbolic::differentiate(&u, 2)];
    let mut worst = 0.0f64;
    for (s, z) in [(0.05, 0.8), (0.3, 1.0), (0.6, 1.2), (0.21, 0.93)] {
        let c = st.flow.chart(s, z);
        let x = [0.5, c.x[0], c.x[1]];
        let lhs: f64 = (0..2).map(|i| du[i].eval(&x).unwrap() * c.j[i][0]).sum();
        let rhs: f64 = (0..2).map(|i| du[i].eval(&x).unwrap() * sys.g21[i].eval(&x).unwrap()).sum();
        worst = worst.max((lhs - rhs).abs());
    }
    assert!(worst <= 1e-6, "coupling residual {worst:e}");

    // the transformed diffusion operator agrees with the original through Λ
    let flow = st.flow.clone();
    let u_tilde = |q: &[f64]| {
        let c = flow.chart(q[1], q[2]);
        u.eval(&[q[0], c.x[0], c.x[1]]).unwrap()
    };
    let u_plain = |q: &[f64]| u.eval(q).unwrap();
    for (s, z) in [(0.2, 0.9), (0.45, 1.1)] {
        let c = st.flow.chart(s, z);
        let x = [0.5, c.x[0], c.x[1]];
        let original = apply_divergence_form(&sys.d2, &sys.g22, &u_plain, &x);
        let pulled = apply_divergence_form(&st.system.d2, &st.system.g22, &u_tilde, &[0.5, s, z]);
        assert!((original - pulled).abs() < 1e-4 * (1.0 + original.abs()), "{original} vs {pulled}");
    }

    // full normalization removes a21
    let norm = normalize(&sys, &FlowOptions::default(), 1e-5).unwrap();
    assert!(norm.coupling_deviation <= 1e-6);
    let a21 = zero_order_coupling(&norm.system, 7).unwrap();
    eprintln!("a21 after gauge {a21:e}, extent {}", st.flow.extent);
    assert!(a21 <= 1e-8, "a21 after gauge {a21:e}");
    assert!(norm.gauge.lower_bound > 0.0);
}

#[test]
fn inverse_map_round_trip() {
    let sys = system(2, r#"["-1", "0.3*sin(x1)"]"#, "0", D2_2D);
    let base = default_base(&sys).unwrap();
    let st = straighten_coupling(&sys, &base, &FlowOptions::default()).unwrap();
    for (s, z) in [(0.1, 0.9), (0.5, 1.15), (0.33, 1.01)] {
        let x = st.flow.chart(s, z).x;
        let (s2, z2) = st.flow.inverse(&x).unwrap();
        assert!((s - s2).abs() < 1e-10 && (z - z2).abs() < 1e-10);
    }
}
