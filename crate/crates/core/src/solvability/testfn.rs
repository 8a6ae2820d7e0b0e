//! Random smooth test functions for numerical operator identities.

use rand::Rng;

use crate::symbolic::Expr;

/// `Σ_k c_k sin(a_k·(t,x) + b_k) + (p + q·(t,x))·cos(r·(t,x))` with random
/// moderate coefficients, depending on the variables in `vars` (bit mask).
pub fn random_test_function<R: Rng>(rng: &mut R, vars: u8) -> Expr {
    let active: Vec<usize> = (0..4).filter(|v| vars & (1 << v) != 0).collect();
    let linear = |rng: &mut R, scale: f64| {
        Expr::sum(active.iter().map(|&v| Expr::var(v) * rng.gen_range(-scale..scale)))
    };
    let mut terms = Vec::new();
    for _ in 0..2 {
        let c = rng.gen_range(0.5..1.5);
        let phase = rng.gen_range(-1.0..1.0);
        terms.push(Expr::sin(linear(rng, 1.5) + phase) * c);
    }
    let p = rng.gen_range(-1.0..1.0);
    let poly = linear(rng, 0.8) + p;
    terms.push(poly * Expr::cos(linear(rng, 1.2)));
    Expr::sum(terms)
}
