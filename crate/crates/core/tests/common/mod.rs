#![allow(dead_code)]

//! Randomized operator-algebra cases shared by the law suite and the
//! acceptance runner. Operators act on (t, x1, x2); identities are compared
//! by applying both sides to a smooth test function at random points.

use coupled_parabolic::symbolic::{Expr, LinDiffOp, MultiIndex, Tape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct LawCase {
    pub a: LinDiffOp,
    pub b: LinDiffOp,
    pub c: LinDiffOp,
    pub alpha: f64,
    pub beta: f64,
    pub u: Expr,
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LawResiduals {
    pub associativity: f64,
    pub bilinearity: f64,
    pub jacobi: f64,
    pub involution: f64,
    pub anti_homomorphism: f64,
}

impl LawResiduals {
    pub fn max(&self) -> f64 {
        [self.associativity, self.bilinearity, self.jacobi, self.involution, self.anti_homomorphism]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn coefficient(rng: &mut ChaCha8Rng) -> Expr {
    let k = rng.gen_range(-2.0..2.0);
    let (t, x1, x2) = (Expr::t(), Expr::x(1), Expr::x(2));
    let e = match rng.gen_range(0..8) {
        0 => Expr::one(),
        1 => x1,
        2 => Expr::sin(x2 * rng.gen_range(0.5..2.0)),
        3 => Expr::exp(x1 * 0.5) * x2,
        4 => Expr::cos(x1 + x2),
        5 => &x1 * &x1 * x2,
        6 => Expr::bump(1, -2.0, 2.0),
        _ => (t + 1.0) * Expr::sin(x1),
    };
    e * k
}

fn operator(rng: &mut ChaCha8Rng) -> LinDiffOp {
    let terms = rng.gen_range(1..=3);
    LinDiffOp::from_terms((0..terms).map(|_| {
        let mut m = [0u8; 3];
        for _ in 0..rng.gen_range(0..=2) {
            // time derivatives are rarer, as in the systems themselves
            let v = if rng.gen_bool(0.15) { 0 } else { rng.gen_range(1..=2) };
            m[v] += 1;
        }
        (MultiIndex::from_slice(&m), coefficient(rng))
    }))
}

pub fn random_case(seed: u64) -> LawCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, c) = (operator(&mut rng), operator(&mut rng), operator(&mut rng));
    let (p, q, r) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(-0.5..0.5));
    let u = Expr::sin(Expr::x(1) * p + Expr::x(2) * q + Expr::t()) * Expr::exp(Expr::x(1) * r);
    let points = (0..8)
        .map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    LawCase { a, b, c, alpha: rng.gen_range(-2.0..2.0), beta: rng.gen_range(-2.0..2.0), u, points }
}

fn samples(case: &LawCase, op: &LinDiffOp) -> Vec<f64> {
    let tape = Tape::single(&op.apply(&case.u));
    case.points.iter().map(|p| tape.eval1(p).unwrap()).collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `‖Σ terms‖∞ / max_k ‖term_k‖∞`, 0 when every term vanishes.
fn relative(terms: &[Vec<f64>]) -> f64 {
    let n = terms[0].len();
    let total: Vec<f64> = (0..n).map(|i| terms.iter().map(|t| t[i]).sum()).collect();
    let num = sup(&total);
    if num == 0.0 {
        return 0.0;
    }
    num / terms.iter().map(|t| sup(t)).fold(f64::MIN_POSITIVE, f64::max)
}

fn neg(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| -x).collect()
}

pub fn law_residuals(case: &LawCase) -> LawResiduals {
    let (a, b, c) = (&case.a, &case.b, &case.c);
    let s = |op: &LinDiffOp| samples(case, op);

    let associativity = relative(&[s(&a.compose(b).compose(c)), neg(s(&a.compose(&b.compose(c))))]);

    let lin = a.scale(&Expr::constant(case.alpha)).add(&b.scale(&Expr::constant(case.beta)));
    let bilinearity = relative(&[
        s(&lin.commutator(c)),
        neg(s(&a.commutator(c)).into_iter().map(|x| x * case.alpha).collect()),
        neg(s(&b.commutator(c)).into_iter().map(|x| x * case.beta).collect()),
    ]);

    let jacobi = relative(&[
        s(&a.commutator(&b.commutator(c))),
        s(&b.commutator(&c.commutator(a))),
        s(&c.commutator(&a.commutator(b))),
    ]);

    let involution = relative(&[s(&a.adjoint().adjoint()), neg(s(a))]);
    let anti_homomorphism = relative(&[s(&a.compose(b).adjoint()), neg(s(&b.adjoint().compose(&a.adjoint())))]);

    LawResiduals { associativity, bilinearity, jacobi, involution, anti_homomorphism }
}
