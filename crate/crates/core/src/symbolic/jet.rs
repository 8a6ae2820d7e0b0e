//! Truncated Taylor series arithmetic, used for exact high-order derivatives
//! of the bump and smooth-step primitives.

/// Coefficients `c_k` of `f(x0 + h) = Σ c_k h^k`, truncated at a fixed length.
#[derive(Clone, Debug)]
pub struct Jet(pub Vec<f64>);

/// Below this argument `exp(-1/u)` underflows, and so do all its derivatives.
const UNDERFLOW_ARG: f64 = 1.0 / 700.0;

impl Jet {
    pub fn constant(c: f64, len: usize) -> Jet {
        let mut v = vec![0.0; len];
        v[0] = c;
        Jet(v)
    }

    /// `x0 + slope·h`.
    pub fn linear(x0: f64, slope: f64, len: usize) -> Jet {
        let mut v = vec![0.0; len];
        v[0] = x0;
        if len > 1 {
            v[1] = slope;
        }
        Jet(v)
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet(self.0.iter().map(|a| a * c).collect())
    }

    pub fn offset(&self, c: f64) -> Jet {
        let mut v = self.0.clone();
        v[0] += c;
        Jet(v)
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let n = self.len();
        let mut v = vec![0.0; n];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = (0..=k).map(|j| self.0[j] * o.0[k - j]).sum();
        }
        Jet(v)
    }

    pub fn recip(&self) -> Jet {
        let n = self.len();
        let a0 = self.0[0];
        let mut r = vec![0.0; n];
        r[0] = 1.0 / a0;
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| self.0[j] * r[k - j]).sum();
            r[k] = -s / a0;
        }
        Jet(r)
    }

    pub fn exp(&self) -> Jet {
        let n = self.len();
        let mut e = vec![0.0; n];
        e[0] = self.0[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| j as f64 * self.0[j] * e[k - j]).sum();
            e[k] = s / k as f64;
        }
        Jet(e)
    }

    /// `k`-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        self.0[k] * factorial(k)
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Jet of `exp(-1/u)` for `u > 0`, zero otherwise.
fn exp_inv(u: &Jet) -> Jet {
    if u.0[0] <= UNDERFLOW_ARG {
        return Jet::constant(0.0, u.len());
    }
    u.recip().scale(-1.0).exp()
}

/// `k`-th derivative of `exp(-1/(1-r^2))`, `r = (2x - lo - hi)/(hi - lo)`.
pub fn bump_derivative(x: f64, lo: f64, hi: f64, k: u32) -> f64 {
    if x <= lo || x >= hi {
        return 0.0;
    }
    let len = k as usize + 1;
    let w = hi - lo;
    let r = Jet::linear((2.0 * x - lo - hi) / w, 2.0 / w, len);
    let u = r.mul(&r).scale(-1.0).offset(1.0);
    exp_inv(&u).derivative(k as usize)
}

/// `k`-th derivative of `(1-r^2)^p`, zero outside `(lo, hi)`.
pub fn poly_bump_derivative(x: f64, lo: f64, hi: f64, p: u32, k: u32) -> f64 {
    if x <= lo || x >= hi || k > 2 * p {
        return 0.0;
    }
    let len = k as usize + 1;
    let w = hi - lo;
    let r = Jet::linear((2.0 * x - lo - hi) / w, 2.0 / w, len);
    let u = r.mul(&r).scale(-1.0).offset(1.0);
    let mut acc = Jet::constant(1.0, len);
    for _ in 0..p {
        acc = acc.mul(&u);
    }
    acc.derivative(k as usize)
}

/// Dispatch on the bump profile: `power == 0` is the `exp` bump.
pub fn any_bump(x: f64, lo: f64, hi: f64, power: u32, k: u32) -> f64 {
    if power == 0 {
        bump_derivative(x, lo, hi, k)
    } else {
        poly_bump_derivative(x, lo, hi, power, k)
    }
}

/// `k`-th derivative of the smooth step `f(u)/(f(u)+f(1-u))`, `f(u) = exp(-1/u)`,
/// `u = (x - lo)/(hi - lo)`.
pub fn step_derivative(x: f64, lo: f64, hi: f64, k: u32) -> f64 {
    if x <= lo {
        return 0.0;
    }
    if x >= hi {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let len = k as usize + 1;
    let w = hi - lo;
    let u = Jet::linear((x - lo) / w, 1.0 / w, len);
    let v = u.scale(-1.0).offset(1.0);
    let f = exp_inv(&u);
    let g = exp_inv(&v);
    f.mul(&f.add(&g).recip()).derivative(k as usize)
}
