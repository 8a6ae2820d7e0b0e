//! Small sparse kernels for the time stepper: CSR products and a banded LU
//! with partial pivoting that also solves with the transpose.

use std::collections::BTreeMap;

/// Compressed sparse rows, square.
#[derive(Clone, Debug)]
pub struct Csr {
    n: usize,
    ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl Csr {
    /// Duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Csr {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for &(i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i},{j}) outside {n}x{n}");
            *rows[i].entry(j).or_insert(0.0) += v;
        }
        let mut ptr = Vec::with_capacity(n + 1);
        let (mut col, mut val) = (Vec::new(), Vec::new());
        ptr.push(0);
        for r in rows {
            for (j, v) in r {
                col.push(j);
                val.push(v);
            }
            ptr.push(col.len());
        }
        Csr { n, ptr, col, val }
    }

    pub fn identity(n: usize) -> Csr {
        Csr { n, ptr: (0..=n).collect(), col: (0..n).collect(), val: vec![1.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| (self.ptr[i]..self.ptr[i + 1]).map(move |k| (i, self.col[k], self.val[k])))
    }

    /// `αI + βA`.
    pub fn shifted(&self, alpha: f64, beta: f64) -> Csr {
        let mut t: Vec<_> = self.entries().map(|(i, j, v)| (i, j, beta * v)).collect();
        t.extend((0..self.n).map(|i| (i, i, alpha)));
        Csr::from_triplets(self.n, &t)
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.ptr[i]..self.ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[i] = s;
        }
    }

    pub fn mul_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let xi = x[i];
            for k in self.ptr[i]..self.ptr[i + 1] {
                y[self.col[k]] += self.val[k] * xi;
            }
        }
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        self.entries().fold((0, 0), |(kl, ku), (i, j, _)| {
            if i > j {
                (kl.max(i - j), ku)
            } else {
                (kl, ku.max(j - i))
            }
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.entries() {
            d[i][j] += v;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularMatrix {
    pub column: usize,
}

/// `PA = LU` on band storage; row `i` keeps columns `i-kl ..= i+kl+ku`.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &Csr) -> Result<BandLu, SingularMatrix> {
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut lu = BandLu { n, kl, ku, width, data: vec![0.0; n * width], piv: vec![0; n] };
        for (i, j, v) in a.entries() {
            *lu.at_mut(i, j) += v;
        }
        let scale = a.entries().fold(0.0f64, |m, (_, _, v)| m.max(v.abs()));
        let uw = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.at(k, k).abs();
            for i in k + 1..=last {
                let v = lu.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= f64::EPSILON * scale * n as f64 || best == 0.0 {
                return Err(SingularMatrix { column: k });
            }
            lu.piv[k] = p;
            let cend = (k + uw).min(n - 1);
            if p != k {
                for j in k..=cend {
                    let a = lu.at(k, j);
                    let b = lu.at(p, j);
                    *lu.at_mut(k, j) = b;
                    *lu.at_mut(p, j) = a;
                }
            }
            let pivot = lu.at(k, k);
            for i in k + 1..=last {
                let l = lu.at(i, k) / pivot;
                *lu.at_mut(i, k) = l;
                if l != 0.0 {
                    for j in k + 1..=cend {
                        let u = lu.at(k, j);
                        *lu.at_mut(i, j) -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.idx(i, j);
        &mut self.data[k]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Overwrites `b` with `A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, uw) = (self.n, self.kl, self.kl + self.ku);
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= self.at(i, k) * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + uw).min(n - 1) {
                s -= self.at(i, j) * b[j];
            }
            b[i] = s / self.at(i, i);
        }
    }

    /// Overwrites `b` with `A⁻ᵀ b`.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        let (n, kl, uw) = (self.n, self.kl, self.kl + self.ku);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(uw)..i {
                s -= self.at(k, i) * b[k];
            }
            b[i] = s / self.at(i, i);
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                s -= self.at(i, k) * b[i];
            }
            b[k] = s;
            b.swap(k, self.piv[k]);
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, kl: usize, ku: usize, rng: &mut ChaCha8Rng) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // weak diagonal so pivoting actually happens
                let v = if i == j { 0.1 * rng.gen_range(-1.0..1.0) } else { rng.gen_range(-1.0..1.0) };
                t.push((i, j, v));
            }
        }
        Csr::from_triplets(n, &t)
    }

    #[test]
    fn band_lu_solves_against_dense_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(n, kl, ku) in &[(1, 0, 0), (7, 1, 1), (40, 3, 2), (60, 5, 5)] {
            let a = random_banded(n, kl, ku, &mut rng);
            let lu = BandLu::factor(&a).unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut b = vec![0.0; n];
            a.mul_into(&x, &mut b);
            lu.solve_in_place(&mut b);
            let err = x.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "n={n} err={err}");

            let mut bt = vec![0.0; n];
            a.mul_transpose_into(&x, &mut bt);
            lu.solve_transpose_in_place(&mut bt);
            let err = x.iter().zip(&bt).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "transpose n={n} err={err}");
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = Csr::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 4.0)]);
        assert!(BandLu::factor(&a).is_err());
    }
}
