//! Cubic and bicubic Hermite interpolation from node values and exact
//! node derivatives.

/// Basis `[H0, G0, H1, G1]` on `[0, 1]` and its first two derivatives.
fn basis(u: f64, order: usize) -> [f64; 4] {
    let (u2, u3) = (u * u, u * u * u);
    match order {
        0 => [2.0 * u3 - 3.0 * u2 + 1.0, u3 - 2.0 * u2 + u, -2.0 * u3 + 3.0 * u2, u3 - u2],
        1 => [6.0 * u2 - 6.0 * u, 3.0 * u2 - 4.0 * u + 1.0, -6.0 * u2 + 6.0 * u, 3.0 * u2 - 2.0 * u],
        2 => [12.0 * u - 6.0, 6.0 * u - 4.0, -12.0 * u + 6.0, 6.0 * u - 2.0],
        _ => [0.0; 4],
    }
}

/// Uniform axis `lo + k·h`, `k = 0..=cells`.
#[derive(Clone, Debug)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Axis {
    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.h()
    }

    /// Cell index and local coordinate; points outside are extrapolated from the end cells.
    fn locate(&self, x: f64) -> (usize, f64) {
        let r = (x - self.lo) / self.h();
        let k = (r.floor().max(0.0) as usize).min(self.cells - 1);
        (k, r - k as f64)
    }
}

/// Node data: value, `∂s`, `∂z`, `∂s∂z`.
#[derive(Clone, Copy, Debug, Default)]
pub struct NodeData {
    pub f: f64,
    pub fs: f64,
    pub fz: f64,
    pub fsz: f64,
}

/// Value and derivatives up to order two: `[f, fs, fz, fss, fsz, fzz]`.
pub type Derivs = [f64; 6];

/// Tensor-product Hermite interpolant; with a single `z` node it is the
/// cubic Hermite interpolant in `s` alone.
#[derive(Clone, Debug)]
pub struct Hermite {
    pub s: Axis,
    pub z: Option<Axis>,
    /// Row-major, `s` fastest.
    pub nodes: Vec<NodeData>,
}

impl Hermite {
    fn node(&self, i: usize, j: usize) -> &NodeData {
        &self.nodes[j * (self.s.cells + 1) + i]
    }

    pub fn eval(&self, s: f64, z: f64) -> Derivs {
        let (i, u) = self.s.locate(s);
        let hs = self.s.h();
        let bs: Vec<[f64; 4]> = (0..3).map(|o| basis(u, o)).collect();
        let mut out = [0.0; 6];
        match &self.z {
            None => {
                let (a, b) = (self.node(i, 0), self.node(i + 1, 0));
                for (o, slot) in [(0, 0), (1, 1), (2, 3)] {
                    let w = &bs[o];
                    out[slot] = (w[0] * a.f + hs * w[1] * a.fs + w[2] * b.f + hs * w[3] * b.fs) / hs.powi(o as i32);
                }
            }
            Some(za) => {
                let (j, v) = za.locate(z);
                let hz = za.h();
                let bz: Vec<[f64; 4]> = (0..3).map(|o| basis(v, o)).collect();
                for (os, oz, slot) in [(0, 0, 0), (1, 0, 1), (0, 1, 2), (2, 0, 3), (1, 1, 4), (0, 2, 5)] {
                    let mut acc = 0.0;
                    for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        let n = self.node(i + di, j + dj);
                        let (ws, gs) = (bs[os][2 * di], bs[os][2 * di + 1]);
                        let (wz, gz) = (bz[oz][2 * dj], bz[oz][2 * dj + 1]);
                        acc += ws * wz * n.f + hs * gs * wz * n.fs + hz * ws * gz * n.fz + hs * hz * gs * gz * n.fsz;
                    }
                    out[slot] = acc / (hs.powi(os as i32) * hz.powi(oz as i32));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_bicubic_polynomials() {
        // f = s³ z² + s z³ is bicubic, so the interpolant is exact.
        let f = |s: f64, z: f64| s.powi(3) * z * z + s * z.powi(3);
        let s = Axis { lo: 0.0, hi: 1.0, cells: 3 };
        let z = Axis { lo: -1.0, hi: 1.0, cells: 4 };
        let mut nodes = Vec::new();
        for j in 0..=4 {
            for i in 0..=3 {
                let (a, b) = (s.node(i), z.node(j));
                nodes.push(NodeData {
                    f: f(a, b),
                    fs: 3.0 * a * a * b * b + b.powi(3),
                    fz: 2.0 * a.powi(3) * b + 3.0 * a * b * b,
                    fsz: 6.0 * a * a * b + 3.0 * b * b,
                });
            }
        }
        let h = Hermite { s, z: Some(z), nodes };
        let (a, b) = (0.37, 0.21);
        let d = h.eval(a, b);
        let exact = [
            f(a, b),
            3.0 * a * a * b * b + b.powi(3),
            2.0 * a.powi(3) * b + 3.0 * a * b * b,
            6.0 * a * b * b,
            6.0 * a * a * b + 3.0 * b * b,
            2.0 * a.powi(3) + 6.0 * a * b,
        ];
        for k in 0..6 {
            assert!((d[k] - exact[k]).abs() < 1e-13, "{k}: {} vs {}", d[k], exact[k]);
        }
    }
}
