use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::expr::MAX_VARS;

/// Derivative multi-index `(α_t, α_1, ..., α_N)`; slot 0 is time.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MultiIndex(pub [u8; MAX_VARS]);

impl MultiIndex {
    pub fn zero() -> Self {
        MultiIndex([0; MAX_VARS])
    }

    pub fn unit(var: usize) -> Self {
        let mut m = [0; MAX_VARS];
        m[var] = 1;
        MultiIndex(m)
    }

    pub fn from_slice(exps: &[u8]) -> Self {
        assert!(exps.len() <= MAX_VARS);
        let mut m = [0; MAX_VARS];
        m[..exps.len()].copy_from_slice(exps);
        MultiIndex(m)
    }

    pub fn order(&self) -> u32 {
        self.0.iter().map(|&a| a as u32).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    pub fn get(&self, var: usize) -> u8 {
        self.0[var]
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        let mut m = self.0;
        for (a, b) in m.iter_mut().zip(other.0) {
            *a += b;
        }
        MultiIndex(m)
    }

    pub fn with(&self, var: usize, value: u8) -> MultiIndex {
        let mut m = self.0;
        m[var] = value;
        MultiIndex(m)
    }

    /// `self - other` if componentwise nonnegative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut m = self.0;
        for (a, b) in m.iter_mut().zip(other.0) {
            *a = a.checked_sub(b)?;
        }
        Some(MultiIndex(m))
    }

    /// All `β ≤ self` componentwise, with the multinomial `Π C(α_i, β_i)`.
    pub fn sub_indices(&self) -> Vec<(MultiIndex, f64)> {
        let mut out = vec![(MultiIndex::zero(), 1.0)];
        for v in 0..MAX_VARS {
            let a = self.0[v];
            if a == 0 {
                continue;
            }
            let mut next = Vec::with_capacity(out.len() * (a as usize + 1));
            for (b, c) in &out {
                for k in 0..=a {
                    next.push((b.with(v, k), c * binomial(a as u32, k as u32)));
                }
            }
            out = next;
        }
        out
    }

    /// Graded order used to pick elimination pivots: higher total order first,
    /// then lexicographically larger exponents (time slot first).
    pub fn pivot_cmp(&self, other: &MultiIndex) -> Ordering {
        other.order().cmp(&self.order()).then_with(|| other.0.cmp(&self.0))
    }
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Graded lexicographic order: total order first, then exponents.
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order().cmp(&other.order()).then_with(|| self.0.cmp(&other.0))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// `1`, `dt`, `dx1`, `dx1^2 dx2`, ...
impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "1");
        }
        let mut first = true;
        for (v, &a) in self.0.iter().enumerate() {
            if a == 0 {
                continue;
            }
            if !first {
                write!(f, " ")?;
            }
            first = false;
            let name = if v == 0 { "dt".to_string() } else { format!("dx{v}") };
            if a == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{name}^{a}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_addition() {
        let a = MultiIndex::from_slice(&[1, 0, 2]);
        let b = MultiIndex::unit(1);
        assert_eq!(a.order(), 3);
        assert_eq!(a.add(&b), MultiIndex::from_slice(&[1, 1, 2]));
        assert_eq!(a.add(&b), b.add(&a));
        assert_eq!(a.checked_sub(&b), None);
    }

    #[test]
    fn sub_indices_carry_binomials() {
        let a = MultiIndex::from_slice(&[0, 2, 1]);
        let subs = a.sub_indices();
        assert_eq!(subs.len(), 6);
        let total: f64 = subs.iter().map(|(_, c)| c).sum();
        assert_eq!(total, 8.0);
    }

    #[test]
    fn pivot_order_prefers_high_order_then_time() {
        let xx = MultiIndex::from_slice(&[0, 0, 2]);
        let t = MultiIndex::unit(0);
        let x = MultiIndex::unit(2);
        let mut v = vec![x, t, xx];
        v.sort_by(|a, b| a.pivot_cmp(b));
        assert_eq!(v, vec![xx, t, x]);
    }
}
