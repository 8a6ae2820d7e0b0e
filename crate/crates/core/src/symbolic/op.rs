//! Linear partial differential operators `Σ c_α D^α` with expression
//! coefficients, and small matrices of them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::diff::Differentiator;
use super::expr::Expr;
use super::multiindex::MultiIndex;

#[derive(Clone, Default, PartialEq)]
pub struct LinDiffOp {
    terms: BTreeMap<MultiIndex, Expr>,
}

/// Serialized operator term: printed coefficient plus multi-index.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TermText {
    pub coeff: String,
    pub index: [u8; 4],
}

impl LinDiffOp {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::multiplication(Expr::one())
    }

    /// `c · Id`.
    pub fn multiplication(c: Expr) -> Self {
        Self::monomial(c, MultiIndex::zero())
    }

    /// `∂_{var}`.
    pub fn partial(var: usize) -> Self {
        Self::monomial(Expr::one(), MultiIndex::unit(var))
    }

    pub fn monomial(c: Expr, alpha: MultiIndex) -> Self {
        let mut op = Self::zero();
        op.add_term(alpha, c);
        op
    }

    pub fn from_terms<I: IntoIterator<Item = (MultiIndex, Expr)>>(terms: I) -> Self {
        let mut op = Self::zero();
        for (a, c) in terms {
            op.add_term(a, c);
        }
        op
    }

    /// Adds `c · D^α`, merging with an existing term and dropping zeros.
    pub fn add_term(&mut self, alpha: MultiIndex, c: Expr) {
        if c.is_zero() {
            return;
        }
        let merged = match self.terms.remove(&alpha) {
            Some(old) => old + c,
            None => c,
        };
        if !merged.is_zero() {
            self.terms.insert(alpha, merged);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Expr)> {
        self.terms.iter()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> Expr {
        self.terms.get(alpha).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest total derivative order; `-1` for the zero operator.
    pub fn order(&self) -> i32 {
        self.terms.keys().map(|a| a.order() as i32).max().unwrap_or(-1)
    }

    /// Highest derivative order in one variable.
    pub fn order_in(&self, var: usize) -> i32 {
        self.terms.keys().map(|a| a.get(var) as i32).max().unwrap_or(-1)
    }

    pub fn multi_indices(&self) -> Vec<MultiIndex> {
        self.terms.keys().copied().collect()
    }

    /// Largest coefficient DAG size.
    pub fn node_count(&self) -> usize {
        self.terms.values().map(|c| c.dag_size()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &LinDiffOp) -> LinDiffOp {
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(*a, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &LinDiffOp) -> LinDiffOp {
        self.add(&other.scale(&Expr::constant(-1.0)))
    }

    /// `c · A` (left multiplication by a function).
    pub fn scale(&self, c: &Expr) -> LinDiffOp {
        Self::from_terms(self.terms.iter().map(|(a, k)| (*a, c * k)))
    }

    /// Applies `f` to every coefficient.
    pub fn map_coefficients(&self, mut f: impl FnMut(&Expr) -> Expr) -> LinDiffOp {
        Self::from_terms(self.terms.iter().map(|(a, k)| (*a, f(k))))
    }

    pub fn apply(&self, u: &Expr) -> Expr {
        self.apply_with(u, &mut Differentiator::new())
    }

    pub fn apply_with(&self, u: &Expr, d: &mut Differentiator) -> Expr {
        Expr::sum(self.terms.iter().map(|(a, c)| c * d.derivative(u, a)))
    }

    /// `self ∘ other`, expanded by the Leibniz rule.
    pub fn compose(&self, other: &LinDiffOp) -> LinDiffOp {
        self.compose_with(other, &mut Differentiator::new())
    }

    pub fn compose_with(&self, other: &LinDiffOp, d: &mut Differentiator) -> LinDiffOp {
        let mut out = LinDiffOp::zero();
        for (alpha, a) in &self.terms {
            for (beta, b) in &other.terms {
                for (gamma, binom) in alpha.sub_indices() {
                    let db = d.derivative(b, &gamma);
                    if db.is_zero() {
                        continue;
                    }
                    let idx = alpha.checked_sub(&gamma).expect("sub-index").add(beta);
                    out.add_term(idx, Expr::product([Expr::constant(binom), a.clone(), db]));
                }
            }
        }
        out
    }

    /// `self ∘ other − other ∘ self`.
    pub fn commutator(&self, other: &LinDiffOp) -> LinDiffOp {
        let mut d = Differentiator::new();
        self.commutator_with(other, &mut d)
    }

    pub fn commutator_with(&self, other: &LinDiffOp, d: &mut Differentiator) -> LinDiffOp {
        self.compose_with(other, d).sub(&other.compose_with(self, d))
    }

    /// Formal adjoint: `c D^α ↦ (−1)^{|α|} D^α ∘ c`.
    pub fn adjoint(&self) -> LinDiffOp {
        self.adjoint_with(&mut Differentiator::new())
    }

    pub fn adjoint_with(&self, d: &mut Differentiator) -> LinDiffOp {
        let mut out = LinDiffOp::zero();
        for (alpha, c) in &self.terms {
            let sign = if alpha.order() % 2 == 0 { 1.0 } else { -1.0 };
            for (gamma, binom) in alpha.sub_indices() {
                let dc = d.derivative(c, &gamma);
                if dc.is_zero() {
                    continue;
                }
                let idx = alpha.checked_sub(&gamma).expect("sub-index");
                out.add_term(idx, Expr::product([Expr::constant(sign * binom), dc]));
            }
        }
        out
    }

    /// Coefficients with products distributed over sums, for structural comparison.
    pub fn expand(&self) -> LinDiffOp {
        self.map_coefficients(|c| c.expand())
    }

    pub fn to_text(&self) -> Vec<TermText> {
        self.terms.iter().map(|(a, c)| TermText { coeff: c.to_string(), index: a.0 }).collect()
    }
}

impl fmt::Display for LinDiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (a, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if a.is_zero() {
                write!(f, "({c})")?;
            } else {
                write!(f, "({c})·{a}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for LinDiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinDiffOp[{self}]")
    }
}

/// Matrix of operators acting on vectors of functions.
#[derive(Clone, Debug, PartialEq)]
pub struct OpMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<LinDiffOp>,
}

impl OpMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        OpMatrix { rows, cols, entries: vec![LinDiffOp::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, LinDiffOp::identity());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<LinDiffOp>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged operator matrix");
        OpMatrix { rows: r, cols: c, entries: rows.into_iter().flatten().collect() }
    }

    pub fn get(&self, i: usize, j: usize) -> &LinDiffOp {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, op: LinDiffOp) {
        self.entries[i * self.cols + j] = op;
    }

    /// Highest order over all entries.
    pub fn order(&self) -> i32 {
        self.entries.iter().map(|e| e.order()).max().unwrap_or(-1)
    }

    pub fn row_order(&self, i: usize) -> i32 {
        (0..self.cols).map(|j| self.get(i, j).order()).max().unwrap_or(-1)
    }

    pub fn apply(&self, u: &[Expr]) -> Vec<Expr> {
        let mut d = Differentiator::new();
        self.apply_with(u, &mut d)
    }

    pub fn apply_with(&self, u: &[Expr], d: &mut Differentiator) -> Vec<Expr> {
        assert_eq!(u.len(), self.cols);
        (0..self.rows).map(|i| Expr::sum((0..self.cols).map(|j| self.get(i, j).apply_with(&u[j], d)))).collect()
    }

    pub fn compose(&self, other: &OpMatrix) -> OpMatrix {
        assert_eq!(self.cols, other.rows);
        let mut d = Differentiator::new();
        let mut out = OpMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = LinDiffOp::zero();
                for k in 0..self.cols {
                    acc = acc.add(&self.get(i, k).compose_with(other.get(k, j), &mut d));
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// Transpose with entrywise formal adjoints.
    pub fn adjoint(&self) -> OpMatrix {
        let mut d = Differentiator::new();
        let mut out = OpMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).adjoint_with(&mut d));
            }
        }
        out
    }
}
