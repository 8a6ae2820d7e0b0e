//! Commutator elimination: from `L1 = ∂x1` and an operator `L2` without
//! `x1`-derivatives, build `M1, M2` with `M1∘L1 + M2∘L2 = Id` on a window.
//!
//! Invariant of the loop: `N = A∘L1 + B∘L2`. Each step divides `N` by its
//! leading nonvanishing derivative coefficient `a` and replaces it by the
//! commutator `[L1, a⁻¹N]`, which kills that term; the accumulators follow
//! from `[L1, cA∘L1 + cB∘L2] = ([L1, cA] − cB∘L2)∘L1 + (L1∘cB)∘L2`.

use serde::Serialize;

use super::verify::{verify_identity_pair, verify_pair};
use super::SolvabilityError;
use crate::symbolic::{Differentiator, Expr, LinDiffOp, MultiIndex, TermText, Tape, Workspace};
use crate::system::Window;

#[derive(Clone, Debug)]
pub struct EliminationOptions {
    /// Relative nonvanishing threshold: `δ = delta_rel · max |a|` on the window.
    pub delta_rel: f64,
    /// Preferred pivot conditioning: a cell with `min |a| ≥ ratio · max |a|`
    /// is taken over a coarser cell that only clears `δ`.
    pub conditioning_ratio: f64,
    /// Samples per axis for window searches.
    pub samples: usize,
    /// Maximal dyadic refinement depth.
    pub max_depth: u32,
    /// Per-coefficient DAG size limit.
    pub node_limit: usize,
    pub min_volume: f64,
    /// A sample counts as zero when `|value| ≤ zero_factor · noise estimate`.
    pub zero_factor: f64,
    /// Check the pair decomposition after every step.
    pub check_pairs: bool,
    pub trials: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for EliminationOptions {
    fn default() -> Self {
        EliminationOptions {
            delta_rel: 1e-6,
            conditioning_ratio: 0.1,
            samples: 32,
            max_depth: 4,
            node_limit: 1_000_000,
            min_volume: 1e-14,
            zero_factor: 64.0,
            check_pairs: true,
            trials: 10,
            tolerance: 1e-8,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub pivot: MultiIndex,
    pub window: Window,
    /// Pair-decomposition residual after the step (absent when unchecked).
    pub pair_residual: Option<f64>,
    pub terms_left: usize,
}

#[derive(Clone, Debug)]
pub struct EliminationResult {
    pub m1: LinDiffOp,
    pub m2: LinDiffOp,
    pub window: Window,
    pub steps: usize,
    /// Zero-order coefficient `c` of the final `N`; `M = c⁻¹(A, B)`.
    pub multiplier: Expr,
    /// `max(order M1, order M2)`.
    pub order: i32,
    pub log: Vec<StepRecord>,
    /// Residual of `M1∘L1 + M2∘L2 = Id` on the final window.
    pub residual: f64,
}

#[derive(Serialize)]
pub struct EliminationSummary<'a> {
    pub m1: Vec<TermText>,
    pub m2: Vec<TermText>,
    pub window: &'a Window,
    pub steps: usize,
    pub multiplier: String,
    pub order: i32,
    pub residual: f64,
    pub log: &'a [StepRecord],
}

impl EliminationResult {
    pub fn summary(&self) -> EliminationSummary<'_> {
        EliminationSummary {
            m1: self.m1.to_text(),
            m2: self.m2.to_text(),
            window: &self.window,
            steps: self.steps,
            multiplier: self.multiplier.to_string(),
            order: self.order,
            residual: self.residual,
            log: &self.log,
        }
    }
}

/// Values and noise of one expression on a cell-centred grid over `axes`;
/// other coordinates sit at the window centre. Row-major with the first
/// axis fastest.
struct Sampled {
    axes: Vec<usize>,
    n: usize,
    values: Vec<f64>,
    noise: Vec<f64>,
}

impl Sampled {
    fn new(e: &Expr, window: &Window, n: usize) -> Result<Sampled, SolvabilityError> {
        let axes: Vec<usize> = (0..window.dims()).filter(|&a| e.depends_on(a)).collect();
        let tape = Tape::single(e);
        let mut ws = Workspace::default();
        let total = n.pow(axes.len() as u32);
        let mut point = window.center();
        let (mut values, mut noise) = (Vec::with_capacity(total), Vec::with_capacity(total));
        for k in 0..total {
            let mut rem = k;
            for &a in &axes {
                point[a] = window.sample(a, rem % n, n);
                rem /= n;
            }
            let (v, z) = tape.eval_with_noise(&point, &mut ws)?[0];
            values.push(v);
            noise.push(z);
        }
        Ok(Sampled { axes, n, values, noise })
    }

    fn vanishes(&self, factor: f64) -> bool {
        self.values.iter().zip(&self.noise).all(|(v, z)| v.abs() <= factor * z)
    }

    fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Largest dyadic cell (coarsest depth first) on which `min |value| > δ`;
    /// ties at one depth go to the larger minimum.
    fn sub_box(&self, window: &Window, delta: f64, max_depth: u32) -> Option<Window> {
        let d = self.axes.len();
        for depth in 0..=max_depth {
            let cells = 1usize << depth;
            if cells > self.n {
                break;
            }
            let per = self.n / cells;
            let mut mins = vec![f64::INFINITY; cells.pow(d as u32)];
            for (k, v) in self.values.iter().enumerate() {
                let (mut rem, mut cell, mut stride) = (k, 0, 1);
                for _ in 0..d {
                    cell += (rem % self.n) / per * stride;
                    rem /= self.n;
                    stride *= cells;
                }
                mins[cell] = mins[cell].min(v.abs());
            }
            let (best, &m) = mins.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
            if m > delta {
                let mut w = window.clone();
                let mut rem = best;
                for &a in &self.axes {
                    let c = rem % cells;
                    rem /= cells;
                    let h = window.width(a) / cells as f64;
                    w.lo[a] = window.lo[a] + c as f64 * h;
                    w.hi[a] = w.lo[a] + h;
                }
                return Some(w);
            }
        }
        None
    }
}

/// Runs the elimination loop for `(l1, l2)` starting on `window`.
pub fn eliminate(l1: &LinDiffOp, l2: &LinDiffOp, window: &Window, opts: &EliminationOptions) -> Result<EliminationResult, SolvabilityError> {
    if l2.order_in(1) > 0 {
        return Err(SolvabilityError::NotReduced);
    }
    let mut d = Differentiator::new();
    let mut n = l2.clone();
    let mut a = LinDiffOp::zero();
    let mut b = LinDiffOp::identity();
    let mut w = window.clone();
    let mut log = Vec::new();
    let budget = l2.multi_indices().iter().filter(|m| !m.is_zero()).count();

    loop {
        let mut pivot = None;
        let mut indices: Vec<MultiIndex> = n.multi_indices().into_iter().filter(|m| !m.is_zero()).collect();
        indices.sort_by(|x, y| x.pivot_cmp(y));
        for alpha in indices {
            let s = Sampled::new(&n.coeff(&alpha), &w, opts.samples)?;
            if !s.vanishes(opts.zero_factor) {
                pivot = Some((alpha, s));
                break;
            }
        }
        let Some((alpha, sampled)) = pivot else { break };
        if log.len() >= budget {
            return Err(SolvabilityError::Numerical(format!("no termination after {budget} steps")));
        }
        w = shrink_to(&sampled, &w, opts)?;
        let c = Expr::recip(n.coeff(&alpha));
        let cn = n.scale(&c);
        let ca = a.scale(&c);
        let cb = b.scale(&c);
        let next_n = cn.map_coefficients(|e| d.diff(e, 1));
        debug_assert!(next_n.coeff(&alpha).is_zero());
        a = l1.commutator_with(&ca, &mut d).sub(&cb.compose_with(l2, &mut d));
        b = l1.compose_with(&cb, &mut d);
        n = next_n;
        for op in [&n, &a, &b] {
            let nodes = op.node_count();
            if nodes > opts.node_limit {
                return Err(SolvabilityError::Blowup { nodes });
            }
        }
        let pair_residual = if opts.check_pairs {
            let r = verify_pair(&n, &a, &b, l1, l2, &w, opts.trials, opts.seed ^ log.len() as u64)?;
            if r > opts.tolerance {
                return Err(SolvabilityError::Inaccurate { what: "pair decomposition", residual: r });
            }
            Some(r)
        } else {
            None
        };
        log.push(StepRecord { pivot: alpha, window: w.clone(), pair_residual, terms_left: n.len() });
    }

    let c0 = n.coeff(&MultiIndex::zero());
    let sampled = Sampled::new(&c0, &w, opts.samples)?;
    if c0.is_zero() || sampled.vanishes(opts.zero_factor) {
        return Err(SolvabilityError::NonSolvable { window: w, reason: "zero-order coefficient vanishes".into() });
    }
    w = shrink_to(&sampled, &w, opts)?;
    let inv = Expr::recip(c0.clone());
    let m1 = a.scale(&inv);
    let m2 = b.scale(&inv);
    let residual = verify_identity_pair(&m1, &m2, l1, l2, &w, opts.trials, opts.seed.wrapping_add(1))?;
    if residual > opts.tolerance {
        // A zero-order coefficient made of rounding noise passes the sampled
        // tests but cannot invert N: the identity then fails at O(1).
        if residual > 1e-3 {
            return Err(SolvabilityError::NonSolvable {
                window: w,
                reason: format!("zero-order coefficient is numerically zero (identity residual {residual:.3e})"),
            });
        }
        return Err(SolvabilityError::Inaccurate { what: "M1∘L1 + M2∘L2 = Id", residual });
    }
    Ok(EliminationResult { order: m1.order().max(m2.order()), m1, m2, window: w, steps: log.len(), multiplier: c0, log, residual })
}

fn shrink_to(s: &Sampled, w: &Window, opts: &EliminationOptions) -> Result<Window, SolvabilityError> {
    let max = s.max_abs();
    let sub = s
        .sub_box(w, opts.conditioning_ratio * max, opts.max_depth)
        .or_else(|| s.sub_box(w, opts.delta_rel * max, opts.max_depth))
        .ok_or_else(|| SolvabilityError::NonSolvable { window: w.clone(), reason: "no sub-box where the pivot stays away from zero".into() })?;
    if sub.volume() < opts.min_volume {
        return Err(SolvabilityError::WindowTooSmall { volume: sub.volume() });
    }
    Ok(sub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::parse_expression;

    fn p(s: &str) -> Expr {
        parse_expression(s, 2).unwrap()
    }

    #[test]
    fn pure_multiplication_inverts_directly() {
        let l2 = LinDiffOp::multiplication(Expr::constant(2.0));
        let w = Window::new(vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]);
        let r = eliminate(&LinDiffOp::partial(1), &l2, &w, &EliminationOptions::default()).unwrap();
        assert_eq!(r.steps, 0);
        assert!(r.m1.is_zero());
        assert_eq!(r.m2, LinDiffOp::multiplication(Expr::constant(0.5)));
    }

    #[test]
    fn one_step_example() {
        // L2 = x1 x2 + x2 ∂x2: one commutator gives ∂x1(x1) = 1.
        let l2 = LinDiffOp::from_terms([(MultiIndex::zero(), p("x1*x2")), (MultiIndex::unit(2), p("x2"))]);
        let w = Window::new(vec![0.0, 0.5, 0.5], vec![1.0, 1.5, 1.5]);
        let r = eliminate(&LinDiffOp::partial(1), &l2, &w, &EliminationOptions::default()).unwrap();
        assert_eq!(r.steps, 1);
        assert!(r.residual <= 1e-8);
        // by hand: N1 = [∂1, x2⁻¹L2] = Id, A1 = −x2⁻¹L2, B1 = ∂1∘x2⁻¹ = x2⁻¹∂1
        assert_eq!(r.multiplier, Expr::one());
        let at = |op: &LinDiffOp, m: MultiIndex| op.coeff(&m).eval(&[0.3, 0.7, 0.9]).unwrap();
        assert!((at(&r.m1, MultiIndex::zero()) + 0.7).abs() < 1e-15);
        assert!((at(&r.m1, MultiIndex::unit(2)) + 1.0).abs() < 1e-15);
        assert!((at(&r.m2, MultiIndex::unit(1)) - 1.0 / 0.9).abs() < 1e-15);
        assert_eq!(r.m2.len(), 1);
    }

    #[test]
    fn constant_zero_order_is_non_solvable() {
        let l2 = LinDiffOp::from_terms([
            (MultiIndex::zero(), Expr::constant(3.0)),
            (MultiIndex::unit(0), Expr::constant(-1.0)),
            (MultiIndex::from_slice(&[0, 0, 2]), p("-(1 + x2^2)")),
        ]);
        let w = Window::new(vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]);
        let err = eliminate(&LinDiffOp::partial(1), &l2, &w, &EliminationOptions::default()).unwrap_err();
        assert!(matches!(err, SolvabilityError::NonSolvable { .. }), "{err}");
    }
}
