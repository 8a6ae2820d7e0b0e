//! Expression trees over `(t, x1, ..., xN)` with canonical smart constructors.
//!
//! Nodes are immutable and shared through `Arc`, so an `Expr` is cheap to
//! clone and the trees produced by repeated differentiation are DAGs.
//! Canonicalization is structural: sums and products are flattened, constants
//! are folded, like terms and like factors are merged and operands are sorted
//! by a deterministic structural hash. Quotients are stored as products with
//! negative integer powers.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock, Weak};

use super::eval::Tape;
use super::multiindex::MultiIndex;
use super::EvalError;

/// Maximum number of variables (time plus up to three space directions).
pub const MAX_VARS: usize = 4;

/// Index of the time variable.
pub const TIME: usize = 0;

/// A user supplied scalar field, typically a spline table or a closure, that
/// can be embedded in an expression. Implementations report derivatives for
/// any multi-index they support and return zero beyond their smoothness.
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn eval(&self, point: &[f64], order: &MultiIndex) -> Result<f64, EvalError>;

    /// Bit mask of the variables the field depends on (bit `v` for variable `v`).
    fn variables(&self) -> u8;
}

#[derive(Clone)]
pub struct Expr(Arc<Node>);

pub(crate) struct Node {
    kind: Kind,
    hash: u64,
    vars: u8,
}

pub enum Kind {
    Const(f64),
    Var(usize),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Expr, i32),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
    Bump(Bump),
    Step(Step),
    Integral(Integral),
    Field(FieldRef),
}

/// `order`-th derivative of the compactly supported bump
/// `exp(-1/(1-r^2))` (`power == 0`) or `(1-r^2)^power`, `r = (2x - lo - hi)/(hi - lo)`,
/// supported on `(lo, hi)` in one variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub var: usize,
    pub lo: f64,
    pub hi: f64,
    pub order: u32,
    pub power: u32,
}

/// `order`-th derivative of the smooth step rising from 0 at `lo` to 1 at
/// `hi`, built from `exp(-1/u)` ratios.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub var: usize,
    pub lo: f64,
    pub hi: f64,
    pub order: u32,
}

/// `∫_lower^{x_var} integrand(.., y, ..) dy`, evaluated by adaptive quadrature.
pub struct Integral {
    pub integrand: Expr,
    pub var: usize,
    pub lower: f64,
    pub tol: f64,
    pub(crate) tape: OnceLock<Arc<Tape>>,
}

#[derive(Clone)]
pub struct FieldRef {
    pub field: Arc<dyn ScalarField>,
    pub order: MultiIndex,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn mix(h: u64, x: u64) -> u64 {
    let mut h = h;
    for b in x.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn float_bits(x: f64) -> u64 {
    if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

impl Kind {
    fn rank(&self) -> u64 {
        match self {
            Kind::Const(_) => 0,
            Kind::Var(_) => 1,
            Kind::Sum(_) => 2,
            Kind::Product(_) => 3,
            Kind::Pow(..) => 4,
            Kind::Sin(_) => 5,
            Kind::Cos(_) => 6,
            Kind::Exp(_) => 7,
            Kind::Bump(_) => 8,
            Kind::Step(_) => 9,
            Kind::Integral(_) => 10,
            Kind::Field(_) => 11,
        }
    }

    fn structural_hash(&self) -> u64 {
        let h = mix(FNV_OFFSET, self.rank());
        match self {
            Kind::Const(c) => mix(h, float_bits(*c)),
            Kind::Var(v) => mix(h, *v as u64),
            Kind::Sum(ts) | Kind::Product(ts) => ts.iter().fold(mix(h, ts.len() as u64), |h, t| mix(h, t.hash())),
            Kind::Pow(b, n) => mix(mix(h, b.hash()), *n as i64 as u64),
            Kind::Sin(a) | Kind::Cos(a) | Kind::Exp(a) => mix(h, a.hash()),
            Kind::Bump(b) => {
                let h = mix(mix(h, b.var as u64), float_bits(b.lo));
                mix(mix(mix(h, float_bits(b.hi)), b.order as u64), b.power as u64)
            }
            Kind::Step(s) => {
                let h = mix(mix(h, s.var as u64), float_bits(s.lo));
                mix(mix(h, float_bits(s.hi)), s.order as u64)
            }
            Kind::Integral(i) => {
                let h = mix(mix(h, i.integrand.hash()), i.var as u64);
                mix(mix(h, float_bits(i.lower)), float_bits(i.tol))
            }
            Kind::Field(f) => {
                let h = f.field.name().bytes().fold(h, |h, b| mix(h, b as u64));
                f.order.0.iter().fold(h, |h, &o| mix(h, o as u64))
            }
        }
    }

    fn variables(&self) -> u8 {
        match self {
            Kind::Const(_) => 0,
            Kind::Var(v) => 1u8 << v,
            Kind::Sum(ts) | Kind::Product(ts) => ts.iter().fold(0, |m, t| m | t.vars()),
            Kind::Pow(b, _) => b.vars(),
            Kind::Sin(a) | Kind::Cos(a) | Kind::Exp(a) => a.vars(),
            Kind::Bump(b) => 1u8 << b.var,
            Kind::Step(s) => 1u8 << s.var,
            Kind::Integral(i) => i.integrand.vars() | (1u8 << i.var),
            Kind::Field(f) => f.field.variables(),
        }
    }
}

impl Expr {
    /// Interns `kind`: structurally equal nodes are shared, so equality of
    /// expressions reduces to pointer equality.
    pub(crate) fn raw(kind: Kind) -> Expr {
        let hash = kind.structural_hash();
        let mut table = interner().lock().unwrap_or_else(|e| e.into_inner());
        let bucket = table.entry(hash).or_default();
        bucket.retain(|w| w.strong_count() > 0);
        for w in bucket.iter() {
            if let Some(node) = w.upgrade() {
                if shallow_eq(&node.kind, &kind) {
                    return Expr(node);
                }
            }
        }
        let vars = kind.variables();
        let node = Arc::new(Node { kind, hash, vars });
        bucket.push(Arc::downgrade(&node));
        Expr(node)
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub(crate) fn hash(&self) -> u64 {
        self.0.hash
    }

    /// Bit mask of variables the expression syntactically depends on.
    pub fn vars(&self) -> u8 {
        self.0.vars
    }

    pub fn depends_on(&self, var: usize) -> bool {
        self.0.vars & (1u8 << var) != 0
    }

    pub(crate) fn node_ptr(&self) -> *const () {
        Arc::as_ptr(&self.0) as *const ()
    }

    pub fn ptr_eq(a: &Expr, b: &Expr) -> bool {
        Arc::ptr_eq(&a.0, &b.0)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::raw(Kind::Const(if c == 0.0 { 0.0 } else { c }))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(index: usize) -> Expr {
        assert!(index < MAX_VARS, "variable index {index} out of range");
        Expr::raw(Kind::Var(index))
    }

    pub fn t() -> Expr {
        Expr::var(TIME)
    }

    /// Space variable `x_i`, 1-based as in the grammar.
    pub fn x(i: usize) -> Expr {
        Expr::var(i)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.kind() {
            Kind::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn sin(arg: Expr) -> Expr {
        match arg.as_const() {
            Some(c) => Expr::constant(c.sin()),
            None => Expr::raw(Kind::Sin(arg)),
        }
    }

    pub fn cos(arg: Expr) -> Expr {
        match arg.as_const() {
            Some(c) => Expr::constant(c.cos()),
            None => Expr::raw(Kind::Cos(arg)),
        }
    }

    pub fn exp(arg: Expr) -> Expr {
        match arg.as_const() {
            Some(c) => Expr::constant(c.exp()),
            None => Expr::raw(Kind::Exp(arg)),
        }
    }

    pub fn bump(var: usize, lo: f64, hi: f64) -> Expr {
        Expr::bump_derivative(var, lo, hi, 0)
    }

    pub fn bump_derivative(var: usize, lo: f64, hi: f64, order: u32) -> Expr {
        assert!(lo < hi, "bump support must be a nonempty interval");
        Expr::raw(Kind::Bump(Bump { var, lo, hi, order, power: 0 }))
    }

    /// `(1-r^2)^power` on `(lo, hi)`, zero outside: `C^{power-1}`, with
    /// derivatives that stay moderate, unlike the `exp` bump.
    pub fn poly_bump(var: usize, lo: f64, hi: f64, power: u32) -> Expr {
        Expr::poly_bump_derivative(var, lo, hi, power, 0)
    }

    pub fn poly_bump_derivative(var: usize, lo: f64, hi: f64, power: u32, order: u32) -> Expr {
        assert!(lo < hi, "bump support must be a nonempty interval");
        assert!(power > 0, "polynomial bump needs a positive power");
        // derivatives past power-1 are the one-sided ones (jump at the ends)
        Expr::raw(Kind::Bump(Bump { var, lo, hi, order, power }))
    }

    pub fn step(var: usize, lo: f64, hi: f64) -> Expr {
        Expr::step_derivative(var, lo, hi, 0)
    }

    pub fn step_derivative(var: usize, lo: f64, hi: f64, order: u32) -> Expr {
        assert!(lo < hi, "step transition must be a nonempty interval");
        Expr::raw(Kind::Step(Step { var, lo, hi, order }))
    }

    /// `f` for `x_var <= lo`, `g` for `x_var >= hi`, smooth in between.
    pub fn blend(var: usize, lo: f64, hi: f64, f: Expr, g: Expr) -> Expr {
        let s = Expr::step(var, lo, hi);
        &f + &(&(&g - &f) * &s)
    }

    /// Smooth plateau: 1 on `[inner_lo, inner_hi]`, 0 outside `(outer_lo, outer_hi)`.
    pub fn plateau(var: usize, outer_lo: f64, inner_lo: f64, inner_hi: f64, outer_hi: f64) -> Expr {
        let rise = Expr::step(var, outer_lo, inner_lo);
        let fall = Expr::one() - Expr::step(var, inner_hi, outer_hi);
        rise * fall
    }

    pub fn integral(integrand: Expr, var: usize, lower: f64, tol: f64) -> Expr {
        if integrand.is_zero() {
            return Expr::zero();
        }
        Expr::raw(Kind::Integral(Integral { integrand, var, lower, tol, tape: OnceLock::new() }))
    }

    pub fn field(field: Arc<dyn ScalarField>) -> Expr {
        Expr::field_derivative(field, MultiIndex::zero())
    }

    pub fn field_derivative(field: Arc<dyn ScalarField>, order: MultiIndex) -> Expr {
        Expr::raw(Kind::Field(FieldRef { field, order }))
    }

    /// Canonical sum.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut acc = SumBuilder::default();
        for t in terms {
            acc.push(t, 1.0);
        }
        acc.build()
    }

    /// Canonical product.
    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut acc = ProductBuilder::default();
        for f in factors {
            acc.push(f, 1);
        }
        acc.build()
    }

    pub fn powi(base: Expr, n: i32) -> Expr {
        if n == 0 {
            return Expr::one();
        }
        if n == 1 {
            return base;
        }
        match base.kind() {
            Kind::Const(c) => {
                if *c == 0.0 && n < 0 {
                    Expr::raw(Kind::Pow(base, n))
                } else {
                    Expr::constant(c.powi(n))
                }
            }
            Kind::Pow(b, m) => Expr::powi(b.clone(), m * n),
            Kind::Product(fs) => Expr::product(fs.iter().map(|f| Expr::powi(f.clone(), n))),
            _ => Expr::raw(Kind::Pow(base, n)),
        }
    }

    pub fn recip(self) -> Expr {
        Expr::powi(self, -1)
    }

    pub fn scale(&self, c: f64) -> Expr {
        Expr::product([Expr::constant(c), self.clone()])
    }

    /// Sorted ends of every bump and step transition in `x_var`: the places
    /// where the expression stops being analytic in that variable.
    pub fn breakpoints(&self, var: usize) -> Vec<f64> {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        let mut out = Vec::new();
        while let Some(e) = stack.pop() {
            if !seen.insert(e.node_ptr()) {
                continue;
            }
            match e.kind() {
                Kind::Bump(b) if b.var == var => out.extend([b.lo, b.hi]),
                Kind::Step(s) if s.var == var => out.extend([s.lo, s.hi]),
                _ => {}
            }
            e.for_each_child(|c| stack.push(c.clone()));
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Number of distinct nodes in the DAG.
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.node_ptr()) {
                continue;
            }
            e.for_each_child(|c| stack.push(c.clone()));
        }
        seen.len()
    }

    pub(crate) fn for_each_child(&self, mut f: impl FnMut(&Expr)) {
        match self.kind() {
            Kind::Sum(ts) | Kind::Product(ts) => ts.iter().for_each(f),
            Kind::Pow(b, _) => f(b),
            Kind::Sin(a) | Kind::Cos(a) | Kind::Exp(a) => f(a),
            Kind::Integral(i) => f(&i.integrand),
            Kind::Const(_) | Kind::Var(_) | Kind::Bump(_) | Kind::Step(_) | Kind::Field(_) => {}
        }
    }

    /// Distribute products over sums so that polynomial identities in the
    /// atoms become structural equalities. Only meant for equality checks on
    /// moderately sized expressions.
    pub fn expand(&self) -> Expr {
        let mut memo = HashMap::new();
        expand_rec(self, &mut memo)
    }

    /// Splits `c * core` into its numeric coefficient and the remaining factor.
    fn split_coefficient(&self) -> (f64, Expr) {
        if let Kind::Product(fs) = self.kind() {
            if let Some(c) = fs[0].as_const() {
                let rest = &fs[1..];
                let core = if rest.len() == 1 { rest[0].clone() } else { Expr::raw(Kind::Product(rest.to_vec())) };
                return (c, core);
            }
        }
        (1.0, self.clone())
    }

    fn sort_key(&self) -> (u64, u64) {
        (self.kind().rank(), self.hash())
    }
}

fn expand_rec(e: &Expr, memo: &mut HashMap<*const (), Expr>) -> Expr {
    if let Some(r) = memo.get(&e.node_ptr()) {
        return r.clone();
    }
    let out = match e.kind() {
        Kind::Const(_) | Kind::Var(_) | Kind::Bump(_) | Kind::Step(_) | Kind::Field(_) | Kind::Integral(_) => e.clone(),
        Kind::Sum(ts) => Expr::sum(ts.iter().map(|t| expand_rec(t, memo))),
        Kind::Product(fs) => {
            let mut acc: Vec<Expr> = vec![Expr::one()];
            for f in fs {
                let f = expand_rec(f, memo);
                let parts: Vec<Expr> = match f.kind() {
                    Kind::Sum(ts) => ts.clone(),
                    _ => vec![f.clone()],
                };
                let mut next = Vec::with_capacity(acc.len() * parts.len());
                for a in &acc {
                    for p in &parts {
                        next.push(Expr::product([a.clone(), p.clone()]));
                    }
                }
                acc = next;
            }
            Expr::sum(acc)
        }
        Kind::Pow(b, n) => {
            let b = expand_rec(b, memo);
            if *n > 1 && matches!(b.kind(), Kind::Sum(_)) {
                let mut acc = b.clone();
                for _ in 1..*n {
                    acc = expand_rec(&Expr::product([acc, b.clone()]), memo);
                }
                acc
            } else {
                Expr::powi(b, *n)
            }
        }
        Kind::Sin(a) => Expr::sin(expand_rec(a, memo)),
        Kind::Cos(a) => Expr::cos(expand_rec(a, memo)),
        Kind::Exp(a) => Expr::exp(expand_rec(a, memo)),
    };
    memo.insert(e.node_ptr(), out.clone());
    out
}

/// Groups equal expressions by structural hash.
struct Groups<T> {
    items: Vec<(Expr, T)>,
    index: HashMap<u64, Vec<usize>>,
}

impl<T> Default for Groups<T> {
    fn default() -> Self {
        Groups { items: Vec::new(), index: HashMap::new() }
    }
}

impl<T> Groups<T> {
    fn entry(&mut self, key: Expr, init: T) -> &mut T {
        let slot = self.index.entry(key.hash()).or_default();
        if let Some(&i) = slot.iter().find(|&&i| self.items[i].0 == key) {
            return &mut self.items[i].1;
        }
        slot.push(self.items.len());
        self.items.push((key, init));
        &mut self.items.last_mut().unwrap().1
    }
}

#[derive(Default)]
struct SumBuilder {
    constant: f64,
    groups: Groups<f64>,
}

impl SumBuilder {
    fn push(&mut self, t: Expr, weight: f64) {
        match t.kind() {
            Kind::Const(c) => self.constant += weight * c,
            Kind::Sum(ts) => {
                for s in ts {
                    self.push(s.clone(), weight);
                }
            }
            _ => {
                let (c, core) = t.split_coefficient();
                *self.groups.entry(core, 0.0) += weight * c;
            }
        }
    }

    fn build(self) -> Expr {
        let mut terms: Vec<Expr> = self
            .groups
            .items
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(core, c)| with_coefficient(c, core))
            .collect();
        terms.sort_by_key(|t| t.sort_key());
        if self.constant != 0.0 {
            terms.insert(0, Expr::constant(self.constant));
        }
        match terms.len() {
            0 => Expr::zero(),
            1 => terms.pop().unwrap(),
            _ => Expr::raw(Kind::Sum(terms)),
        }
    }
}

fn with_coefficient(c: f64, core: Expr) -> Expr {
    if c == 1.0 {
        return core;
    }
    match core.kind() {
        Kind::Product(fs) => {
            let mut v = Vec::with_capacity(fs.len() + 1);
            v.push(Expr::constant(c));
            v.extend(fs.iter().cloned());
            Expr::raw(Kind::Product(v))
        }
        _ => Expr::raw(Kind::Product(vec![Expr::constant(c), core])),
    }
}

#[derive(Default)]
struct ProductBuilder {
    coefficient: f64,
    started: bool,
    groups: Groups<i32>,
}

impl ProductBuilder {
    fn push(&mut self, f: Expr, exponent: i32) {
        if !self.started {
            self.coefficient = 1.0;
            self.started = true;
        }
        match f.kind() {
            Kind::Const(c) if !(*c == 0.0 && exponent < 0) => self.coefficient *= c.powi(exponent),
            Kind::Product(fs) => {
                for g in fs {
                    self.push(g.clone(), exponent);
                }
            }
            Kind::Pow(b, n) => {
                let b = b.clone();
                let n = *n;
                *self.groups.entry(b, 0) += n * exponent;
            }
            _ => *self.groups.entry(f, 0) += exponent,
        }
    }

    fn build(self) -> Expr {
        let coefficient = if self.started { self.coefficient } else { 1.0 };
        if coefficient == 0.0 {
            return Expr::zero();
        }
        let mut factors: Vec<Expr> = self
            .groups
            .items
            .into_iter()
            .filter(|(_, n)| *n != 0)
            .map(|(b, n)| if n == 1 { b } else { Expr::raw(Kind::Pow(b, n)) })
            .collect();
        // c * (a + b) -> c*a + c*b keeps scaled sums comparable term by term.
        if factors.len() == 1 {
            if let Kind::Sum(ts) = factors[0].kind() {
                if coefficient != 1.0 {
                    let mut acc = SumBuilder::default();
                    for t in ts {
                        acc.push(t.clone(), coefficient);
                    }
                    return acc.build();
                }
            }
        }
        factors.sort_by_key(|f| f.sort_key());
        if coefficient != 1.0 {
            factors.insert(0, Expr::constant(coefficient));
        }
        match factors.len() {
            0 => Expr::one(),
            1 => factors.pop().unwrap(),
            _ => Expr::raw(Kind::Product(factors)),
        }
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        Expr::ptr_eq(self, other)
    }
}

impl Eq for Expr {}

impl std::hash::Hash for Expr {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

type InternTable = HashMap<u64, Vec<Weak<Node>>>;

fn interner() -> &'static Mutex<InternTable> {
    static TABLE: OnceLock<Mutex<InternTable>> = OnceLock::new();
    TABLE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Equality of node payloads, with children compared by identity (children
/// are interned already).
fn shallow_eq(a: &Kind, b: &Kind) -> bool {
    let same = |x: &[Expr], y: &[Expr]| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| Expr::ptr_eq(p, q));
    match (a, b) {
        (Kind::Const(x), Kind::Const(y)) => float_bits(*x) == float_bits(*y),
        (Kind::Var(x), Kind::Var(y)) => x == y,
        (Kind::Sum(x), Kind::Sum(y)) | (Kind::Product(x), Kind::Product(y)) => same(x, y),
        (Kind::Pow(x, n), Kind::Pow(y, m)) => n == m && Expr::ptr_eq(x, y),
        (Kind::Sin(x), Kind::Sin(y)) | (Kind::Cos(x), Kind::Cos(y)) | (Kind::Exp(x), Kind::Exp(y)) => Expr::ptr_eq(x, y),
        (Kind::Bump(x), Kind::Bump(y)) => {
            x.var == y.var
                && float_bits(x.lo) == float_bits(y.lo)
                && float_bits(x.hi) == float_bits(y.hi)
                && x.order == y.order
                && x.power == y.power
        }
        (Kind::Step(x), Kind::Step(y)) => {
            x.var == y.var && float_bits(x.lo) == float_bits(y.lo) && float_bits(x.hi) == float_bits(y.hi) && x.order == y.order
        }
        (Kind::Integral(x), Kind::Integral(y)) => {
            x.var == y.var
                && float_bits(x.lower) == float_bits(y.lower)
                && float_bits(x.tol) == float_bits(y.tol)
                && Expr::ptr_eq(&x.integrand, &y.integrand)
        }
        (Kind::Field(x), Kind::Field(y)) => Arc::ptr_eq(&x.field, &y.field) && x.order == y.order,
        _ => false,
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $body:expr) => {
        impl std::ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl std::ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                std::ops::$trait::$method(&self, &rhs)
            }
        }
        impl std::ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                std::ops::$trait::$method(&self, rhs)
            }
        }
        impl std::ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                std::ops::$trait::$method(self, &rhs)
            }
        }
        impl std::ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                std::ops::$trait::$method(&self, &Expr::constant(rhs))
            }
        }
        impl std::ops::$trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                std::ops::$trait::$method(self, &Expr::constant(rhs))
            }
        }
        impl std::ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                std::ops::$trait::$method(&Expr::constant(self), &rhs)
            }
        }
        impl std::ops::$trait<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                std::ops::$trait::$method(&Expr::constant(self), rhs)
            }
        }
    };
}

binary_op!(Add, add, |a, b| Expr::sum([a.clone(), b.clone()]));
binary_op!(Sub, sub, |a, b| Expr::sum([a.clone(), b.scale(-1.0)]));
binary_op!(Mul, mul, |a, b| Expr::product([a.clone(), b.clone()]));
binary_op!(Div, div, |a, b| Expr::product([a.clone(), Expr::powi(b.clone(), -1)]));

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(-1.0)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(-1.0)
    }
}
