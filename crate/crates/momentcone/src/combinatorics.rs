//! Exact-arithmetic combinatorial engine: set partitions, pairings, the
//! star and diamond products on functionals of finite configurations, the
//! K-transform, the block-diagonal lift 𝓡, and Wick polynomial pairings.
//!
//! Counting routines work in big-integer arithmetic; functional values are
//! generic over a small `Ring` abstraction so that identity tests can run
//! on exact rationals while production paths use f64.

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Point, YPoint};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

/// Maximum order for exact partition enumeration.
pub const MAX_PARTITION_ORDER: usize = 12;
/// Maximum side for pairing enumeration.
pub const MAX_PAIRING_SIDE: usize = 6;

/// A partition of `{0, …, n-1}` into disjoint nonempty blocks, ordered by
/// their minimal elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> Vec<u32> {
        self.blocks.iter().map(|b| b.len() as u32).collect()
    }
}

/// All partitions of an n-element set, enumerated through restricted
/// growth strings so blocks come out canonically ordered by minimum.
pub fn enumerate_partitions(n: usize) -> Result<Vec<Partition>> {
    if n == 0 || n > MAX_PARTITION_ORDER {
        return Err(Error::Insufficient(format!(
            "partition enumeration supports 1 ≤ n ≤ {MAX_PARTITION_ORDER}, got {n}"
        )));
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    loop {
        let k = rgs.iter().copied().max().unwrap() + 1;
        let mut blocks = vec![Vec::new(); k];
        for (i, &b) in rgs.iter().enumerate() {
            blocks[b].push(i);
        }
        out.push(Partition { blocks });
        // next restricted growth string
        let mut i = n;
        loop {
            if i == 1 {
                return Ok(out);
            }
            i -= 1;
            let cap = rgs[..i].iter().copied().max().unwrap() + 1;
            if rgs[i] < cap {
                rgs[i] += 1;
                for r in rgs.iter_mut().skip(i + 1) {
                    *r = 0;
                }
                break;
            }
        }
    }
}

/// Bell numbers by the triangle recurrence, exact.
pub fn bell_number(n: usize) -> BigUint {
    let mut row = vec![BigUint::one()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(row.last().unwrap().clone());
        for j in 0..row.len() {
            let v = &next[j] + &row[j];
            next.push(v);
        }
        row = next;
    }
    row[0].clone()
}

pub fn factorial_big(n: u64) -> BigUint {
    let mut f = BigUint::one();
    for k in 2..=n {
        f *= BigUint::from(k);
    }
    f
}

/// The number `N_{i_1,…,i_n} = I!/(i_1!⋯i_n!·r_1!r_2!⋯)` of partitions of
/// an I-element set whose multiset of block sizes equals `{i_1,…,i_n}`,
/// where `r_l` counts the entries equal to l.
pub fn count_partitions_with_block_sizes(sizes: &[u32]) -> BigUint {
    assert!(sizes.iter().all(|&i| i >= 1), "block sizes must be ≥ 1");
    let total: u64 = sizes.iter().map(|&i| i as u64).sum();
    let mut num = factorial_big(total);
    for &i in sizes {
        num /= factorial_big(i as u64);
    }
    let max = *sizes.iter().max().unwrap();
    for l in 1..=max {
        let r = sizes.iter().filter(|&&i| i == l).count() as u64;
        num /= factorial_big(r);
    }
    num
}

/// A partial pairing between `{0,…,m-1}` and `{m,…,m+n-1}`: a set of
/// pairs (α, β) with all α distinct and all β distinct. The empty pairing
/// is included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    pub pairs: Vec<(usize, usize)>,
}

impl Pairing {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// All elements of Pair(m, n).
pub fn enumerate_pairings(m: usize, n: usize) -> Result<Vec<Pairing>> {
    if m > MAX_PAIRING_SIDE || n > MAX_PAIRING_SIDE {
        return Err(Error::Insufficient(format!(
            "pairing enumeration supports sides ≤ {MAX_PAIRING_SIDE}, got ({m}, {n})"
        )));
    }
    let mut out = Vec::new();
    let mut current: Vec<(usize, usize)> = Vec::new();
    let mut used_right = vec![false; n];
    fn recurse(
        alpha: usize,
        m: usize,
        n: usize,
        current: &mut Vec<(usize, usize)>,
        used_right: &mut [bool],
        out: &mut Vec<Pairing>,
    ) {
        if alpha == m {
            out.push(Pairing { pairs: current.clone() });
            return;
        }
        // leave alpha unpaired
        recurse(alpha + 1, m, n, current, used_right, out);
        for b in 0..n {
            if !used_right[b] {
                used_right[b] = true;
                current.push((alpha, m + b));
                recurse(alpha + 1, m, n, current, used_right, out);
                current.pop();
                used_right[b] = false;
            }
        }
    }
    recurse(0, m, n, &mut current, &mut used_right, &mut out);
    Ok(out)
}

/// Scalars the functional algebra runs over. `from_ratio` must be exact
/// for the factorial ratios that appear in the diamond product.
pub trait Ring:
    Clone
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Zero
    + One
    + PartialEq
{
    fn from_ratio(num: u64, den: u64) -> Self;
}

impl Ring for f64 {
    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }
}

impl Ring for BigRational {
    fn from_ratio(num: u64, den: u64) -> Self {
        BigRational::new(num.into(), den.into())
    }
}

type Table<T> = Arc<dyn Fn(&[YPoint]) -> T + Send + Sync>;

/// Boxed symmetric function on tuples of base-space points.
pub type PointFn = Arc<dyn Fn(&[&Point]) -> f64 + Send + Sync>;

type DiamondTerm<T> = (T, Table<T>, Table<T>, usize, usize, Pairing);

/// A functional `G: Γ_0(Y) → T` with finitely many active orders: a
/// scalar value at the empty configuration plus one table per order n,
/// each a callable on n-tuples of Y-points. Missing tables are zero.
#[derive(Clone)]
pub struct ConfigFunctional<T> {
    order0: T,
    tables: Vec<Option<Table<T>>>,
}

impl<T: Ring> ConfigFunctional<T> {
    pub fn new(order0: T) -> Self {
        ConfigFunctional { order0, tables: Vec::new() }
    }

    /// The indicator of the empty configuration.
    pub fn empty_indicator() -> Self {
        ConfigFunctional { order0: T::one(), tables: Vec::new() }
    }

    pub fn with_table<F>(mut self, order: usize, f: F) -> Self
    where
        F: Fn(&[YPoint]) -> T + Send + Sync + 'static,
    {
        assert!(order >= 1);
        if self.tables.len() < order {
            self.tables.resize_with(order, || None);
        }
        self.tables[order - 1] = Some(Arc::new(f));
        self
    }

    pub fn order0(&self) -> &T {
        &self.order0
    }

    /// Largest order with a table attached.
    pub fn max_order(&self) -> usize {
        self.tables
            .iter()
            .rposition(|t| t.is_some())
            .map_or(0, |i| i + 1)
    }

    /// Evaluate at a finite configuration given as a tuple of Y-points.
    pub fn eval(&self, points: &[YPoint]) -> T {
        if points.is_empty() {
            return self.order0.clone();
        }
        match self.tables.get(points.len() - 1) {
            Some(Some(f)) => f(points),
            _ => T::zero(),
        }
    }
}

/// Star product evaluated at a configuration λ:
/// `Σ_{λ_1 ∪ λ_2 = λ} G_1(λ_1) G_2(λ_2)` over all 3^{|λ|} ordered covers.
pub fn star_product<T: Ring>(
    g1: &ConfigFunctional<T>,
    g2: &ConfigFunctional<T>,
    lambda: &[YPoint],
) -> Result<T> {
    let n = lambda.len();
    if n > MAX_PARTITION_ORDER {
        return Err(Error::Insufficient(format!(
            "star product supports |λ| ≤ {MAX_PARTITION_ORDER}, got {n}"
        )));
    }
    // assignment per point: 0 → λ1 only, 1 → λ2 only, 2 → both
    let mut assign = vec![0u8; n];
    let mut total = T::zero();
    loop {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (i, &a) in assign.iter().enumerate() {
            match a {
                0 => left.push(lambda[i].clone()),
                1 => right.push(lambda[i].clone()),
                _ => {
                    left.push(lambda[i].clone());
                    right.push(lambda[i].clone());
                }
            }
        }
        total = total + g1.eval(&left) * g2.eval(&right);
        let mut j = 0;
        loop {
            if j == n {
                return Ok(total);
            }
            assign[j] += 1;
            if assign[j] < 3 {
                break;
            }
            assign[j] = 0;
            j += 1;
        }
    }
}

/// K-transform `(KG)(γ) = Σ_{λ ⋐ γ} G(λ)` over all finite
/// sub-configurations of γ including the empty one. Only subsets up to
/// the highest active order of G contribute.
pub fn k_transform<T: Ring>(g: &ConfigFunctional<T>, gamma: &DiscreteMeasure) -> Result<T> {
    if gamma.len() > MAX_PARTITION_ORDER {
        return Err(Error::Insufficient(format!(
            "k_transform supports |γ| ≤ {MAX_PARTITION_ORDER}, got {}",
            gamma.len()
        )));
    }
    Ok(k_transform_unchecked(g, &gamma.lifted()))
}

/// K-transform on a lifted configuration without the size guard; the sum
/// is truncated at the highest active order of G, so large configurations
/// are fine as long as the order is small.
pub fn k_transform_unchecked<T: Ring>(g: &ConfigFunctional<T>, points: &[YPoint]) -> T {
    let max_ord = g.max_order().min(points.len());
    let mut total = g.order0().clone();
    let mut tuple: Vec<YPoint> = Vec::with_capacity(max_ord);
    fn recurse<T: Ring>(
        g: &ConfigFunctional<T>,
        points: &[YPoint],
        start: usize,
        remaining: usize,
        tuple: &mut Vec<YPoint>,
        total: &mut T,
    ) {
        if remaining == 0 {
            *total = total.clone() + g.eval(tuple);
            return;
        }
        for i in start..=points.len().saturating_sub(remaining) {
            tuple.push(points[i].clone());
            recurse(g, points, i + 1, remaining - 1, tuple, total);
            tuple.pop();
        }
    }
    for k in 1..=max_ord {
        recurse(g, points, 0, k, &mut tuple, &mut total);
    }
    total
}

/// The ϰ-contracted tensor product `(G_1^{(m)} ⊗ G_2^{(n)})_ϰ` evaluated
/// at `m + n - |ϰ|` points: the first m arguments feed G1; G2's slots are
/// filled by the shared variables dictated by ϰ (pairs sorted by their
/// right element) and the leftover slots take the trailing points in
/// order.
fn contracted_eval<T: Ring>(
    g1: &Table<T>,
    g2: &Table<T>,
    m: usize,
    n: usize,
    kappa: &Pairing,
    points: &[YPoint],
) -> T {
    debug_assert_eq!(points.len(), m + n - kappa.len());
    let mut sorted = kappa.pairs.clone();
    sorted.sort_by_key(|&(_, b)| b);
    let mut g2_args: Vec<Option<YPoint>> = vec![None; n];
    for &(a, b) in &sorted {
        g2_args[b - m] = Some(points[a].clone());
    }
    let mut next = m;
    for slot in g2_args.iter_mut() {
        if slot.is_none() {
            *slot = Some(points[next].clone());
            next += 1;
        }
    }
    let left: Vec<YPoint> = points[..m].to_vec();
    let right: Vec<YPoint> = g2_args.into_iter().map(Option::unwrap).collect();
    g1(&left) * g2(&right)
}

/// Diamond product: per order pair (m, n) the weighted sum
/// `Σ_{ϰ ∈ Pair(m,n)} (m+n-|ϰ|)!/(m!·n!) · (G_1^{(m)} ⊗ G_2^{(n)})_ϰ`,
/// with the scalar parts multiplying through bilinearly.
pub fn diamond_product<T: Ring>(
    g1: &ConfigFunctional<T>,
    g2: &ConfigFunctional<T>,
) -> Result<ConfigFunctional<T>> {
    let m_max = g1.max_order();
    let n_max = g2.max_order();
    if m_max > MAX_PAIRING_SIDE || n_max > MAX_PAIRING_SIDE {
        return Err(Error::Insufficient(format!(
            "diamond product supports orders ≤ {MAX_PAIRING_SIDE}, got ({m_max}, {n_max})"
        )));
    }
    // contributions[q-1] collects weighted ϰ-terms of output order q
    let mut contributions: Vec<Vec<DiamondTerm<T>>> = vec![Vec::new(); m_max + n_max];
    for m in 1..=m_max {
        let t1 = match &g1.tables[m - 1] {
            Some(t) => t.clone(),
            None => continue,
        };
        for n in 1..=n_max {
            let t2 = match &g2.tables[n - 1] {
                Some(t) => t.clone(),
                None => continue,
            };
            for kappa in enumerate_pairings(m, n)? {
                let q = m + n - kappa.len();
                let weight = T::from_ratio(
                    factorial_u64(q as u64),
                    factorial_u64(m as u64) * factorial_u64(n as u64),
                );
                contributions[q - 1].push((weight, t1.clone(), t2.clone(), m, n, kappa));
            }
        }
    }
    let mut out = ConfigFunctional::new(g1.order0.clone() * g2.order0.clone());
    // scalar-times-table cross terms
    let c1 = g1.order0.clone();
    let c2 = g2.order0.clone();
    for q in 1..=(m_max + n_max) {
        let terms = std::mem::take(&mut contributions[q - 1]);
        let t1_scaled = if q <= n_max { g2.tables[q - 1].clone() } else { None };
        let t2_scaled = if q <= m_max { g1.tables[q - 1].clone() } else { None };
        if terms.is_empty() && t1_scaled.is_none() && t2_scaled.is_none() {
            continue;
        }
        let c1 = c1.clone();
        let c2 = c2.clone();
        out = out.with_table(q, move |pts: &[YPoint]| {
            let mut acc = T::zero();
            if let Some(t) = &t1_scaled {
                acc = acc + c1.clone() * t(pts);
            }
            if let Some(t) = &t2_scaled {
                acc = acc + c2.clone() * t(pts);
            }
            for (w, t1, t2, m, n, kappa) in &terms {
                acc = acc + w.clone() * contracted_eval(t1, t2, *m, *n, kappa, pts);
            }
            acc
        });
    }
    Ok(out)
}

pub fn factorial_u64(n: u64) -> u64 {
    (2..=n).product::<u64>().max(1)
}

/// The lift `𝓡_{i_1,…,i_n} g`: a function on `X^{i_1+⋯+i_n}` equal to g at
/// the block-representative coordinates times the product of
/// block-equality indicators, vanishing off the canonical block diagonal.
pub fn r_lift(g: PointFn, powers: &[u32]) -> PointFn {
    let powers: Vec<u32> = powers.to_vec();
    assert!(powers.iter().all(|&p| p >= 1));
    Arc::new(move |xs: &[&Point]| {
        let total: u32 = powers.iter().sum();
        assert_eq!(xs.len(), total as usize, "r_lift arity mismatch");
        let mut reps: Vec<&Point> = Vec::with_capacity(powers.len());
        let mut offset = 0usize;
        for &p in &powers {
            let rep = xs[offset];
            for k in 1..p as usize {
                if xs[offset + k] != rep {
                    return 0.0;
                }
            }
            reps.push(rep);
            offset += p as usize;
        }
        g(&reps)
    })
}

/// A test function on X for Wick pairings; products arising in the
/// recursion are represented structurally.
#[derive(Clone)]
pub enum TestFn {
    Base(Arc<dyn Fn(&Point) -> f64 + Send + Sync>),
    Product(Box<TestFn>, Box<TestFn>),
}

impl TestFn {
    pub fn indicator(window: crate::measures::Window) -> Self {
        TestFn::Base(Arc::new(move |p| if window.contains(p) { 1.0 } else { 0.0 }))
    }

    pub fn from_fn<F: Fn(&Point) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        TestFn::Base(Arc::new(f))
    }

    pub fn eval(&self, p: &Point) -> f64 {
        match self {
            TestFn::Base(f) => f(p),
            TestFn::Product(a, b) => a.eval(p) * b.eval(p),
        }
    }
}

fn dual_pairing(omega: &DiscreteMeasure, phi: &TestFn) -> f64 {
    omega.atoms().iter().map(|a| a.s * phi.eval(&a.x)).sum()
}

/// Wick polynomial pairing `⟨:ω^{⊗n}:, φ_1 ⊗ ⋯ ⊗ φ_n⟩` by the recursion
///
/// ⟨:ω:, φ⟩ = ⟨ω, φ⟩,
/// ⟨:ω^{⊗n}:, ⊗φ⟩ = n^{-2} [ Σ_i ⟨ω, φ_i⟩⟨:ω^{⊗(n-1)}:, ⊗_{k≠i} φ_k⟩
///   − 2 Σ_{i<j} ⟨:ω^{⊗(n-1)}:, φ_1 ⊗ ⋯ ⊗ (φ_j φ_i) ⊗ ⋯ ⊗ φ̌_j ⊗ ⋯⟩ ],
///
/// with the merged product (φ_j φ_i) standing at slot i and slot j
/// removed. On unit-weight configurations this reproduces the
/// off-diagonal sum `(1/n!) Σ_{distinct tuples} ∏ φ_j(x_{k_j})` exactly;
/// its native domain is products of indicator-type test functions.
pub fn wick_pairing(omega: &DiscreteMeasure, phis: &[TestFn]) -> Result<f64> {
    let n = phis.len();
    if n == 0 || n > 6 {
        return Err(Error::Insufficient(format!("wick_pairing supports 1 ≤ n ≤ 6, got {n}")));
    }
    Ok(wick_recurse(omega, phis))
}

fn wick_recurse(omega: &DiscreteMeasure, phis: &[TestFn]) -> f64 {
    let n = phis.len();
    if n == 1 {
        return dual_pairing(omega, &phis[0]);
    }
    let mut first = 0.0;
    for i in 0..n {
        let mut rest: Vec<TestFn> = Vec::with_capacity(n - 1);
        rest.extend_from_slice(&phis[..i]);
        rest.extend_from_slice(&phis[i + 1..]);
        first += dual_pairing(omega, &phis[i]) * wick_recurse(omega, &rest);
    }
    let mut second = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let merged = TestFn::Product(Box::new(phis[j].clone()), Box::new(phis[i].clone()));
            let mut rest: Vec<TestFn> = Vec::with_capacity(n - 1);
            rest.extend_from_slice(&phis[..i]);
            rest.push(merged);
            rest.extend_from_slice(&phis[i + 1..j]);
            rest.extend_from_slice(&phis[j + 1..]);
            second += wick_recurse(omega, &rest);
        }
    }
    (first - 2.0 * second) / (n * n) as f64
}
