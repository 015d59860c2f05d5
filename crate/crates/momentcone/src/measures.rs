//! Core geometric and measure types: points of X = ℝ^d, compact windows,
//! finite discrete measures, their lift to marked configurations in
//! Y = X × ℝ₊, and the tensor-power / distinct-tuple pairings that the
//! moment engine is built on.
//!
//! Everything here is immutable after construction and safe to share
//! across threads.

use crate::combinatorics;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A point of the base space X = ℝ^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Geometry("point needs dimension ≥ 1".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Geometry("point coordinates must be finite".into()));
        }
        Ok(Point { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Convenience constructor for 1-d points.
pub fn pt1(x: f64) -> Point {
    Point { coords: vec![x] }
}

/// A compact axis-aligned box `∏ [lower_j, upper_j]` with positive volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Geometry("window bounds must share dimension ≥ 1".into()));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::Geometry(format!(
                    "window requires lower < upper componentwise, got [{l}, {u}]"
                )));
            }
        }
        Ok(Window { lower, upper })
    }

    /// The centered cube `[-l, l]^d`.
    pub fn centered_cube(l: f64, d: usize) -> Self {
        Window {
            lower: vec![-l; d],
            upper: vec![l; d],
        }
    }

    /// 1-d interval.
    pub fn interval(a: f64, b: f64) -> Self {
        Window { lower: vec![a], upper: vec![b] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .product()
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.coords.len() == self.lower.len()
            && p.coords
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(c, (l, u))| *l <= *c && *c <= *u)
    }

    /// Whether `other` lies inside `self`.
    pub fn contains_window(&self, other: &Window) -> bool {
        self.lower.len() == other.lower.len()
            && self
                .lower
                .iter()
                .zip(&other.lower)
                .all(|(s, o)| s <= o)
            && self
                .upper
                .iter()
                .zip(&other.upper)
                .all(|(s, o)| s >= o)
    }

    /// Split into `cells^d` congruent sub-boxes, ordered lexicographically
    /// by cell index.
    #[allow(clippy::needless_range_loop)]
    pub fn grid(&self, cells: usize) -> Vec<Window> {
        assert!(cells >= 1);
        let d = self.dim();
        let mut out = Vec::new();
        let mut idx = vec![0usize; d];
        loop {
            let mut lo = Vec::with_capacity(d);
            let mut hi = Vec::with_capacity(d);
            for j in 0..d {
                let step = (self.upper[j] - self.lower[j]) / cells as f64;
                lo.push(self.lower[j] + idx[j] as f64 * step);
                hi.push(self.lower[j] + (idx[j] + 1) as f64 * step);
            }
            out.push(Window { lower: lo, upper: hi });
            let mut j = 0;
            loop {
                idx[j] += 1;
                if idx[j] < cells {
                    break;
                }
                idx[j] = 0;
                j += 1;
                if j == d {
                    return out;
                }
            }
        }
    }
}

/// One atom `s·δ_x` with strictly positive weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedAtom {
    pub x: Point,
    pub s: f64,
}

/// A point of the lifted space Y = X × ℝ₊.
#[derive(Debug, Clone, PartialEq)]
pub struct YPoint {
    pub x: Point,
    pub s: f64,
}

/// A finite discrete measure `η = Σ s_i δ_{x_i}` with pairwise-distinct
/// atom locations. Under the lift `𝓔η = Σ δ_{(x_i, s_i)}` it doubles as a
/// pinpointing configuration in Y = X × ℝ₊.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<WeightedAtom>,
}

impl DiscreteMeasure {
    /// Validating constructor: weights strictly positive and finite, atom
    /// locations pairwise distinct under exact comparison.
    pub fn new(atoms: Vec<WeightedAtom>) -> Result<Self> {
        for a in &atoms {
            if !(a.s > 0.0 && a.s.is_finite()) {
                return Err(Error::Geometry(format!("atom weight must be > 0, got {}", a.s)));
            }
            if a.x.coords.iter().any(|c| !c.is_finite()) {
                return Err(Error::Geometry("atom location must be finite".into()));
            }
        }
        for i in 0..atoms.len() {
            for j in (i + 1)..atoms.len() {
                if atoms[i].x == atoms[j].x {
                    return Err(Error::Geometry(format!(
                        "atom locations must be pairwise distinct (atoms {i} and {j} coincide)"
                    )));
                }
            }
        }
        Ok(DiscreteMeasure { atoms })
    }

    /// Constructor for samplers drawing from continuous distributions:
    /// collisions have probability zero and are only checked in debug
    /// builds.
    pub fn from_sampler(atoms: Vec<WeightedAtom>) -> Self {
        debug_assert!(
            {
                let mut ok = true;
                'outer: for i in 0..atoms.len() {
                    for j in (i + 1)..atoms.len() {
                        if atoms[i].x == atoms[j].x {
                            ok = false;
                            break 'outer;
                        }
                    }
                }
                ok
            },
            "sampler produced coinciding atom locations"
        );
        DiscreteMeasure { atoms }
    }

    pub fn empty() -> Self {
        DiscreteMeasure { atoms: Vec::new() }
    }

    pub fn atoms(&self) -> &[WeightedAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// The lift 𝓔η: the atoms as points of Y = X × ℝ₊.
    pub fn lifted(&self) -> Vec<YPoint> {
        self.atoms
            .iter()
            .map(|a| YPoint { x: a.x.clone(), s: a.s })
            .collect()
    }

    /// Local mass `𝔐_Λ(𝓔η) = Σ χ_Λ(x_i) s_i`.
    pub fn local_mass(&self, window: &Window) -> f64 {
        self.atoms
            .iter()
            .filter(|a| window.contains(&a.x))
            .map(|a| a.s)
            .sum()
    }

    /// Tensor-power pairing `⟨η^{⊗n}, f⟩`: the sum over ALL ordered
    /// n-tuples of atoms (repeats allowed) of `f(x_1,…,x_n)·s_1⋯s_n`.
    pub fn tensor_pairing<F>(&self, f: F, n: usize) -> Result<f64>
    where
        F: Fn(&[&Point]) -> f64,
    {
        assert!(n >= 1, "tensor_pairing requires n ≥ 1");
        let m = self.atoms.len();
        if m == 0 {
            return Ok(0.0);
        }
        let mut idx = vec![0usize; n];
        let mut total = 0.0;
        loop {
            let pts: Vec<&Point> = idx.iter().map(|&i| &self.atoms[i].x).collect();
            let val = f(&pts);
            if !val.is_finite() {
                return Err(Error::Numerical("test function returned non-finite value".into()));
            }
            let w: f64 = idx.iter().map(|&i| self.atoms[i].s).product();
            total += val * w;
            let mut j = 0;
            loop {
                idx[j] += 1;
                if idx[j] < m {
                    break;
                }
                idx[j] = 0;
                j += 1;
                if j == n {
                    return Ok(total);
                }
            }
        }
    }

    /// Sum over ordered n-tuples of pairwise-distinct atoms with locations
    /// in `delta` of `∏_j s_j^{i_j}`. This is the single-sample integrand
    /// whose expectation over the law of η is the diagonally-restricted
    /// moment `M_{i_1,…,i_n}(Δ)`.
    pub fn distinct_tuple_sum(&self, delta: &OffDiagonalBox, powers: &[u32]) -> f64 {
        assert_eq!(powers.len(), delta.order(), "powers must match the order of Δ");
        assert!(powers.iter().all(|&p| p >= 1), "powers must be ≥ 1");
        if delta.is_equal_boxes() && delta.exclusion_radius == 0.0 {
            self.distinct_tuple_sum_power_sums(&delta.boxes[0], powers)
        } else {
            self.distinct_tuple_sum_direct(delta, powers)
        }
    }

    /// Direct enumeration over ordered tuples of distinct atoms.
    fn distinct_tuple_sum_direct(&self, delta: &OffDiagonalBox, powers: &[u32]) -> f64 {
        let n = powers.len();
        // Candidate atoms per coordinate slot.
        let candidates: Vec<Vec<usize>> = delta
            .boxes
            .iter()
            .map(|b| {
                (0..self.atoms.len())
                    .filter(|&i| b.contains(&self.atoms[i].x))
                    .collect()
            })
            .collect();
        let mut chosen = vec![usize::MAX; n];
        let mut used = vec![false; self.atoms.len()];
        let mut total = 0.0;
        self.dts_recurse(0, n, delta, powers, &candidates, &mut chosen, &mut used, 1.0, &mut total);
        total
    }

    #[allow(clippy::too_many_arguments)]
    fn dts_recurse(
        &self,
        slot: usize,
        n: usize,
        delta: &OffDiagonalBox,
        powers: &[u32],
        candidates: &[Vec<usize>],
        chosen: &mut [usize],
        used: &mut [bool],
        acc: f64,
        total: &mut f64,
    ) {
        if slot == n {
            *total += acc;
            return;
        }
        'cand: for &i in &candidates[slot] {
            if used[i] {
                continue;
            }
            if delta.exclusion_radius > 0.0 {
                for &j in chosen[..slot].iter() {
                    if self.atoms[i].x.dist(&self.atoms[j].x) <= delta.exclusion_radius {
                        continue 'cand;
                    }
                }
            }
            used[i] = true;
            chosen[slot] = i;
            let w = self.atoms[i].s.powi(powers[slot] as i32);
            self.dts_recurse(slot + 1, n, delta, powers, candidates, chosen, used, acc * w, total);
            used[i] = false;
        }
    }

    /// Fast path for `Δ = Λ^{(n)}_0̂` (all boxes equal, no exclusion
    /// radius): the Möbius expansion over set partitions expresses the
    /// ordered distinct-tuple sum through power sums of the atoms in Λ,
    ///   Σ_π ∏_{B∈π} (-1)^{|B|-1} (|B|-1)! · p_{Σ_{j∈B} i_j},
    /// which is O(Bell(n)·n + #atoms) instead of O(#atoms^n).
    fn distinct_tuple_sum_power_sums(&self, window: &Window, powers: &[u32]) -> f64 {
        let n = powers.len();
        let max_pow: u32 = powers.iter().sum();
        // power sums p_m = Σ_{x_i ∈ Λ} s_i^m for m = 1..max_pow
        let mut p = vec![0.0f64; max_pow as usize + 1];
        for a in &self.atoms {
            if window.contains(&a.x) {
                let mut sp = 1.0;
                for pm in p.iter_mut().skip(1) {
                    sp *= a.s;
                    *pm += sp;
                }
            }
        }
        let mut total = 0.0;
        for part in combinatorics::enumerate_partitions(n).expect("n ≤ 12") {
            let mut term = 1.0;
            for block in part.blocks() {
                let m: u32 = block.iter().map(|&j| powers[j]).sum();
                let sign = if block.len() % 2 == 1 { 1.0 } else { -1.0 };
                let fact: f64 = (1..block.len()).map(|k| k as f64).product();
                term *= sign * fact * p[m as usize];
            }
            total += term;
        }
        total
    }
}

/// A compact subset `Δ ⊂ X^{(n)}_0̂` of off-diagonal n-tuples: tuples
/// `(x_1,…,x_n)` with `x_j ∈ boxes[j]` and pairwise distances strictly
/// greater than `exclusion_radius`. Radius 0 is the mathematically exact
/// off-diagonal set; a positive radius exists for sensitivity analysis of
/// empirical estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffDiagonalBox {
    pub boxes: Vec<Window>,
    pub exclusion_radius: f64,
}

impl OffDiagonalBox {
    pub fn new(boxes: Vec<Window>, exclusion_radius: f64) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::Geometry("off-diagonal set needs order ≥ 1".into()));
        }
        let d = boxes[0].dim();
        if boxes.iter().any(|b| b.dim() != d) {
            return Err(Error::Geometry("all boxes must share the dimension".into()));
        }
        if !(exclusion_radius >= 0.0 && exclusion_radius.is_finite()) {
            return Err(Error::Geometry("exclusion radius must be ≥ 0".into()));
        }
        Ok(OffDiagonalBox { boxes, exclusion_radius })
    }

    /// `Λ^{(n)}_0̂`: n copies of the same window, no exclusion radius.
    pub fn power(window: &Window, n: usize) -> Self {
        OffDiagonalBox {
            boxes: vec![window.clone(); n],
            exclusion_radius: 0.0,
        }
    }

    pub fn order(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_equal_boxes(&self) -> bool {
        self.boxes.iter().all(|b| *b == self.boxes[0])
    }

    /// Product Lebesgue volume `∏ vol(boxes_j)`; the diagonals are null,
    /// so for radius 0 this is the exact volume of Δ.
    pub fn product_volume(&self) -> f64 {
        self.boxes.iter().map(|b| b.volume()).product()
    }

    pub fn contains_tuple(&self, pts: &[&Point]) -> bool {
        if pts.len() != self.boxes.len() {
            return false;
        }
        for (p, b) in pts.iter().zip(&self.boxes) {
            if !b.contains(p) {
                return false;
            }
        }
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if pts[i].dist(pts[j]) <= self.exclusion_radius {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn measure(pairs: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(
            pairs
                .iter()
                .map(|&(x, s)| WeightedAtom { x: pt1(x), s })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn tensor_pairing_examples() {
        let eta = measure(&[(0.0, 1.0)]);
        assert_relative_eq!(eta.tensor_pairing(|_| 1.0, 2).unwrap(), 1.0);

        let eta = measure(&[(0.0, 2.0), (1.0, 3.0)]);
        assert_relative_eq!(eta.tensor_pairing(|_| 1.0, 1).unwrap(), 5.0);
        // brute force over the 4 ordered pairs = (2+3)^2
        assert_relative_eq!(eta.tensor_pairing(|_| 1.0, 2).unwrap(), 25.0);
    }

    #[test]
    fn local_mass_examples() {
        let w = Window::interval(0.0, 1.0);
        assert_relative_eq!(DiscreteMeasure::empty().local_mass(&w), 0.0);
        assert_relative_eq!(measure(&[(0.5, 2.0), (5.0, 7.0)]).local_mass(&w), 2.0);
        assert_relative_eq!(measure(&[(0.5, 2.0), (0.7, 3.0)]).local_mass(&w), 5.0);
    }

    #[test]
    fn local_mass_additive_over_disjoint_windows() {
        let eta = measure(&[(0.1, 1.5), (0.6, 2.5), (0.9, 0.25), (1.4, 4.0)]);
        let a = Window::interval(0.0, 0.5);
        let b = Window::interval(0.55, 1.0);
        let both = eta.local_mass(&a) + eta.local_mass(&b);
        assert_relative_eq!(both, 1.5 + 2.5 + 0.25);
    }

    #[test]
    fn distinct_tuple_sum_examples() {
        let delta = OffDiagonalBox::power(&Window::interval(-1.0, 2.0), 2);
        // single atom: no distinct pair exists
        assert_relative_eq!(measure(&[(0.0, 2.0)]).distinct_tuple_sum(&delta, &[1, 1]), 0.0);
        let eta = measure(&[(0.0, 2.0), (1.0, 3.0)]);
        // ordered pairs: 2·3 + 3·2
        assert_relative_eq!(eta.distinct_tuple_sum(&delta, &[1, 1]), 12.0);
        // 2²·3 + 3²·2
        assert_relative_eq!(eta.distinct_tuple_sum(&delta, &[2, 1]), 30.0);
    }

    #[test]
    fn partition_decomposition_reconstructs_tensor_power() {
        // m^{(n)} = Σ_π m^{(n)}_π: the full pairing with f ≡ 1 decomposes
        // into distinct-tuple sums with powers given by block sizes.
        let eta = measure(&[(0.0, 0.5), (0.3, 2.0), (0.7, 1.25), (1.1, 3.0), (-0.4, 0.75)]);
        let window = Window::interval(-1.0, 2.0);
        for n in 1..=3usize {
            let full = eta.tensor_pairing(|_| 1.0, n).unwrap();
            let mut by_partitions = 0.0;
            for part in crate::combinatorics::enumerate_partitions(n).unwrap() {
                let powers: Vec<u32> = part.blocks().iter().map(|b| b.len() as u32).collect();
                let delta = OffDiagonalBox::power(&window, powers.len());
                by_partitions += eta.distinct_tuple_sum(&delta, &powers);
            }
            assert_relative_eq!(full, by_partitions, max_relative = 1e-12);
        }
    }

    #[test]
    fn construction_rejects_bad_atoms() {
        assert!(DiscreteMeasure::new(vec![WeightedAtom { x: pt1(0.0), s: 0.0 }]).is_err());
        assert!(DiscreteMeasure::new(vec![WeightedAtom { x: pt1(0.0), s: -1.0 }]).is_err());
        assert!(DiscreteMeasure::new(vec![
            WeightedAtom { x: pt1(0.0), s: 1.0 },
            WeightedAtom { x: pt1(0.0), s: 2.0 },
        ])
        .is_err());
    }

    #[test]
    fn exclusion_radius_prunes_close_pairs() {
        let eta = measure(&[(0.0, 2.0), (0.05, 3.0), (1.0, 5.0)]);
        let d0 = OffDiagonalBox::new(vec![Window::interval(-1.0, 2.0); 2], 0.0).unwrap();
        let d01 = OffDiagonalBox::new(vec![Window::interval(-1.0, 2.0); 2], 0.1).unwrap();
        assert_relative_eq!(eta.distinct_tuple_sum(&d0, &[1, 1]), 2.0 * (6.0 + 10.0 + 15.0));
        // the (0.0, 0.05) pair drops out
        assert_relative_eq!(eta.distinct_tuple_sum(&d01, &[1, 1]), 2.0 * (10.0 + 15.0));
    }

    #[test]
    fn serde_wire_format() {
        let eta = measure(&[(0.5, 2.0)]);
        let js = serde_json::to_string(&eta).unwrap();
        assert_eq!(js, r#"{"atoms":[{"x":[0.5],"s":2.0}]}"#);
        let w = Window::interval(0.0, 1.0);
        assert_eq!(serde_json::to_string(&w).unwrap(), r#"{"lower":[0.0],"upper":[1.0]}"#);
        let back: DiscreteMeasure = serde_json::from_str(&js).unwrap();
        assert_eq!(back, eta);
    }

    proptest! {
        #[test]
        fn tensor_pairing_of_one_is_mass_power(
            weights in proptest::collection::vec(0.01f64..5.0, 1..6),
            n in 1usize..5,
        ) {
            let atoms: Vec<WeightedAtom> = weights.iter().enumerate()
                .map(|(i, &s)| WeightedAtom { x: pt1(i as f64), s })
                .collect();
            let eta = DiscreteMeasure::new(atoms).unwrap();
            let mass: f64 = weights.iter().sum();
            let lhs = eta.tensor_pairing(|_| 1.0, n).unwrap();
            prop_assert!((lhs - mass.powi(n as i32)).abs() <= 1e-9 * mass.powi(n as i32).abs());
        }

        #[test]
        fn power_sum_fast_path_matches_direct_enumeration(
            weights in proptest::collection::vec(0.05f64..4.0, 2..7),
            powers in proptest::collection::vec(1u32..4, 1..4),
        ) {
            let atoms: Vec<WeightedAtom> = weights.iter().enumerate()
                .map(|(i, &s)| WeightedAtom { x: pt1(i as f64 * 0.3), s })
                .collect();
            let eta = DiscreteMeasure::new(atoms).unwrap();
            let window = Window::interval(-1.0, 3.0);
            let delta = OffDiagonalBox::power(&window, powers.len());
            let fast = eta.distinct_tuple_sum(&delta, &powers);
            let direct = eta.distinct_tuple_sum_direct(&delta, &powers);
            prop_assert!((fast - direct).abs() <= 1e-9 * direct.abs().max(1.0));
        }
    }
}
