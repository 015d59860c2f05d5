//! The moment engine: diagonally-restricted moments `M_{i_1,…,i_k}(Δ)`
//! from analytic models or Monte Carlo samples, the derived sequences
//! `ξ^Δ_𝐢 = M_{𝐢+1}(Δ)/n!`, full moments `M^{(n)}(Λ^n)`, and the growth
//! constants of the a-priori bounds.
//!
//! Empirical estimation parallelizes over samples; reductions use
//! pairwise summation in a fixed order so results are reproducible
//! regardless of thread count.

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, OffDiagonalBox, Window};
use crate::models::{analytic_full_moment, analytic_moment, MeasureModel};
use crate::special::{mean_and_jackknife_se, pairwise_sum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Default cap on the total degree of requested moment tables.
pub const DEFAULT_DEGREE_CAP: u32 = 10;
/// Hard cap; Hankel matrices beyond this are numerically meaningless in
/// double precision for factorial-growth sequences.
pub const MAX_DEGREE_CAP: u32 = 16;

/// A moment value together with its statistical error (0 for analytic
/// sources).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentValue {
    pub value: f64,
    pub stderr: f64,
}

impl MomentValue {
    pub fn exact(value: f64) -> Self {
        MomentValue { value, stderr: 0.0 }
    }
}

/// The single interface all verdicts consume: either a model with closed
/// forms or a bag of samples sharing one generating window.
#[derive(Clone)]
pub enum MomentSource {
    Analytic { model: MeasureModel },
    Empirical { samples: Arc<Vec<DiscreteMeasure>>, window: Window },
}

impl MomentSource {
    pub fn analytic(model: MeasureModel) -> Self {
        MomentSource::Analytic { model }
    }

    pub fn empirical(samples: Vec<DiscreteMeasure>, window: Window) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Insufficient("empirical source needs ≥ 1 sample".into()));
        }
        Ok(MomentSource::Empirical { samples: Arc::new(samples), window })
    }

    pub fn is_empirical(&self) -> bool {
        matches!(self, MomentSource::Empirical { .. })
    }

    pub fn sample_count(&self) -> usize {
        match self {
            MomentSource::Analytic { .. } => 0,
            MomentSource::Empirical { samples, .. } => samples.len(),
        }
    }

    /// `M_{i_1,…,i_n}(Δ)`. Analytic sources delegate to the closed forms;
    /// empirical sources average the per-sample ordered distinct-tuple
    /// sums and attach a delete-1 jackknife standard error.
    pub fn moment(&self, powers: &[u32], delta: &OffDiagonalBox) -> Result<MomentValue> {
        match self {
            MomentSource::Analytic { model } => {
                Ok(MomentValue::exact(analytic_moment(model, powers, delta)?))
            }
            MomentSource::Empirical { samples, window } => {
                for b in &delta.boxes {
                    if !window.contains_window(b) {
                        return Err(Error::Insufficient(
                            "Δ must lie inside the sampled window".into(),
                        ));
                    }
                }
                let vals: Vec<f64> = samples
                    .par_iter()
                    .map(|eta| eta.distinct_tuple_sum(delta, powers))
                    .collect();
                let (value, stderr) = mean_and_jackknife_se(&vals);
                Ok(MomentValue { value, stderr })
            }
        }
    }

    /// Full moment `M^{(n)}(Λ^n) = E[η(Λ)^n]`; n = 0 gives 1 exactly.
    pub fn full_moment(&self, n: usize, window: &Window) -> Result<MomentValue> {
        if n == 0 {
            return Ok(MomentValue::exact(1.0));
        }
        if n > 8 {
            return Err(Error::Insufficient("full moments support n ≤ 8".into()));
        }
        match self {
            MomentSource::Analytic { model } => {
                Ok(MomentValue::exact(analytic_full_moment(model, n, window)?))
            }
            MomentSource::Empirical { samples, .. } => {
                let vals: Vec<f64> = samples
                    .par_iter()
                    .map(|eta| eta.local_mass(window).powi(n as i32))
                    .collect();
                let (value, stderr) = mean_and_jackknife_se(&vals);
                Ok(MomentValue { value, stderr })
            }
        }
    }

    /// Per-sample values of the distinct-tuple statistic, for callers that
    /// need custom resampling.
    pub fn per_sample_distinct_tuple(&self, powers: &[u32], delta: &OffDiagonalBox) -> Result<Vec<f64>> {
        match self {
            MomentSource::Analytic { .. } => Err(Error::Insufficient(
                "per-sample statistics require an empirical source".into(),
            )),
            MomentSource::Empirical { samples, .. } => Ok(samples
                .par_iter()
                .map(|eta| eta.distinct_tuple_sum(delta, powers))
                .collect()),
        }
    }
}

/// The numbers `ξ^Δ_{i_1,…,i_n} = M_{i_1+1,…,i_n+1}(Δ)/n!` for all
/// multi-indices of total degree at most `max_total_degree`, with the
/// window / off-diagonal-set metadata retained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiIndexSequence {
    pub n: usize,
    pub delta: OffDiagonalBox,
    pub max_total_degree: u32,
    pub values: BTreeMap<Vec<u32>, MomentValue>,
}

impl MultiIndexSequence {
    pub fn get(&self, index: &[u32]) -> Option<MomentValue> {
        self.values.get(index).copied()
    }

    /// The 1-d section `r_i = ξ^Δ_{i,0,…,0}`, as far as populated.
    pub fn principal_section(&self) -> Vec<MomentValue> {
        let mut out = Vec::new();
        for i in 0..=self.max_total_degree {
            let mut idx = vec![0u32; self.n];
            idx[0] = i;
            match self.values.get(&idx) {
                Some(v) => out.push(*v),
                None => break,
            }
        }
        out
    }

    /// Exact (analytic) or noise-tolerant symmetry check under
    /// simultaneous permutation of the index entries; only meaningful for
    /// permutation-symmetric Δ.
    pub fn max_symmetry_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (idx, v) in &self.values {
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            if let Some(w) = self.values.get(&sorted) {
                let scale = v.value.abs().max(w.value.abs()).max(1e-300);
                worst = worst.max((v.value - w.value).abs() / scale);
            }
        }
        worst
    }
}

fn multi_indices(n: usize, max_total: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn recurse(slot: usize, remaining: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slot == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=remaining {
            cur[slot] = v;
            recurse(slot + 1, remaining - v, cur, out);
        }
        cur[slot] = 0;
    }
    recurse(0, max_total, &mut cur, &mut out);
    out
}

/// Compute the ξ-sequence of a source on Δ up to a total degree.
pub fn xi_sequence(
    source: &MomentSource,
    delta: &OffDiagonalBox,
    max_total_degree: u32,
) -> Result<MultiIndexSequence> {
    if max_total_degree > MAX_DEGREE_CAP {
        return Err(Error::Insufficient(format!(
            "degree cap is {MAX_DEGREE_CAP}, got {max_total_degree}"
        )));
    }
    let n = delta.order();
    let nf: f64 = (1..=n as u64).map(|k| k as f64).product();
    let mut values = BTreeMap::new();
    for idx in multi_indices(n, max_total_degree) {
        let powers: Vec<u32> = idx.iter().map(|&i| i + 1).collect();
        let m = source.moment(&powers, delta)?;
        values.insert(
            idx,
            MomentValue { value: m.value / nf, stderr: m.stderr / nf },
        );
    }
    Ok(MultiIndexSequence {
        n,
        delta: delta.clone(),
        max_total_degree,
        values,
    })
}

/// Growth constants of the a-priori bounds, per window of a ladder:
/// `C_Λ = max_n (M^{(n)}(Λ^n)/n!)^{1/n}` and the off-diagonal analogue
/// `C'_Λ`, with shrink-trend flags along the ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthReport {
    pub max_order: usize,
    pub windows: Vec<WindowGrowth>,
    /// whether C'_Λ keeps decreasing along the (shrinking) ladder
    pub c_prime_shrinks: bool,
    /// whether C_Λ does — for the gamma measure it must NOT
    pub c_shrinks: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowGrowth {
    pub window: Window,
    pub c: f64,
    pub c_prime: f64,
}

pub fn growth_constants(
    source: &MomentSource,
    ladder: &[Window],
    max_order: usize,
) -> Result<GrowthReport> {
    if ladder.is_empty() {
        return Err(Error::Insufficient("growth constants need a nonempty ladder".into()));
    }
    let max_order = max_order.clamp(1, 8);
    let mut windows = Vec::with_capacity(ladder.len());
    for w in ladder {
        let mut c = 0.0f64;
        let mut c_prime = 0.0f64;
        for n in 1..=max_order {
            let nf: f64 = (1..=n as u64).map(|k| k as f64).product();
            let full = source.full_moment(n, w)?.value;
            c = c.max((full.max(0.0) / nf).powf(1.0 / n as f64));
            let off = source
                .moment(&vec![1u32; n], &OffDiagonalBox::power(w, n))?
                .value;
            c_prime = c_prime.max((off.max(0.0) / nf).powf(1.0 / n as f64));
        }
        windows.push(WindowGrowth { window: w.clone(), c, c_prime });
    }
    let shrinks = |vals: &[f64]| -> bool {
        if vals.len() < 2 {
            return false;
        }
        // trend flag: geometric decay over the last rungs rather than a
        // plateau (ratios bounded away from 1)
        let ratios: Vec<f64> = vals
            .windows(2)
            .map(|p| if p[0] > 0.0 { p[1] / p[0] } else { 0.0 })
            .collect();
        let tail = &ratios[ratios.len().saturating_sub(2)..];
        tail.iter().sum::<f64>() / tail.len() as f64 <= 0.75
    };
    let cs: Vec<f64> = windows.iter().map(|w| w.c).collect();
    let cps: Vec<f64> = windows.iter().map(|w| w.c_prime).collect();
    Ok(GrowthReport {
        max_order,
        c_prime_shrinks: shrinks(&cps),
        c_shrinks: shrinks(&cs),
        windows,
    })
}

/// A CSV row of a moment table: `n,powers,delta_id,value,stderr` with the
/// powers `;`-joined.
pub fn csv_rows(seq: &MultiIndexSequence, delta_id: &str) -> Vec<String> {
    let mut rows = Vec::with_capacity(seq.values.len());
    for (idx, v) in &seq.values {
        let powers: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
        rows.push(format!(
            "{},{},{},{},{}",
            seq.n,
            powers.join(";"),
            delta_id,
            v.value,
            v.stderr
        ));
    }
    rows
}

/// Pairwise-summed mean of per-sample values (deterministic reduction).
pub fn deterministic_mean(vals: &[f64]) -> f64 {
    if vals.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(vals) / vals.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{pt1, WeightedAtom};
    use crate::models::{FixedAtom, WeightLaw};
    use approx::assert_relative_eq;

    fn unit_window() -> Window {
        Window::interval(0.0, 1.0)
    }

    fn gamma_source() -> MomentSource {
        MomentSource::analytic(MeasureModel::Gamma { rate: 1.0 })
    }

    #[test]
    fn analytic_gamma_moment_examples() {
        let w = unit_window();
        let src = gamma_source();
        // powers (1), Δ = volume-1 window → 1
        let d1 = OffDiagonalBox::power(&w, 1);
        assert_relative_eq!(src.moment(&[1], &d1).unwrap().value, 1.0);
        // full moment M^{(2)}(Λ²) = 2 via the partition sum
        assert_relative_eq!(src.full_moment(2, &w).unwrap().value, 2.0);
        // M^{(3)} = 6
        assert_relative_eq!(src.full_moment(3, &w).unwrap().value, 6.0);
        // n = 0 → 1 exactly for any source
        assert_relative_eq!(src.full_moment(0, &w).unwrap().value, 1.0);
    }

    #[test]
    fn estimator_is_exact_on_fixed_atoms() {
        // deterministic η: zero variance, estimator equals the exact value
        let model = MeasureModel::FixedAtoms {
            atoms: vec![
                FixedAtom { x: pt1(0.2), law: WeightLaw::Deterministic { value: 2.0 } },
                FixedAtom { x: pt1(0.7), law: WeightLaw::Deterministic { value: 3.0 } },
            ],
        };
        let w = unit_window();
        let samples: Vec<DiscreteMeasure> = (0..16)
            .map(|i| crate::models::sample(&model, &w, 1, i, 1e-6).unwrap())
            .collect();
        let emp = MomentSource::empirical(samples, w.clone()).unwrap();
        let ana = MomentSource::analytic(model);
        let d2 = OffDiagonalBox::power(&w, 2);
        let e = emp.moment(&[2, 1], &d2).unwrap();
        let a = ana.moment(&[2, 1], &d2).unwrap();
        assert_relative_eq!(e.value, a.value, max_relative = 1e-12);
        assert_relative_eq!(e.value, 4.0 * 3.0 + 9.0 * 2.0);
        assert_relative_eq!(e.stderr, 0.0);
    }

    #[test]
    fn xi_sequence_examples() {
        let w = unit_window();
        // gamma: ξ^Δ_i = M_{i+1}(Δ)/1! = Γ(i+1) = i!
        let seq = xi_sequence(&gamma_source(), &OffDiagonalBox::power(&w, 1), 6).unwrap();
        for i in 0u32..=6 {
            let fact: f64 = (1..=i as u64).map(|k| k as f64).product();
            assert_relative_eq!(seq.get(&[i]).unwrap().value, fact, max_relative = 1e-12);
        }
        // diffuse: ξ^Δ_0 = vol, ξ^Δ_i = 0 for i ≥ 1
        let diff = MomentSource::analytic(MeasureModel::DeterministicDiffuse { density: 1.0 });
        let seq = xi_sequence(&diff, &OffDiagonalBox::power(&w, 1), 4).unwrap();
        assert_relative_eq!(seq.get(&[0]).unwrap().value, 1.0);
        for i in 1u32..=4 {
            assert_relative_eq!(seq.get(&[i]).unwrap().value, 0.0);
        }
        // unit-weight point process: ξ^Δ constant in the multi-index
        let pp = MomentSource::analytic(MeasureModel::PoissonPp { rate: 1.5 });
        let seq = xi_sequence(&pp, &OffDiagonalBox::power(&w, 2), 4).unwrap();
        let base = seq.get(&[0, 0]).unwrap().value;
        for v in seq.values.values() {
            assert_relative_eq!(v.value, base, max_relative = 1e-12);
        }
        assert!(seq.max_symmetry_violation() < 1e-12);
    }

    #[test]
    fn poisson_moments_are_flat_in_the_powers() {
        // PoissonPP rate 1, powers (2,1) vs (1,1) on Λ²_0̂ with vol 1:
        // M_{2,1}(Δ) = M_{1,1}(Δ) = 1
        let pp = MomentSource::analytic(MeasureModel::PoissonPp { rate: 1.0 });
        let d2 = OffDiagonalBox::power(&unit_window(), 2);
        assert_relative_eq!(pp.moment(&[2, 1], &d2).unwrap().value, 1.0);
        assert_relative_eq!(pp.moment(&[1, 1], &d2).unwrap().value, 1.0);
    }

    #[test]
    fn partition_sum_identity_on_empirical_samples() {
        // full_moment(n, Λ) = Σ over partitions of distinct-tuple moments,
        // exactly, for a fixed 5-atom deterministic sample.
        let atoms = vec![
            WeightedAtom { x: pt1(0.1), s: 0.5 },
            WeightedAtom { x: pt1(0.3), s: 2.0 },
            WeightedAtom { x: pt1(0.5), s: 1.25 },
            WeightedAtom { x: pt1(0.7), s: 3.0 },
            WeightedAtom { x: pt1(0.9), s: 0.8 },
        ];
        let eta = DiscreteMeasure::new(atoms).unwrap();
        let w = unit_window();
        let src = MomentSource::empirical(vec![eta], w.clone()).unwrap();
        for n in 1..=3usize {
            let full = src.full_moment(n, &w).unwrap().value;
            let mut sum = 0.0;
            for part in crate::combinatorics::enumerate_partitions(n).unwrap() {
                let sizes = part.block_sizes();
                let delta = OffDiagonalBox::power(&w, sizes.len());
                sum += src.moment(&sizes, &delta).unwrap().value;
            }
            assert_relative_eq!(full, sum, max_relative = 1e-12);
        }
    }

    #[test]
    fn factorial_growth_bound_holds_for_analytic_gamma() {
        // (1/n!)·M_{i_1..i_n}(Λ^{(n)}_0̂) ≤ i_1!⋯i_n!·C_Λ^{Σ i_j}
        let w = unit_window();
        let src = gamma_source();
        let growth = growth_constants(&src, std::slice::from_ref(&w), 8).unwrap();
        let c = growth.windows[0].c;
        let fact = |k: u32| -> f64 { (1..=k as u64).map(|x| x as f64).product() };
        for idx in multi_indices(3, 8) {
            let powers: Vec<u32> = idx.iter().map(|&i| i + 1).collect();
            let total: u32 = powers.iter().sum();
            if total > 8 {
                continue;
            }
            let n = powers.len();
            let nf: f64 = (1..=n as u64).map(|k| k as f64).product();
            let m = src
                .moment(&powers, &OffDiagonalBox::power(&w, n))
                .unwrap()
                .value;
            let bound: f64 =
                powers.iter().map(|&p| fact(p)).product::<f64>() * c.powi(total as i32);
            assert!(
                m / nf <= bound * (1.0 + 1e-9),
                "powers {powers:?}: {} > {}",
                m / nf,
                bound
            );
        }
    }

    #[test]
    fn growth_constants_for_gamma() {
        let src = gamma_source();
        // volume ≤ 1 windows: C_Λ ≤ 1
        let w = unit_window();
        let g = growth_constants(&src, &[w], 8).unwrap();
        assert!(g.windows[0].c <= 1.0 + 1e-12);
        // shrink ladder: C' decays ∝ vol, C does not decay to zero
        let shrink: Vec<Window> = (0..=4)
            .map(|j| Window::centered_cube(2.0_f64.powi(-j), 1))
            .collect();
        let g = growth_constants(&src, &shrink, 8).unwrap();
        assert!(g.c_prime_shrinks, "C' must shrink: {:?}", g.windows);
        assert!(!g.c_shrinks, "C must not shrink for gamma: {:?}", g.windows);
        // C' estimate ≈ v·max_n (1/n!)^{1/n} = v at n = 1
        for wg in &g.windows {
            let v = wg.window.volume();
            assert_relative_eq!(wg.c_prime, v, max_relative = 1e-9);
        }
    }

    #[test]
    fn gamma_off_diagonal_xi_masses_match_closed_form() {
        // ∫ s_1⋯s_n dρ^{(n)} = M_{1,…,1}(Λ^{(n)}_0̂)/n! = v^n/n! for the
        // gamma measure; Monte Carlo against the closed form, n ≤ 3.
        let w = unit_window();
        let model = MeasureModel::Gamma { rate: 1.0 };
        let samples: Vec<DiscreteMeasure> = (0..20_000)
            .map(|i| crate::models::sample(&model, &w, 19, i, 1e-6).unwrap())
            .collect();
        let src = MomentSource::empirical(samples, w.clone()).unwrap();
        for n in 1..=3usize {
            let nf: f64 = (1..=n as u64).map(|k| k as f64).product();
            let expect = 1.0 / nf;
            let m = src.moment(&vec![1u32; n], &OffDiagonalBox::power(&w, n)).unwrap();
            assert_relative_eq!(m.value / nf, expect, max_relative = 0.05);
        }
        // empirical ξ-sequences on symmetric Δ are symmetric in the index
        let seq = xi_sequence(&src, &OffDiagonalBox::power(&w, 2), 3).unwrap();
        assert!(seq.max_symmetry_violation() < 1e-12);
    }

    #[test]
    fn empirical_requires_delta_inside_window() {
        let w = unit_window();
        let eta = DiscreteMeasure::new(vec![WeightedAtom { x: pt1(0.5), s: 1.0 }]).unwrap();
        let src = MomentSource::empirical(vec![eta], w).unwrap();
        let outside = OffDiagonalBox::power(&Window::interval(0.0, 2.0), 1);
        assert!(src.moment(&[1], &outside).is_err());
    }

    #[test]
    fn degree_cap_is_enforced() {
        let w = unit_window();
        let res = xi_sequence(&gamma_source(), &OffDiagonalBox::power(&w, 1), 17);
        assert!(res.is_err());
    }

    #[test]
    fn csv_row_format() {
        let w = unit_window();
        let seq = xi_sequence(&gamma_source(), &OffDiagonalBox::power(&w, 1), 2).unwrap();
        let rows = csv_rows(&seq, "L1");
        assert_eq!(rows[0], "1,1,L1,1,0");
        assert!(rows.iter().all(|r| r.split(',').count() == 5));
    }
}
