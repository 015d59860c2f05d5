//! Recovery and verdict pipelines: reconstruction of the weight-marginal
//! measures ξ^{(n)}_Δ from moment sequences, assembly of the correlation
//! measure ρ^{(n)} of the lifted marked point process, the discreteness
//! verdict, the point-process verdict, the star-positivity and local-bound
//! property checks, and Wick-polynomial generalized correlation functions.

use crate::combinatorics::{k_transform_unchecked, star_product, wick_pairing, ConfigFunctional, TestFn};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, OffDiagonalBox, Point, Window, YPoint};
use crate::models::MeasureModel;
use crate::momentproblem::{
    atom_at_zero_series, multiindex_psd, quadrature_from_moments, DecisionTolerances,
    HankelReport, PsdReport, QuadratureMeasure, SeriesTrend, ZeroAtomFinding,
};
use crate::moments::{xi_sequence, GrowthReport, MomentSource, MomentValue, MAX_DEGREE_CAP};
use crate::special::mean_and_jackknife_se;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// An atomic estimate of the order-n correlation measure on
/// `V_n ⊂ (X × ℝ₊)^n`: weighted tuples with pairwise-distinct locations.
/// Integration applies the symmetrized evaluation of the integrand, since
/// ρ^{(n)} is a symmetric measure represented by unordered tuples.
#[derive(Debug, Clone)]
pub struct AtomicCorrelation {
    pub n: usize,
    pub tuples: Vec<(Vec<YPoint>, f64)>,
}

impl AtomicCorrelation {
    /// `∫ Sym f dρ̂` for an integrand given on ordered tuples.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[YPoint]) -> f64,
    {
        let mut total = 0.0;
        let mut perm_buf: Vec<YPoint> = Vec::with_capacity(self.n);
        for (tuple, w) in &self.tuples {
            total += w * sym_eval(&f, tuple, &mut perm_buf);
        }
        total
    }

    /// `∫ f dρ̂` for integrands already symmetric in their arguments
    /// (skips the permutation averaging).
    pub fn integrate_symmetric<F>(&self, f: F) -> f64
    where
        F: Fn(&[YPoint]) -> f64,
    {
        self.tuples.iter().map(|(tuple, w)| w * f(tuple)).sum()
    }

    /// ρ-mass of a product box `∏ (Λ_j × [a_j, b_j])`.
    pub fn box_mass(&self, boxes: &[(Window, f64, f64)]) -> f64 {
        self.integrate(|pts| indicator_product(pts, boxes))
    }

    /// `∫ χ_B · s_1⋯s_n dρ̂` — the ξ-pairing of a product box.
    pub fn xi_box_mass(&self, boxes: &[(Window, f64, f64)]) -> f64 {
        self.integrate(|pts| {
            indicator_product(pts, boxes) * pts.iter().map(|p| p.s).product::<f64>()
        })
    }
}

fn indicator_product(pts: &[YPoint], boxes: &[(Window, f64, f64)]) -> f64 {
    debug_assert_eq!(pts.len(), boxes.len());
    for (p, (w, a, b)) in pts.iter().zip(boxes) {
        if !w.contains(&p.x) || p.s < *a || p.s > *b {
            return 0.0;
        }
    }
    1.0
}

/// Average of `f` over all permutations of the tuple.
fn sym_eval<F>(f: &F, tuple: &[YPoint], buf: &mut Vec<YPoint>) -> f64
where
    F: Fn(&[YPoint]) -> f64,
{
    let n = tuple.len();
    if n <= 1 {
        return f(tuple);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    let mut count = 0.0;
    // Heap's algorithm
    let mut c = vec![0usize; n];
    loop {
        buf.clear();
        buf.extend(idx.iter().map(|&i| tuple[i].clone()));
        total += f(buf);
        count += 1.0;
        let mut i = 0;
        loop {
            if i >= n {
                return total / count;
            }
            if c[i] < i {
                if i % 2 == 0 {
                    idx.swap(0, i);
                } else {
                    idx.swap(c[i], i);
                }
                c[i] += 1;
                break;
            }
            c[i] = 0;
            i += 1;
        }
    }
}

/// Closed-form ρ-integrals for analytic sources via
/// `∫ χ_Δ ∏ s^{p_j} dρ^{(n)} = M_{p_1,…,p_n}(Δ)/n!` (powers ≥ 1).
#[derive(Debug, Clone)]
pub struct AnalyticCorrelation {
    pub model: MeasureModel,
    pub n: usize,
}

impl AnalyticCorrelation {
    pub fn integrate_monomial(&self, delta: &OffDiagonalBox, powers: &[u32]) -> Result<f64> {
        let nf: f64 = (1..=self.n as u64).map(|k| k as f64).product();
        Ok(crate::models::analytic_moment(&self.model, powers, delta)? / nf)
    }
}

/// First recovery step from truncated data: 1-d marginal measures
/// reconstructed by quadrature from the truncated sequences
/// `ξ^Δ_{0,…,i,…,0}`, plus (for empirical sources, n ≥ 2) the joint
/// atomic estimate of ξ^{(n)}_Δ read off the samples, with a consistency
/// check that its moments reproduce the ξ-sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XiRecovery {
    pub n: usize,
    pub marginals: Vec<QuadratureMeasure>,
    /// tuples (s_1..s_n, ξ-weight); present for empirical sources with n ≥ 2
    pub joint: Option<Vec<(Vec<f64>, f64)>>,
    /// worst relative deviation of the joint moments from the ξ-sequence
    pub joint_consistency: Option<f64>,
}

pub fn recover_xi_delta(
    source: &MomentSource,
    delta: &OffDiagonalBox,
    max_degree: u32,
) -> Result<XiRecovery> {
    let n = delta.order();
    if max_degree > MAX_DEGREE_CAP {
        return Err(Error::Insufficient(format!("degree cap is {MAX_DEGREE_CAP}")));
    }
    let nf: f64 = (1..=n as u64).map(|k| k as f64).product();
    // marginal sequences r^{(j)}_i = ξ^Δ_{0,…,i,…,0}
    let mut marginals = Vec::with_capacity(n);
    let deg = max_degree.saturating_sub(n as u32 - 1).max(2);
    for j in 0..n {
        let mut r = Vec::with_capacity(deg as usize + 1);
        for i in 0..=deg {
            let mut powers = vec![1u32; n];
            powers[j] = i + 1;
            r.push(source.moment(&powers, delta)?.value / nf);
        }
        let len = if r.len() % 2 == 0 { r.len() - 1 } else { r.len() };
        marginals.push(quadrature_from_moments(&r[..len])?);
    }
    if n == 1 || !source.is_empirical() {
        return Ok(XiRecovery { n, marginals, joint: None, joint_consistency: None });
    }
    // joint atomic estimate from the samples: each unordered distinct
    // tuple with locations in Δ contributes its weight product over S·n!
    // per ordered arrangement, i.e. ∏ s_j / S per unordered tuple.
    let (samples, _) = match source {
        MomentSource::Empirical { samples, window } => (samples.clone(), window.clone()),
        _ => unreachable!(),
    };
    let s_count = samples.len() as f64;
    let per_sample: Vec<Vec<(Vec<f64>, f64)>> = samples
        .par_iter()
        .map(|eta| {
            let mut out = Vec::new();
            collect_tuples(eta, delta, |pts| {
                let svec: Vec<f64> = pts.iter().map(|p| p.s).collect();
                let w: f64 = svec.iter().product();
                out.push((svec, w / s_count / nf));
            });
            out
        })
        .collect();
    let joint: Vec<(Vec<f64>, f64)> = per_sample.into_iter().flatten().collect();
    // consistency: joint moments must reproduce ξ^Δ_𝐢
    let mut worst: f64 = 0.0;
    for idx in [vec![0u32; n], vec![1u32; n], {
        let mut v = vec![0u32; n];
        v[0] = 2;
        v
    }] {
        let powers: Vec<u32> = idx.iter().map(|i| i + 1).collect();
        let xi = source.moment(&powers, delta)?.value / nf;
        let from_joint: f64 = joint
            .iter()
            .map(|(s, w)| w * s.iter().zip(&idx).map(|(x, &i)| x.powi(i as i32)).product::<f64>())
            .sum();
        let scale = xi.abs().max(from_joint.abs()).max(1e-12);
        worst = worst.max((xi - from_joint).abs() / scale);
    }
    Ok(XiRecovery { n, marginals, joint: Some(joint), joint_consistency: Some(worst) })
}

/// Enumerate ordered tuples of distinct atoms with locations in Δ.
fn collect_tuples<F: FnMut(&[YPoint])>(eta: &DiscreteMeasure, delta: &OffDiagonalBox, mut f: F) {
    let n = delta.order();
    let atoms = eta.atoms();
    let candidates: Vec<Vec<usize>> = delta
        .boxes
        .iter()
        .map(|b| (0..atoms.len()).filter(|&i| b.contains(&atoms[i].x)).collect())
        .collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let mut tuple: Vec<YPoint> = Vec::with_capacity(n);
    fn recurse<F: FnMut(&[YPoint])>(
        atoms: &[crate::measures::WeightedAtom],
        delta: &OffDiagonalBox,
        candidates: &[Vec<usize>],
        slot: usize,
        chosen: &mut Vec<usize>,
        tuple: &mut Vec<YPoint>,
        f: &mut F,
    ) {
        if slot == delta.order() {
            f(tuple);
            return;
        }
        'cand: for &i in &candidates[slot] {
            if chosen.contains(&i) {
                continue;
            }
            if delta.exclusion_radius > 0.0 {
                for &j in chosen.iter() {
                    if atoms[i].x.dist(&atoms[j].x) <= delta.exclusion_radius {
                        continue 'cand;
                    }
                }
            }
            chosen.push(i);
            tuple.push(YPoint { x: atoms[i].x.clone(), s: atoms[i].s });
            recurse(atoms, delta, candidates, slot + 1, chosen, tuple, f);
            chosen.pop();
            tuple.pop();
        }
    }
    recurse(atoms, delta, &candidates, 0, &mut chosen, &mut tuple, &mut f);
}

/// The ρ^{(n)} estimate produced through the moment pipeline, restricted
/// to `(window × ℝ₊)^n ∩ V_n`.
#[derive(Debug, Clone)]
pub struct RhoEstimate {
    pub n: usize,
    pub cells: Vec<Window>,
    /// n = 1 moment route: the per-cell reconstructed ξ-marginal
    pub cell_quadratures: Vec<QuadratureMeasure>,
    /// atomic ρ estimate (cell-resolved for n = 1; sample tuples for
    /// empirical n ≥ 2)
    pub atomic: AtomicCorrelation,
}

impl RhoEstimate {
    /// `∫ χ ∏ s_j dρ̂` over a product box, through the moment route when
    /// available (n = 1: quadrature weights of the cells inside).
    pub fn xi_box_mass(&self, boxes: &[(Window, f64, f64)]) -> f64 {
        if self.n == 1 && !self.cell_quadratures.is_empty() {
            let (xbox, a, b) = &boxes[0];
            let mut total = 0.0;
            for (cell, quad) in self.cells.iter().zip(&self.cell_quadratures) {
                if xbox.contains_window(cell) {
                    total += quad.mass_in(*a, *b);
                }
            }
            total
        } else {
            self.atomic.xi_box_mass(boxes)
        }
    }
}

/// Recover ρ^{(n)} on a window: partition the window into sub-cells, run
/// the per-cell moment problem, assemble ξ^{(n)} over the cells and divide
/// by s_1⋯s_n. For empirical sources with n ≥ 2 the atomic tuples come
/// directly from the lifted sample configurations with ρ-weight 1/S per
/// unordered tuple.
pub fn recover_rho(
    source: &MomentSource,
    n: usize,
    window: &Window,
    max_degree: u32,
    cells_per_axis: usize,
) -> Result<RhoEstimate> {
    if n == 0 {
        return Err(Error::Insufficient("ρ recovery needs n ≥ 1".into()));
    }
    let cells = window.grid(cells_per_axis.max(1));
    if n == 1 {
        let mut quads = Vec::with_capacity(cells.len());
        let mut tuples = Vec::new();
        for cell in &cells {
            let delta = OffDiagonalBox::power(cell, 1);
            let rec = recover_xi_delta(source, &delta, max_degree)?;
            let quad = rec.marginals.into_iter().next().unwrap();
            let center = Point {
                coords: cell
                    .lower
                    .iter()
                    .zip(&cell.upper)
                    .map(|(l, u)| 0.5 * (l + u))
                    .collect(),
            };
            for (t, w) in quad.nodes.iter().zip(&quad.weights) {
                if *t > 1e-12 && *w > 0.0 {
                    tuples.push((vec![YPoint { x: center.clone(), s: *t }], w / t));
                }
            }
            quads.push(quad);
        }
        return Ok(RhoEstimate {
            n,
            cells,
            cell_quadratures: quads,
            atomic: AtomicCorrelation { n, tuples },
        });
    }
    match source {
        MomentSource::Empirical { samples, .. } => {
            let delta = OffDiagonalBox::power(window, n);
            let s_count = samples.len() as f64;
            let nf: f64 = (1..=n as u64).map(|k| k as f64).product();
            let per_sample: Vec<Vec<(Vec<YPoint>, f64)>> = samples
                .par_iter()
                .map(|eta| {
                    let mut out = Vec::new();
                    collect_tuples(eta, &delta, |pts| {
                        // ordered tuples enumerate each unordered one n!
                        // times; weight 1/(S·n!) per ordered occurrence
                        out.push((pts.to_vec(), 1.0 / s_count / nf));
                    });
                    out
                })
                .collect();
            let tuples: Vec<(Vec<YPoint>, f64)> = per_sample.into_iter().flatten().collect();
            Ok(RhoEstimate {
                n,
                cells,
                cell_quadratures: Vec::new(),
                atomic: AtomicCorrelation { n, tuples },
            })
        }
        MomentSource::Analytic { .. } => Err(Error::Unavailable(
            "joint reconstruction from analytic moments is only provided for n = 1; \
             use the closed-form ρ-integrals instead"
                .into(),
        )),
    }
}

/// The direct empirical correlation measure of the lifted configurations:
/// weight 1/S per unordered distinct tuple, no moment machinery involved.
pub fn direct_correlation(samples: &[DiscreteMeasure], n: usize, window: &Window) -> AtomicCorrelation {
    let delta = OffDiagonalBox::power(window, n);
    let s_count = samples.len() as f64;
    let nf: f64 = (1..=n as u64).map(|k| k as f64).product();
    let per_sample: Vec<Vec<(Vec<YPoint>, f64)>> = samples
        .par_iter()
        .map(|eta| {
            let mut out = Vec::new();
            collect_tuples(eta, &delta, |pts| {
                out.push((pts.to_vec(), 1.0 / s_count / nf));
            });
            out
        })
        .collect();
    AtomicCorrelation {
        n,
        tuples: per_sample.into_iter().flatten().collect(),
    }
}

/// Outcome of a verdict run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictOutcome {
    Discrete,
    NotDiscrete,
    PointProcess,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdCell {
    pub n: usize,
    pub delta_id: String,
    pub report: PsdReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesCell {
    pub n: usize,
    pub level: usize,
    pub report: HankelReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatnessCell {
    pub n: usize,
    pub level: usize,
    /// max over multi-indices of |ξ_𝐢 − ξ_0| minus its allowance; ≤ 0 is flat
    pub excess: f64,
    pub flat: bool,
}

/// Full evidence bundle behind a verdict. Serializes to JSON for audit
/// and replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: VerdictOutcome,
    pub growth: GrowthReport,
    pub psd_cells: Vec<PsdCell>,
    pub series_cells: Vec<SeriesCell>,
    pub flatness_cells: Vec<FlatnessCell>,
    pub tolerances: DecisionTolerances,
    pub notes: Vec<String>,
}

/// Configuration of the verdict engine: the window ladder for the
/// weight-marginal tests, extra off-diagonal boxes for the
/// positive-definiteness tests, order and degree caps.
#[derive(Debug, Clone)]
pub struct VerdictConfig {
    pub ladder: Vec<Window>,
    pub shrink_ladder: Vec<Window>,
    pub extra_deltas: Vec<OffDiagonalBox>,
    pub n_max: usize,
    pub degree_cap: u32,
    pub tolerances: DecisionTolerances,
}

impl VerdictConfig {
    /// The ladder `Λ_l = [-l, l]^d`, l = 1..levels, with the shrink ladder
    /// `[-2^{-j}, 2^{-j}]^d`, j = 0..4, and a split product box per level
    /// at n = 2.
    pub fn default_for_dim(d: usize, levels: usize) -> Self {
        let ladder: Vec<Window> = (1..=levels.max(1))
            .map(|l| Window::centered_cube(l as f64, d))
            .collect();
        let shrink_ladder: Vec<Window> = (0..=4)
            .map(|j| Window::centered_cube(2.0f64.powi(-j), d))
            .collect();
        let mut extra_deltas = Vec::new();
        for w in &ladder {
            // disjoint left/right halves along axis 0
            let mut mid_w = w.clone();
            mid_w.upper[0] = 0.5 * (w.lower[0] + w.upper[0]);
            let mut right = w.clone();
            right.lower[0] = mid_w.upper[0];
            extra_deltas.push(OffDiagonalBox { boxes: vec![mid_w, right], exclusion_radius: 0.0 });
        }
        VerdictConfig {
            ladder,
            shrink_ladder,
            extra_deltas,
            n_max: 3,
            degree_cap: MAX_DEGREE_CAP,
            tolerances: DecisionTolerances::default(),
        }
    }

    /// A nested ladder filling a given window: concentric scalings
    /// `l/levels` of the window around its center, with a `2^{-j}`-scaled
    /// shrink ladder and one split product box per rung.
    pub fn scaled_to_window(window: &Window, levels: usize) -> Self {
        let center: Vec<f64> = window
            .lower
            .iter()
            .zip(&window.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect();
        let scaled = |f: f64| -> Window {
            let lower = center
                .iter()
                .zip(&window.lower)
                .map(|(c, l)| c + f * (l - c))
                .collect();
            let upper = center
                .iter()
                .zip(&window.upper)
                .map(|(c, u)| c + f * (u - c))
                .collect();
            Window { lower, upper }
        };
        let levels = levels.max(1);
        let ladder: Vec<Window> = (1..=levels).map(|l| scaled(l as f64 / levels as f64)).collect();
        let shrink_ladder: Vec<Window> = (0..=4).map(|j| scaled(2.0f64.powi(-j))).collect();
        let mut extra_deltas = Vec::new();
        for w in &ladder {
            let mut left = w.clone();
            left.upper[0] = 0.5 * (w.lower[0] + w.upper[0]);
            let mut right = w.clone();
            right.lower[0] = left.upper[0];
            extra_deltas.push(OffDiagonalBox { boxes: vec![left, right], exclusion_radius: 0.0 });
        }
        VerdictConfig {
            ladder,
            shrink_ladder,
            extra_deltas,
            n_max: 3,
            degree_cap: MAX_DEGREE_CAP,
            tolerances: DecisionTolerances::default(),
        }
    }

    /// Restrict ladders to windows contained in the sampled region.
    pub fn clamped_to(mut self, window: &Window) -> Self {
        self.ladder.retain(|w| window.contains_window(w));
        self.shrink_ladder.retain(|w| window.contains_window(w));
        self.extra_deltas
            .retain(|d| d.boxes.iter().all(|b| window.contains_window(b)));
        self
    }
}

/// The principal moment sequence `r_i = ξ^Δ_{i,0,…,0}` on
/// `Δ = Λ^{(n)}_0̂` up to i = 2K.
fn principal_sequence(
    source: &MomentSource,
    window: &Window,
    n: usize,
    k: usize,
) -> Result<Vec<MomentValue>> {
    let delta = OffDiagonalBox::power(window, n);
    let nf: f64 = (1..=n as u64).map(|x| x as f64).product();
    let mut out = Vec::with_capacity(2 * k + 1);
    for i in 0..=(2 * k as u32) {
        let mut powers = vec![1u32; n];
        powers[0] = i + 1;
        let m = source.moment(&powers, &delta)?;
        out.push(MomentValue { value: m.value / nf, stderr: m.stderr / nf });
    }
    Ok(out)
}

fn series_order(degree_cap: u32, n: usize) -> usize {
    ((degree_cap as usize).saturating_sub(n) / 2).max(1)
}

/// Decide from moments whether the source's law is a random discrete
/// measure: positive definiteness of the ξ-sequences over the Δ family,
/// plus the Stieltjes shifted-Hankel test and the atom-at-zero series on
/// every ladder cell, with the factorial growth constants reported
/// alongside.
///
/// NotDiscrete requires a definitive failure: an indefinite matrix beyond
/// the noise floor or an atom-at-zero finding. A converging series trend
/// that stays below the definitive thresholds yields Inconclusive.
pub fn discreteness_verdict(source: &MomentSource, cfg: &VerdictConfig) -> Result<Verdict> {
    let mut notes = Vec::new();
    let mut psd_cells = Vec::new();
    let mut series_cells = Vec::new();

    let growth_windows: Vec<Window> = cfg
        .ladder
        .iter()
        .chain(cfg.shrink_ladder.iter())
        .cloned()
        .collect();
    let growth_order = (cfg.degree_cap as usize / 2).clamp(2, 6);
    let growth = crate::moments::growth_constants(source, &growth_windows, growth_order)?;
    if !growth.c_prime_shrinks {
        notes.push("C' does not shrink along the ladder; the off-diagonal growth bound is doubtful".into());
    }
    if !growth.c_shrinks {
        notes.push("C_Λ does not decay with the window (expected for e.g. the gamma measure)".into());
    }

    for n in 1..=cfg.n_max {
        // moment-matrix positive definiteness per ladder window
        let psd_degree = (cfg.degree_cap.min(10) as usize).saturating_sub(n) / 2;
        for (l, window) in cfg.ladder.iter().enumerate() {
            if psd_degree >= 1 {
                let delta = OffDiagonalBox::power(window, n);
                let seq = xi_sequence(source, &delta, (2 * psd_degree) as u32)?;
                let report = multiindex_psd(&seq, psd_degree as u32, &cfg.tolerances)?;
                psd_cells.push(PsdCell { n, delta_id: format!("L{}^({n})", l + 1), report });
            }
            // Stieltjes + atom-at-zero series on the principal sequence
            let k = series_order(cfg.degree_cap, n);
            let r = principal_sequence(source, window, n, k)?;
            let report = atom_at_zero_series(&r, k, &cfg.tolerances)?;
            series_cells.push(SeriesCell { n, level: l + 1, report });
        }
    }
    // user-supplied / split boxes enter the PSD family only
    for (d_idx, delta) in cfg.extra_deltas.iter().enumerate() {
        let n = delta.order();
        if n > cfg.n_max {
            continue;
        }
        let psd_degree = (cfg.degree_cap.min(10) as usize).saturating_sub(n) / 2;
        if psd_degree >= 1 {
            let seq = xi_sequence(source, delta, (2 * psd_degree) as u32)?;
            let report = multiindex_psd(&seq, psd_degree as u32, &cfg.tolerances)?;
            psd_cells.push(PsdCell { n, delta_id: format!("user{d_idx}"), report });
        }
    }

    let outcome = aggregate_discreteness(&psd_cells, &series_cells, &mut notes);
    Ok(Verdict {
        outcome,
        growth,
        psd_cells,
        series_cells,
        flatness_cells: Vec::new(),
        tolerances: cfg.tolerances.clone(),
        notes,
    })
}

fn aggregate_discreteness(
    psd_cells: &[PsdCell],
    series_cells: &[SeriesCell],
    notes: &mut Vec<String>,
) -> VerdictOutcome {
    let mut definitive_fail = false;
    let mut all_pass = true;
    for cell in psd_cells {
        if !cell.report.pass {
            definitive_fail = true;
            notes.push(format!(
                "PSD condition fails at n={} Δ={} (min eig {:.3e})",
                cell.n, cell.delta_id, cell.report.min_eig
            ));
        }
    }
    for cell in series_cells {
        if !cell.report.psd_pass || !cell.report.stieltjes_pass {
            definitive_fail = true;
            notes.push(format!(
                "weight-marginal Hankel/Stieltjes condition fails at n={} l={}",
                cell.n, cell.level
            ));
        }
        match cell.report.atom_at_zero {
            ZeroAtomFinding::Atom { mass, degenerate } => {
                definitive_fail = true;
                notes.push(format!(
                    "atom at zero detected at n={} l={} (mass ≈ {:.4}, {})",
                    cell.n,
                    cell.level,
                    mass,
                    if degenerate { "finite-rank node test" } else { "series plateau" }
                ));
            }
            ZeroAtomFinding::NoAtom => {}
            ZeroAtomFinding::Undetermined => {
                all_pass = false;
            }
        }
        if matches!(cell.report.trend, SeriesTrend::Inconclusive) {
            all_pass = false;
        }
    }
    if definitive_fail {
        VerdictOutcome::NotDiscrete
    } else if all_pass {
        VerdictOutcome::Discrete
    } else {
        VerdictOutcome::Inconclusive
    }
}

/// Decide whether the source is a simple point process: the ξ-sequences
/// must be flat in the multi-index (all diagonal moment restrictions
/// coincide) and the discreteness conditions must pass.
pub fn point_process_verdict(source: &MomentSource, cfg: &VerdictConfig) -> Result<Verdict> {
    let mut verdict = discreteness_verdict(source, cfg)?;
    let tol = verdict.tolerances.flatness_tol;
    let mut flat_cells = Vec::new();
    let mut all_flat = true;
    for n in 1..=cfg.n_max {
        let flat_degree = ((cfg.degree_cap.min(8) as usize).saturating_sub(n) / 2).max(1) as u32;
        for (l, window) in cfg.ladder.iter().enumerate() {
            let delta = OffDiagonalBox::power(window, n);
            let seq = xi_sequence(source, &delta, flat_degree)?;
            let base = seq
                .get(&vec![0u32; n])
                .ok_or_else(|| Error::Insufficient("missing ξ_0".into()))?;
            let mut excess = f64::NEG_INFINITY;
            for v in seq.values.values() {
                let allowance = tol * base.value.abs().max(1.0)
                    + cfg.tolerances.noise_multiplier * (v.stderr + base.stderr);
                excess = excess.max((v.value - base.value).abs() - allowance);
            }
            let flat = excess <= 0.0;
            all_flat &= flat;
            flat_cells.push(FlatnessCell { n, level: l + 1, excess, flat });
        }
    }
    verdict.flatness_cells = flat_cells;
    verdict.outcome = match verdict.outcome {
        VerdictOutcome::Discrete if all_flat => VerdictOutcome::PointProcess,
        other => other,
    };
    if !all_flat {
        verdict
            .notes
            .push("ξ-sequences are not flat in the multi-index; weights are not a.s. 1".into());
    }
    Ok(verdict)
}

/// A family of atomic correlation estimates across orders 0..N with
/// order-0 mass 1, e.g. read off lifted samples.
#[derive(Debug, Clone)]
pub struct CorrelationFamily {
    pub orders: Vec<AtomicCorrelation>,
}

impl CorrelationFamily {
    /// Build from samples: weight 1/S per unordered tuple of each order.
    pub fn from_samples(samples: &[DiscreteMeasure], window: &Window, max_order: usize) -> Self {
        let orders = (1..=max_order)
            .map(|n| direct_correlation(samples, n, window))
            .collect();
        CorrelationFamily { orders }
    }

    /// `∫ G dρ̂` over all orders (order 0 contributes `G(∅)`, mass 1).
    pub fn integrate(&self, g: &ConfigFunctional<f64>) -> f64 {
        let mut total = *g.order0();
        for corr in &self.orders {
            total += corr.integrate(|pts| g.eval(pts));
        }
        total
    }

    /// ρ^{(n)}-mass of `(Λ × A)^n ∩ V_n`.
    pub fn mass(&self, n: usize, window: &Window, a: f64, b: f64) -> f64 {
        if n == 0 || n > self.orders.len() {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        let boxes: Vec<(Window, f64, f64)> = vec![(window.clone(), a, b); n];
        self.orders[n - 1].box_mass(&boxes)
    }
}

/// Star-positivity check: `∫ G ⋆ G dρ` evaluated by explicit cover
/// enumeration over the atomic family, together with the K-transform
/// route `mean (KG)²` over the same samples, which must agree to
/// floating-point accuracy by the identity K(G1⋆G2) = KG1·KG2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdReport {
    pub star_integral: f64,
    pub k_route: f64,
    pub pass: bool,
}

pub fn pd_check(
    family: &CorrelationFamily,
    samples: &[DiscreteMeasure],
    g: &ConfigFunctional<f64>,
) -> Result<PdReport> {
    let star_g = |pts: &[YPoint]| star_product(g, g, pts).unwrap_or(f64::NAN);
    let mut total = star_g(&[]);
    for corr in &family.orders {
        // G⋆G is a function of the configuration (a set), hence symmetric
        total += corr.integrate_symmetric(|pts| star_g(pts));
    }
    // K route over the same samples
    let vals: Vec<f64> = samples
        .par_iter()
        .map(|eta| {
            let kg = k_transform_unchecked(g, &eta.lifted());
            kg * kg
        })
        .collect();
    let k_route = crate::moments::deterministic_mean(&vals);
    Ok(PdReport {
        star_integral: total,
        k_route,
        pass: total >= -1e-8 * total.abs().max(1.0),
    })
}

/// Local-bound check: per-window constants `(ρ^{(n)}-mass)^{1/n}` maxed
/// over n, with a shrink-trend flag along the (shrinking) ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LbReport {
    pub constants: Vec<f64>,
    pub shrinks: bool,
}

pub fn lb_check(families: &[(Window, CorrelationFamily)], a: f64, b: f64, n_max: usize) -> LbReport {
    let mut constants = Vec::with_capacity(families.len());
    for (window, family) in families {
        let mut c = 0.0f64;
        for n in 1..=n_max {
            let mass = family.mass(n, window, a, b);
            if mass > 0.0 {
                c = c.max(mass.powf(1.0 / n as f64));
            }
        }
        constants.push(c);
    }
    let ratios: Vec<f64> = constants
        .windows(2)
        .map(|p| if p[0] > 0.0 { p[1] / p[0] } else { 0.0 })
        .collect();
    let shrinks = !ratios.is_empty()
        && ratios.iter().rev().take(2).sum::<f64>() / ratios.len().min(2) as f64 <= 0.85;
    LbReport { constants, shrinks }
}

/// Wick-polynomial generalized correlation functions: the Monte Carlo
/// average of `⟨:ω^{⊗n}:, φ_1⊗⋯⊗φ_n⟩` over samples, and the companion
/// value `∫ Sym(∏φ)·s_1⋯s_n dρ̂^{(n)}` from the direct atomic estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenCorrReport {
    pub wick_mean: f64,
    pub wick_se: f64,
    pub rho_side: f64,
    pub rho_se: f64,
}

pub fn generalized_correlation(
    source: &MomentSource,
    window: &Window,
    phis: &[TestFn],
) -> Result<GenCorrReport> {
    let n = phis.len();
    if n == 0 || n > 4 {
        return Err(Error::Insufficient("generalized correlations support 1 ≤ n ≤ 4".into()));
    }
    let samples = match source {
        MomentSource::Empirical { samples, .. } => samples.clone(),
        _ => {
            return Err(Error::Insufficient(
                "generalized correlations require an empirical source".into(),
            ))
        }
    };
    let wick_vals: Vec<f64> = samples
        .par_iter()
        .map(|eta| wick_pairing(eta, phis).unwrap_or(f64::NAN))
        .collect();
    let (wick_mean, wick_se) = mean_and_jackknife_se(&wick_vals);
    // ρ-side: per-sample Σ over ordered distinct tuples of
    // (1/n!)·∏ φ_j(x_j)·s_j, whose mean is ∫ Sym(⊗φ)·∏s dρ^{(n)}
    let delta = OffDiagonalBox::power(window, n);
    let nf: f64 = (1..=n as u64).map(|k| k as f64).product();
    let rho_vals: Vec<f64> = samples
        .par_iter()
        .map(|eta| {
            let mut acc = 0.0;
            collect_tuples(eta, &delta, |pts| {
                let mut term = 1.0 / nf;
                for (p, phi) in pts.iter().zip(phis) {
                    term *= phi.eval(&p.x) * p.s;
                }
                acc += term;
            });
            acc
        })
        .collect();
    let (rho_side, rho_se) = mean_and_jackknife_se(&rho_vals);
    Ok(GenCorrReport { wick_mean, wick_se, rho_side, rho_se })
}
