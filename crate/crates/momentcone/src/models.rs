//! Reference random-measure laws: the gamma random measure, generic
//! marked-Poisson completely random measures, Poisson point processes
//! (unit weights), deterministic diffuse measures, fixed-atom measures,
//! and mixtures of independent components.
//!
//! Each law provides a seeded sampler restricted to a bounding window and,
//! where a closed form exists, exact diagonally-restricted moments
//! `M_{i_1,…,i_n}(Δ)` on off-diagonal product boxes.

use crate::combinatorics::enumerate_partitions;
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, OffDiagonalBox, Point, WeightedAtom, Window};
use crate::special::exp_integral_e1;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma as GammaDist, Poisson};
use serde::{Deserialize, Serialize};

/// Law of a single fixed atom's weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightLaw {
    Deterministic { value: f64 },
    Exponential { mean: f64 },
    GammaLaw { shape: f64, scale: f64 },
}

impl WeightLaw {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            WeightLaw::Deterministic { value } => *value > 0.0,
            WeightLaw::Exponential { mean } => *mean > 0.0,
            WeightLaw::GammaLaw { shape, scale } => *shape > 0.0 && *scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Model("weight law parameters must be > 0".into()))
        }
    }

    /// `E[s^i]`, exact.
    pub fn moment(&self, i: u32) -> f64 {
        match self {
            WeightLaw::Deterministic { value } => value.powi(i as i32),
            WeightLaw::Exponential { mean } => {
                (1..=i as u64).map(|k| k as f64).product::<f64>() * mean.powi(i as i32)
            }
            WeightLaw::GammaLaw { shape, scale } => {
                (0..i).map(|k| shape + k as f64).product::<f64>() * scale.powi(i as i32)
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            WeightLaw::Deterministic { value } => *value,
            WeightLaw::Exponential { mean } => Exp::new(1.0 / mean).unwrap().sample(rng),
            WeightLaw::GammaLaw { shape, scale } => {
                GammaDist::new(*shape, *scale).unwrap().sample(rng)
            }
        }
    }
}

/// Density of the weight marginal of a marked-Poisson Lévy intensity.
/// The gamma tail is non-integrable at 0 (infinite activity) but has
/// finite `∫ min(s,1)·w(s) ds`; the compound variants are finite-activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightDensity {
    /// `w(s) = s^{-1} e^{-s/theta}` — the gamma-measure marginal.
    GammaTail { theta: f64 },
    /// `w(s) = activity · Exp(mean)` density.
    CompoundExponential { activity: f64, mean: f64 },
    /// `activity · δ_value`.
    CompoundDeterministic { activity: f64, value: f64 },
}

impl WeightDensity {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            WeightDensity::GammaTail { theta } => *theta > 0.0,
            WeightDensity::CompoundExponential { activity, mean } => *activity > 0.0 && *mean > 0.0,
            WeightDensity::CompoundDeterministic { activity, value } => {
                *activity > 0.0 && *value > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Model("weight density parameters must be > 0".into()))
        }
    }

    pub fn infinite_activity(&self) -> bool {
        matches!(self, WeightDensity::GammaTail { .. })
    }

    /// `∫_ε^∞ w(s) ds`.
    pub fn tail_mass(&self, eps: f64) -> f64 {
        match self {
            WeightDensity::GammaTail { theta } => exp_integral_e1(eps / theta),
            WeightDensity::CompoundExponential { activity, mean } => {
                activity * (-eps / mean).exp()
            }
            WeightDensity::CompoundDeterministic { activity, value } => {
                if *value > eps {
                    *activity
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫_0^∞ s^i w(s) ds` for i ≥ 1, exact.
    pub fn moment(&self, i: u32) -> f64 {
        assert!(i >= 1);
        match self {
            // Γ(i)·θ^i
            WeightDensity::GammaTail { theta } => {
                (1..i as u64).map(|k| k as f64).product::<f64>() * theta.powi(i as i32)
            }
            WeightDensity::CompoundExponential { activity, mean } => {
                activity * (1..=i as u64).map(|k| k as f64).product::<f64>() * mean.powi(i as i32)
            }
            WeightDensity::CompoundDeterministic { activity, value } => {
                activity * value.powi(i as i32)
            }
        }
    }

    /// Draw a weight conditioned on `s ≥ eps` (only relevant for the
    /// infinite-activity tail).
    fn sample(&self, eps: f64, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            WeightDensity::GammaTail { theta } => {
                // inverse CDF through E1: solve E1(t) = (1-u)·E1(ε/θ)
                let total = exp_integral_e1(eps / theta);
                let u: f64 = rng.gen::<f64>();
                let target = (total * (1.0 - u)).max(f64::MIN_POSITIVE);
                theta * crate::special::inverse_exp_integral_e1(target, eps / theta)
            }
            WeightDensity::CompoundExponential { mean, .. } => {
                // the mass below eps is negligible for finite-activity densities
                Exp::new(1.0 / mean).unwrap().sample(rng)
            }
            WeightDensity::CompoundDeterministic { value, .. } => *value,
        }
    }
}

/// Intensity of a marked Poisson completely random measure on
/// Y = X × ℝ₊: a constant spatial rate per unit volume times a weight
/// density in the mark coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyIntensity {
    pub spatial_rate: f64,
    pub weights: WeightDensity,
}

/// A reference law for a random (discrete or diffuse) measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum MeasureModel {
    /// Gamma random measure: marked Poisson with intensity
    /// `rate·dx · s^{-1} e^{-s} ds`.
    Gamma { rate: f64 },
    MarkedPoissonCrm { intensity: LevyIntensity },
    /// Poisson point process with unit weights.
    PoissonPp { rate: f64 },
    /// `density · Lebesgue`, deterministic and atomless.
    DeterministicDiffuse { density: f64 },
    FixedAtoms { atoms: Vec<FixedAtom> },
    /// Sum of independent components.
    Mixture { components: Vec<MeasureModel> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedAtom {
    pub x: Point,
    pub law: WeightLaw,
}

impl MeasureModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureModel::Gamma { rate } | MeasureModel::PoissonPp { rate } => {
                if *rate > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Model("rate must be > 0".into()))
                }
            }
            MeasureModel::MarkedPoissonCrm { intensity } => {
                if intensity.spatial_rate <= 0.0 {
                    return Err(Error::Model("spatial rate must be > 0".into()));
                }
                intensity.weights.validate()
            }
            MeasureModel::DeterministicDiffuse { density } => {
                if *density > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Model("density must be > 0".into()))
                }
            }
            MeasureModel::FixedAtoms { atoms } => {
                for a in atoms {
                    a.law.validate()?;
                }
                for i in 0..atoms.len() {
                    for j in (i + 1)..atoms.len() {
                        if atoms[i].x == atoms[j].x {
                            return Err(Error::Model("fixed atom locations must be distinct".into()));
                        }
                    }
                }
                Ok(())
            }
            MeasureModel::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::Model("mixture needs ≥ 1 component".into()));
                }
                let mut fixed: Vec<&Point> = Vec::new();
                for c in components {
                    c.validate()?;
                    if let MeasureModel::FixedAtoms { atoms } = c {
                        for a in atoms {
                            if fixed.contains(&&a.x) {
                                return Err(Error::Model(
                                    "fixed atom locations must be distinct across components".into(),
                                ));
                            }
                            fixed.push(&a.x);
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Whether the law contains a diffuse component (then only analytic
    /// moments are available, never atomic samples).
    pub fn has_diffuse_part(&self) -> bool {
        match self {
            MeasureModel::DeterministicDiffuse { .. } => true,
            MeasureModel::Mixture { components } => {
                components.iter().any(|c| c.has_diffuse_part())
            }
            _ => false,
        }
    }

    /// Whether all weights are almost surely 1 (the law is a simple point
    /// process on X).
    pub fn unit_weights(&self) -> bool {
        match self {
            MeasureModel::PoissonPp { .. } => true,
            MeasureModel::FixedAtoms { atoms } => atoms
                .iter()
                .all(|a| matches!(a.law, WeightLaw::Deterministic { value } if value == 1.0)),
            MeasureModel::Mixture { components } => components.iter().all(|c| c.unit_weights()),
            _ => false,
        }
    }

    fn as_crm(&self) -> Option<LevyIntensity> {
        match self {
            MeasureModel::Gamma { rate } => Some(LevyIntensity {
                spatial_rate: *rate,
                weights: WeightDensity::GammaTail { theta: 1.0 },
            }),
            MeasureModel::MarkedPoissonCrm { intensity } => Some(intensity.clone()),
            MeasureModel::PoissonPp { rate } => Some(LevyIntensity {
                spatial_rate: *rate,
                weights: WeightDensity::CompoundDeterministic { activity: 1.0, value: 1.0 },
            }),
            _ => None,
        }
    }
}

/// One independent ChaCha stream per (seed, sample index, lane), so
/// parallel sampling is order-independent and bit-reproducible.
pub fn stream_rng(seed: u64, index: u64, lane: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    key[16..24].copy_from_slice(&lane.to_le_bytes());
    key[24..32].copy_from_slice(&0x6d6f_6d65_6e74_636fu64.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Draw one realization of the model restricted to `window`, truncating
/// infinite-activity weight marginals below `trunc_eps`. The draw is a
/// pure function of `(model, window, seed, index, trunc_eps)`.
pub fn sample(
    model: &MeasureModel,
    window: &Window,
    seed: u64,
    index: u64,
    trunc_eps: f64,
) -> Result<DiscreteMeasure> {
    model.validate()?;
    if model.has_diffuse_part() {
        return Err(Error::Diffuse);
    }
    let mut atoms = Vec::new();
    sample_into(model, window, seed, index, trunc_eps, &mut 0, &mut atoms)?;
    Ok(DiscreteMeasure::from_sampler(atoms))
}

fn sample_into(
    model: &MeasureModel,
    window: &Window,
    seed: u64,
    index: u64,
    trunc_eps: f64,
    lane: &mut u64,
    out: &mut Vec<WeightedAtom>,
) -> Result<()> {
    match model {
        MeasureModel::Mixture { components } => {
            for c in components {
                sample_into(c, window, seed, index, trunc_eps, lane, out)?;
            }
            Ok(())
        }
        MeasureModel::FixedAtoms { atoms } => {
            let mut rng = stream_rng(seed, index, *lane);
            *lane += 1;
            for a in atoms {
                let s = a.law.sample(&mut rng);
                if window.contains(&a.x) && s > 0.0 {
                    out.push(WeightedAtom { x: a.x.clone(), s });
                }
            }
            Ok(())
        }
        MeasureModel::DeterministicDiffuse { .. } => Err(Error::Diffuse),
        _ => {
            let intensity = model.as_crm().expect("remaining variants are CRMs");
            if intensity.weights.infinite_activity() && trunc_eps <= 0.0 {
                return Err(Error::Model(
                    "trunc_eps must be > 0 for infinite-activity intensities".into(),
                ));
            }
            let mut rng = stream_rng(seed, index, *lane);
            *lane += 1;
            let mean = window.volume() * intensity.spatial_rate * intensity.weights.tail_mass(trunc_eps);
            if !mean.is_finite() {
                return Err(Error::Model("non-integrable weight tail".into()));
            }
            let count = if mean > 0.0 {
                Poisson::new(mean)
                    .map_err(|e| Error::Model(format!("invalid Poisson mean: {e}")))?
                    .sample(&mut rng) as usize
            } else {
                0
            };
            let d = window.dim();
            for _ in 0..count {
                let mut coords = Vec::with_capacity(d);
                for j in 0..d {
                    coords.push(rng.gen_range(window.lower[j]..window.upper[j]));
                }
                let s = intensity.weights.sample(trunc_eps, &mut rng);
                out.push(WeightedAtom { x: Point { coords }, s });
            }
            Ok(())
        }
    }
}

/// Exact diagonally-restricted moment `M_{i_1,…,i_n}(Δ)` where closed
/// forms exist: the expected sum over ordered tuples of pairwise-distinct
/// atoms with locations in Δ of `∏ s_j^{i_j}`.
///
/// Closed forms cover exclusion radius 0 only; a positive radius has no
/// product structure and reports `Unavailable`.
pub fn analytic_moment(model: &MeasureModel, powers: &[u32], delta: &OffDiagonalBox) -> Result<f64> {
    if powers.len() != delta.order() {
        return Err(Error::Model("powers must match the order of Δ".into()));
    }
    if powers.iter().any(|&p| p < 1) {
        return Err(Error::Model("powers must be ≥ 1".into()));
    }
    if delta.exclusion_radius > 0.0 {
        return Err(Error::Unavailable(
            "closed forms require exclusion radius 0".into(),
        ));
    }
    match model {
        MeasureModel::Gamma { .. } | MeasureModel::MarkedPoissonCrm { .. } | MeasureModel::PoissonPp { .. } => {
            let intensity = model.as_crm().unwrap();
            // Poisson correlation structure: the factorial moment of the
            // lifted process factorizes over the coordinates.
            let mut v = delta.product_volume() * intensity.spatial_rate.powi(powers.len() as i32);
            for &p in powers {
                v *= intensity.weights.moment(p);
            }
            Ok(v)
        }
        MeasureModel::DeterministicDiffuse { density } => {
            if powers.iter().all(|&p| p == 1) {
                Ok(delta.product_volume() * density.powi(powers.len() as i32))
            } else {
                Ok(0.0)
            }
        }
        MeasureModel::FixedAtoms { atoms } => {
            // ordered distinct tuples of fixed atoms; weights independent
            let n = powers.len();
            let mut total = 0.0;
            let mut chosen = vec![usize::MAX; n];
            fn recurse(
                atoms: &[FixedAtom],
                delta: &OffDiagonalBox,
                powers: &[u32],
                slot: usize,
                chosen: &mut [usize],
                acc: f64,
                total: &mut f64,
            ) {
                if slot == powers.len() {
                    *total += acc;
                    return;
                }
                for (i, a) in atoms.iter().enumerate() {
                    if chosen[..slot].contains(&i) || !delta.boxes[slot].contains(&a.x) {
                        continue;
                    }
                    chosen[slot] = i;
                    let m = a.law.moment(powers[slot]);
                    recurse(atoms, delta, powers, slot + 1, chosen, acc * m, total);
                }
                chosen[slot] = usize::MAX;
            }
            recurse(atoms, delta, powers, 0, &mut chosen, 1.0, &mut total);
            Ok(total)
        }
        MeasureModel::Mixture { components } => {
            // Atoms of independent continuous components never coincide,
            // so each coordinate of a distinct tuple is owned by exactly
            // one component and the expectation factorizes per assignment.
            let n = powers.len();
            let c = components.len();
            let mut total = 0.0;
            let mut assign = vec![0usize; n];
            loop {
                let mut term = 1.0;
                for (ci, comp) in components.iter().enumerate() {
                    let slots: Vec<usize> = (0..n).filter(|&j| assign[j] == ci).collect();
                    if slots.is_empty() {
                        continue;
                    }
                    let sub_powers: Vec<u32> = slots.iter().map(|&j| powers[j]).collect();
                    let sub_delta = OffDiagonalBox {
                        boxes: slots.iter().map(|&j| delta.boxes[j].clone()).collect(),
                        exclusion_radius: 0.0,
                    };
                    term *= analytic_moment(comp, &sub_powers, &sub_delta)?;
                    if term == 0.0 {
                        break;
                    }
                }
                total += term;
                // next assignment
                let mut j = 0;
                loop {
                    if j == n {
                        return Ok(total);
                    }
                    assign[j] += 1;
                    if assign[j] < c {
                        break;
                    }
                    assign[j] = 0;
                    j += 1;
                }
            }
        }
    }
}

/// Exact full moment `M^{(n)}(Λ^n) = E[η(Λ)^n]` through the partition
/// decomposition `m^{(n)} = Σ_π m^{(n)}_π`.
pub fn analytic_full_moment(model: &MeasureModel, n: usize, window: &Window) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    if n > 8 {
        return Err(Error::Insufficient("analytic full moments support n ≤ 8".into()));
    }
    let mut total = 0.0;
    for part in enumerate_partitions(n)? {
        let sizes = part.block_sizes();
        let delta = OffDiagonalBox::power(window, sizes.len());
        total += analytic_moment(model, &sizes, &delta)?;
    }
    Ok(total)
}
