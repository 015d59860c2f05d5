//! One-dimensional and multi-index moment-problem numerics: Hankel
//! positive-definiteness, the Stieltjes shifted-Hankel test, the
//! determinant-series criterion for an atom at zero of the representing
//! measure, Carleman partial sums, and Gauss-quadrature reconstruction of
//! a finitely-atomic measure from a truncated moment sequence.
//!
//! Hankel determinants of factorial-growth sequences are hopeless in
//! plain f64, so all determinants here are computed exactly: every f64 is
//! a dyadic rational, and Bareiss elimination over `BigRational` gives
//! the true determinant of the floating-point matrix. Sign decisions are
//! then exact; eigenvalue-based PSD flags carry explicit tolerances.

use crate::error::{Error, Result};
use crate::moments::MomentValue;
use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// PSD tolerance: min eigenvalue ≥ −tol·(1 + spectral norm).
pub const PSD_TOL: f64 = 1e-8;
/// Degeneracy cutoff: a Cholesky pivot D_k/D_{k-1} below cutoff·r_{2k}
/// marks a finitely-atomic (rank-limited) sequence.
pub const DEGENERACY_CUTOFF: f64 = 1e-10;
/// A quadrature node within this fraction of max(1, largest node) of the
/// origin counts as a node at zero.
pub const ZERO_NODE_RADIUS_REL: f64 = 0.005;
/// Zero-mass-bound intercept above this (relative to r_0) classifies the
/// series as converging, i.e. evidence for an atom at zero.
pub const ATOM_PLATEAU_REL: f64 = 0.15;
/// Intercept below this classifies the series as diverging (no atom).
pub const NOATOM_PLATEAU_REL: f64 = 0.08;
/// Statistical noise enters tolerances with this multiplier.
pub const NOISE_MULTIPLIER: f64 = 3.0;

fn default_tol_psd() -> f64 {
    PSD_TOL
}
fn default_degeneracy_cutoff() -> f64 {
    DEGENERACY_CUTOFF
}
fn default_noise_multiplier() -> f64 {
    NOISE_MULTIPLIER
}
fn default_flatness_tol() -> f64 {
    1e-10
}

/// The tolerance knobs of the decision machinery. Every verdict embeds
/// the values it ran with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTolerances {
    #[serde(default = "default_tol_psd")]
    pub tol_psd: f64,
    #[serde(default = "default_degeneracy_cutoff")]
    pub degeneracy_cutoff: f64,
    #[serde(default = "default_noise_multiplier")]
    pub noise_multiplier: f64,
    #[serde(default = "default_flatness_tol")]
    pub flatness_tol: f64,
}

impl Default for DecisionTolerances {
    fn default() -> Self {
        DecisionTolerances {
            tol_psd: PSD_TOL,
            degeneracy_cutoff: DEGENERACY_CUTOFF,
            noise_multiplier: NOISE_MULTIPLIER,
            flatness_tol: default_flatness_tol(),
        }
    }
}

/// Trend classification of the determinant-series partial sums. The infinite
/// series is never certified: these are finite-sum trends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "trend", rename_all = "snake_case")]
pub enum SeriesTrend {
    Diverging,
    Converging { plateau: f64 },
    Inconclusive,
}

/// Outcome of the atom-at-zero analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum ZeroAtomFinding {
    NoAtom,
    /// Definitive in the rank-degenerate case; in the nondegenerate case
    /// the mass is the extrapolated plateau of the zero-mass bounds.
    Atom { mass: f64, degenerate: bool },
    Undetermined,
}

/// Nodes and weights of a finitely-atomic measure on ℝ reconstructed from
/// a truncated moment sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureMeasure {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureMeasure {
    /// `∫ t^i dm` of the reconstruction.
    pub fn moment(&self, i: u32) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * t.powi(i as i32))
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Mass carried by nodes inside `[a, b]`.
    pub fn mass_in(&self, a: f64, b: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .filter(|(t, _)| a <= **t && **t <= b)
            .map(|(_, w)| w)
            .sum()
    }

    /// The node-at-zero test with the default radius.
    pub fn node_at_zero(&self) -> Option<(f64, f64)> {
        let scale = self
            .nodes
            .iter()
            .fold(1.0f64, |m, t| m.max(t.abs()));
        let radius = ZERO_NODE_RADIUS_REL * scale;
        self.nodes
            .iter()
            .zip(&self.weights)
            .find(|(t, _)| t.abs() <= radius)
            .map(|(t, w)| (*t, *w))
    }
}

/// Report of the determinant-series analysis of a Stieltjes-type moment
/// sequence (Hankel determinants, shifted determinants, the partial sums
/// of the atom-at-zero series, and the resulting classification).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HankelReport {
    pub order: usize,
    pub min_eig: f64,
    pub min_eig_shifted: f64,
    /// D_0..D_K (exact values rendered to f64)
    pub dets: Vec<f64>,
    /// shifted-Hankel determinants det[r_{i+j+1}]_{k×k}, k = 1..K
    pub shifted_dets: Vec<f64>,
    /// partial sums S_k of the series Σ (D_{k-1} D_k)^{-1} det[..]²
    pub partial_sums: Vec<f64>,
    /// sharp upper bounds on the mass at 0 given the first 2k+1 moments:
    /// b_k = 1/(1/r_0 + S_k)
    pub zero_mass_bounds: Vec<f64>,
    pub increment_ratios: Vec<f64>,
    pub degeneracy_rank: Option<usize>,
    pub psd_pass: bool,
    pub stieltjes_pass: bool,
    pub trend: SeriesTrend,
    pub atom_at_zero: ZeroAtomFinding,
    pub quadrature: Option<QuadratureMeasure>,
    pub noise_floor: f64,
}

fn to_rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x)
        .ok_or_else(|| Error::Numerical(format!("non-finite moment value {x}")))
}

/// Exact determinant by fraction-free Bareiss elimination.
fn exact_det(matrix: &[Vec<BigRational>]) -> BigRational {
    let n = matrix.len();
    if n == 0 {
        return BigRational::from_integer(1.into());
    }
    let mut m: Vec<Vec<BigRational>> = matrix.to_vec();
    let mut sign = 1i32;
    let mut prev = BigRational::from_integer(1.into());
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let swap = (k + 1..n).find(|&i| !m[i][k].is_zero());
            match swap {
                Some(i) => {
                    m.swap(k, i);
                    sign = -sign;
                }
                None => return BigRational::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = v;
            }
        }
        prev = m[k][k].clone();
    }
    let det = m[n - 1][n - 1].clone();
    if sign < 0 {
        -det
    } else {
        det
    }
}

fn hankel_rational(r: &[f64], shift: usize, size: usize) -> Result<Vec<Vec<BigRational>>> {
    let mut m = Vec::with_capacity(size);
    for i in 0..size {
        let mut row = Vec::with_capacity(size);
        for j in 0..size {
            row.push(to_rational(r[i + j + shift])?);
        }
        m.push(row);
    }
    Ok(m)
}

fn symmetric_min_eig_and_norm(mat: &DMatrix<f64>) -> (f64, f64) {
    let eig = mat.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let norm = eig
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max);
    (min, norm)
}

/// Report of a plain PSD test with its effective tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdReport {
    pub dim: usize,
    pub min_eig: f64,
    pub spectral_norm: f64,
    pub noise_floor: f64,
    pub pass: bool,
}

fn psd_report(mat: &DMatrix<f64>, noise_floor: f64, tols: &DecisionTolerances) -> PsdReport {
    let (min_eig, norm) = symmetric_min_eig_and_norm(mat);
    let tol = tols.tol_psd * (1.0 + norm) + noise_floor;
    PsdReport {
        dim: mat.nrows(),
        min_eig,
        spectral_norm: norm,
        noise_floor,
        pass: min_eig >= -tol,
    }
}

/// Positive-definiteness of a multi-index sequence: the moment matrix
/// `[ξ^Δ_{𝐢+𝐣}]` over multi-indices of total degree ≤ N. Requires the
/// sequence populated to total degree 2N.
pub fn multiindex_psd(
    seq: &crate::moments::MultiIndexSequence,
    max_degree: u32,
    tols: &DecisionTolerances,
) -> Result<PsdReport> {
    if 2 * max_degree > seq.max_total_degree {
        return Err(Error::Insufficient(format!(
            "PSD test at degree {max_degree} needs the sequence to total degree {}, have {}",
            2 * max_degree,
            seq.max_total_degree
        )));
    }
    let indices: Vec<Vec<u32>> = seq
        .values
        .keys()
        .filter(|idx| idx.iter().sum::<u32>() <= max_degree)
        .cloned()
        .collect();
    let dim = indices.len();
    let mut mat = DMatrix::<f64>::zeros(dim, dim);
    let mut max_se = 0.0f64;
    for (a, ia) in indices.iter().enumerate() {
        for (b, ib) in indices.iter().enumerate() {
            let sum: Vec<u32> = ia.iter().zip(ib).map(|(x, y)| x + y).collect();
            let v = seq
                .get(&sum)
                .ok_or_else(|| Error::Insufficient("sequence gap".into()))?;
            mat[(a, b)] = v.value;
            max_se = max_se.max(v.stderr);
        }
    }
    Ok(psd_report(&mat, tols.noise_multiplier * max_se * dim as f64, tols))
}

/// Stieltjes condition: PSD of the shifted Hankel `[r_{i+j+1}]`.
pub fn stieltjes_shifted_psd(
    r: &[MomentValue],
    max_degree: usize,
    tols: &DecisionTolerances,
) -> Result<PsdReport> {
    let size = max_degree + 1;
    if r.len() < 2 * size {
        return Err(Error::Insufficient(format!(
            "shifted PSD at degree {max_degree} needs {} moments, have {}",
            2 * size,
            r.len()
        )));
    }
    let mut mat = DMatrix::<f64>::zeros(size, size);
    let mut max_se = 0.0f64;
    for i in 0..size {
        for j in 0..size {
            mat[(i, j)] = r[i + j + 1].value;
            max_se = max_se.max(r[i + j + 1].stderr);
        }
    }
    Ok(psd_report(&mat, tols.noise_multiplier * max_se * size as f64, tols))
}

/// Gauss quadrature from the moments `r_0..r_{2K}` of a nonnegative
/// measure: Cholesky factorization of the Hankel matrix yields the
/// three-term recurrence, whose tridiagonal (Jacobi) operator is
/// eigendecomposed into nodes and weights. If the Hankel degenerates at
/// rank m (the measure has m atoms), the m-node exact rule is returned.
pub fn quadrature_from_moments(r: &[f64]) -> Result<QuadratureMeasure> {
    if r.len() < 3 || r.len().is_multiple_of(2) {
        return Err(Error::Insufficient(
            "quadrature needs moments r_0..r_{2K} with K ≥ 1".into(),
        ));
    }
    if r[0].is_nan() || r[0] <= 0.0 {
        return Err(Error::Numerical("r_0 must be > 0".into()));
    }
    let k_max = (r.len() - 1) / 2;
    let rank = degeneracy_rank(r, k_max, None)?.unwrap_or(k_max + 1).min(k_max);
    let m = rank.max(1);
    jacobi_quadrature(r, m)
}

/// First k at which the Hankel sequence degenerates; `None` when it stays
/// nondegenerate through `k_max`. D_k ≤ 0 exactly is degenerate; otherwise
/// the Cholesky pivot `D_k / D_{k-1}` is compared against the cutoff times
/// its matching diagonal entry `r_{2k}` (a per-entry scale; a global
/// (geomean)^{k+1} scale outgrows the true determinants of
/// factorial-growth sequences and misfires), and against the propagated
/// noise floor for empirical sequences.
fn degeneracy_rank(r: &[f64], k_max: usize, sigmas: Option<&[f64]>) -> Result<Option<usize>> {
    degeneracy_rank_with_tols(r, k_max, sigmas, &DecisionTolerances::default())
}

fn degeneracy_rank_with_tols(
    r: &[f64],
    k_max: usize,
    sigmas: Option<&[f64]>,
    tols: &DecisionTolerances,
) -> Result<Option<usize>> {
    let mut prev = BigRational::from_integer(1.into());
    for k in 0..=k_max {
        let m = hankel_rational(r, 0, k + 1)?;
        let d = exact_det(&m);
        if d.is_negative() || d.is_zero() {
            return Ok(Some(k));
        }
        let pivot = rational_to_f64(&(&d / &prev));
        let scale = r[2 * k].abs().max(1e-300);
        let mut floor = tols.degeneracy_cutoff * scale;
        if let Some(sig) = sigmas {
            let noise_d = tols.noise_multiplier * det_noise(r, sig, k);
            floor = floor.max(noise_d / rational_to_f64(&prev).max(1e-300));
        }
        if k > 0 && pivot <= floor {
            return Ok(Some(k));
        }
        prev = d;
    }
    Ok(None)
}

/// First-order propagation of per-moment noise into D_k: Σ |minor| · σ.
fn det_noise(r: &[f64], sigmas: &[f64], k: usize) -> f64 {
    let n = k + 1;
    if n == 1 {
        return sigmas.first().copied().unwrap_or(0.0);
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let sig = sigmas.get(i + j).copied().unwrap_or(0.0);
            if sig == 0.0 {
                continue;
            }
            let mut minor = DMatrix::<f64>::zeros(n - 1, n - 1);
            let mut a = 0;
            for ii in 0..n {
                if ii == i {
                    continue;
                }
                let mut b = 0;
                for jj in 0..n {
                    if jj == j {
                        continue;
                    }
                    minor[(a, b)] = r[ii + jj];
                    b += 1;
                }
                a += 1;
            }
            total += minor.determinant().abs() * sig;
        }
    }
    total
}

fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // fall back through a quotient of magnitudes for huge big-ints
        let n = x.numer().to_f64().unwrap_or(f64::MAX);
        let d = x.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

/// Build the m-node rule: partial Cholesky of the Hankel, recurrence
/// coefficients, eigen-decomposition of the Jacobi matrix.
fn jacobi_quadrature(r: &[f64], m: usize) -> Result<QuadratureMeasure> {
    // upper-triangular R with H = RᵀR, rows 0..m-1, columns 0..m
    let cols = (m + 1).min(r.len().div_ceil(2));
    let mut rmat = vec![vec![0.0f64; cols]; m];
    for i in 0..m {
        for j in i..cols {
            if i + j >= r.len() {
                // corner entry beyond the data; only reachable for the
                // unused last column of the last row
                continue;
            }
            let mut v = r[i + j];
            for row in rmat.iter().take(i) {
                v -= row[i] * row[j];
            }
            if j == i {
                if v <= 0.0 {
                    return Err(Error::Numerical(format!(
                        "Hankel factorization broke down at pivot {i} (matrix not PSD within tolerance)"
                    )));
                }
                rmat[i][j] = v.sqrt();
            } else {
                rmat[i][j] = v / rmat[i][i];
            }
        }
    }
    // recurrence: α_j = R[j][j+1]/R[j][j] − R[j-1][j]/R[j-1][j-1],
    //             β_j = R[j][j]/R[j-1][j-1]
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        let mut alpha = if j + 1 < cols { rmat[j][j + 1] / rmat[j][j] } else { 0.0 };
        if j > 0 {
            alpha -= rmat[j - 1][j] / rmat[j - 1][j - 1];
        }
        jac[(j, j)] = alpha;
        if j > 0 {
            let beta = rmat[j][j] / rmat[j - 1][j - 1];
            jac[(j, j - 1)] = beta;
            jac[(j - 1, j)] = beta;
        }
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (node, r[0] * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    refine_quadrature(r, &mut nodes, &mut weights);
    if weights.iter().any(|w| *w < -1e-12 * r[0]) {
        return Err(Error::Numerical("negative quadrature weight".into()));
    }
    Ok(QuadratureMeasure {
        nodes,
        weights: weights.into_iter().map(|w| w.max(0.0)).collect(),
    })
}

/// Newton refinement of the moment-matching system: an m-node rule must
/// reproduce r_0..r_{2m-1}, and a couple of iterations on the square
/// system squeeze out the conditioning loss of the eigen route for
/// widely-spread nodes.
fn refine_quadrature(r: &[f64], nodes: &mut [f64], weights: &mut [f64]) {
    let m = nodes.len();
    let eqs = 2 * m;
    if m == 0 || r.len() < eqs {
        return;
    }
    let residual_norm = |nodes: &[f64], weights: &[f64]| -> f64 {
        (0..eqs)
            .map(|i| {
                let est: f64 = nodes
                    .iter()
                    .zip(weights.iter())
                    .map(|(t, w)| w * t.powi(i as i32))
                    .sum();
                ((est - r[i]) / r[i].abs().max(1.0)).abs()
            })
            .fold(0.0f64, f64::max)
    };
    let mut best = residual_norm(nodes, weights);
    for _ in 0..4 {
        if best < 1e-14 {
            return;
        }
        let mut jac = DMatrix::<f64>::zeros(eqs, eqs);
        let mut rhs = nalgebra::DVector::<f64>::zeros(eqs);
        for i in 0..eqs {
            let scale = r[i].abs().max(1.0);
            let mut est = 0.0;
            for j in 0..m {
                let t = nodes[j];
                let w = weights[j];
                est += w * t.powi(i as i32);
                jac[(i, j)] = t.powi(i as i32) / scale; // ∂/∂w_j
                jac[(i, m + j)] = if i == 0 { 0.0 } else { i as f64 * w * t.powi(i as i32 - 1) / scale };
            }
            rhs[i] = (r[i] - est) / scale;
        }
        let lu = jac.lu();
        let step = match lu.solve(&rhs) {
            Some(s) => s,
            None => return,
        };
        let mut new_nodes = nodes.to_vec();
        let mut new_weights = weights.to_vec();
        for j in 0..m {
            new_weights[j] += step[j];
            new_nodes[j] += step[m + j];
        }
        let new_norm = residual_norm(&new_nodes, &new_weights);
        if new_norm < best {
            best = new_norm;
            nodes.copy_from_slice(&new_nodes);
            weights.copy_from_slice(&new_weights);
        } else {
            return;
        }
    }
}

/// Determinant-series analysis of a Stieltjes moment sequence for an
/// atom at zero of its representing measure.
///
/// For the sequence `r_0..r_{2K}` of a measure on [0, ∞):
///   - exact Hankel determinants D_k and shifted determinants;
///   - if some D_k falls beneath the degeneracy cutoff the measure is
///     finitely atomic and the quadrature node test decides;
///   - otherwise the partial sums S_k = Σ_{l≤k} det²/(D_{l-1}D_l) are the
///     reciprocals of sharp upper bounds on the mass at 0, and the
///     classification extrapolates the bound sequence b_k = 1/(1/r_0+S_k)
///     linearly in 1/k: a plateau is evidence of an atom, decay to zero
///     evidence of none. The series is classified by trend only, never
///     certified as a limit.
pub fn atom_at_zero_series(
    r: &[MomentValue],
    max_k: usize,
    tols: &DecisionTolerances,
) -> Result<HankelReport> {
    if r.is_empty() || r[0].value < 0.0 {
        return Err(Error::Numerical("atom-at-zero analysis needs r_0 ≥ 0".into()));
    }
    if r.iter().all(|m| m.value.abs() <= tols.noise_multiplier * m.stderr.max(0.0)) {
        // the zero measure: the cell is vacuous, nothing carries mass at 0
        return Ok(HankelReport {
            order: 0,
            min_eig: 0.0,
            min_eig_shifted: 0.0,
            dets: vec![r[0].value],
            shifted_dets: Vec::new(),
            partial_sums: Vec::new(),
            zero_mass_bounds: Vec::new(),
            increment_ratios: Vec::new(),
            degeneracy_rank: Some(0),
            psd_pass: true,
            stieltjes_pass: true,
            trend: SeriesTrend::Diverging,
            atom_at_zero: ZeroAtomFinding::NoAtom,
            quadrature: None,
            noise_floor: tols.noise_multiplier
                * r.iter().map(|m| m.stderr).fold(0.0f64, f64::max),
        });
    }
    if r[0].value.is_nan() || r[0].value <= 0.0 {
        return Err(Error::Numerical("atom-at-zero analysis needs r_0 > 0".into()));
    }
    let k_avail = (r.len() - 1) / 2;
    let k = max_k.min(k_avail);
    if k < 1 {
        return Err(Error::Insufficient("need moments r_0..r_2 at least".into()));
    }
    let values: Vec<f64> = r.iter().map(|m| m.value).collect();
    let sigmas: Vec<f64> = r.iter().map(|m| m.stderr).collect();
    let noisy = sigmas.iter().any(|s| *s > 0.0);
    let noise_floor = tols.noise_multiplier * sigmas.iter().cloned().fold(0.0f64, f64::max);

    // exact determinants
    let mut dets_exact: Vec<BigRational> = Vec::with_capacity(k + 1);
    for kk in 0..=k {
        dets_exact.push(exact_det(&hankel_rational(&values, 0, kk + 1)?));
    }
    let dets: Vec<f64> = dets_exact.iter().map(rational_to_f64).collect();
    let mut shifted_exact: Vec<BigRational> = Vec::with_capacity(k);
    for kk in 1..=k {
        shifted_exact.push(exact_det(&hankel_rational(&values, 1, kk)?));
    }
    let shifted_dets: Vec<f64> = shifted_exact.iter().map(rational_to_f64).collect();

    // degeneracy scan with the caller's cutoff
    let degeneracy_rank = degeneracy_rank_with_tols(
        &values[..2 * k + 1],
        k,
        if noisy { Some(&sigmas) } else { None },
        tols,
    )?;

    // PSD flags (full Hankel and shifted) at the largest usable order
    let full_dim = k + 1;
    let mut full = DMatrix::<f64>::zeros(full_dim, full_dim);
    for i in 0..full_dim {
        for j in 0..full_dim {
            full[(i, j)] = values[i + j];
        }
    }
    let psd = psd_report(&full, noise_floor * full_dim as f64, tols);
    let shift_dim = (values.len() - 1) / 2;
    let mut shifted = DMatrix::<f64>::zeros(shift_dim, shift_dim);
    for i in 0..shift_dim {
        for j in 0..shift_dim {
            shifted[(i, j)] = values[i + j + 1];
        }
    }
    let stieltjes = psd_report(&shifted, noise_floor * shift_dim as f64, tols);

    let mut report = HankelReport {
        order: k,
        min_eig: psd.min_eig,
        min_eig_shifted: stieltjes.min_eig,
        dets,
        shifted_dets,
        partial_sums: Vec::new(),
        zero_mass_bounds: Vec::new(),
        increment_ratios: Vec::new(),
        degeneracy_rank,
        psd_pass: psd.pass,
        stieltjes_pass: stieltjes.pass,
        trend: SeriesTrend::Inconclusive,
        atom_at_zero: ZeroAtomFinding::Undetermined,
        quadrature: None,
        noise_floor,
    };

    if let Some(rank) = degeneracy_rank {
        // finitely-atomic mode: the series criterion is 0/0 beyond the
        // rank; the equivalent node test decides.
        if rank == 0 {
            // measure is numerically zero
            report.atom_at_zero = ZeroAtomFinding::NoAtom;
            report.trend = SeriesTrend::Diverging;
            return Ok(report);
        }
        let quad = jacobi_quadrature(&values, rank)?;
        report.atom_at_zero = match quad.node_at_zero() {
            Some((_, w)) => ZeroAtomFinding::Atom { mass: w, degenerate: true },
            None => ZeroAtomFinding::NoAtom,
        };
        report.trend = match report.atom_at_zero {
            ZeroAtomFinding::Atom { .. } => SeriesTrend::Converging {
                plateau: match report.atom_at_zero {
                    ZeroAtomFinding::Atom { mass, .. } => mass,
                    _ => unreachable!(),
                },
            },
            _ => SeriesTrend::Diverging,
        };
        report.quadrature = Some(quad);
        return Ok(report);
    }

    // nondegenerate: exact partial sums and zero-mass bounds
    let r0 = to_rational(values[0])?;
    let mut s = BigRational::from_integer(1.into()) / r0;
    let mut sums = Vec::with_capacity(k);
    let mut bounds = Vec::with_capacity(k);
    let mut terms = Vec::with_capacity(k);
    for kk in 1..=k {
        let num = &shifted_exact[kk - 1] * &shifted_exact[kk - 1];
        let term = num / (&dets_exact[kk - 1] * &dets_exact[kk]);
        terms.push(rational_to_f64(&term));
        s += term;
        sums.push(rational_to_f64(&s) - 1.0 / values[0]);
        bounds.push(rational_to_f64(&(BigRational::from_integer(1.into()) / &s)));
    }
    report.increment_ratios = terms
        .windows(2)
        .map(|p| if p[0] != 0.0 { p[1] / p[0] } else { f64::INFINITY })
        .collect();
    report.partial_sums = sums;
    report.zero_mass_bounds = bounds.clone();

    // extrapolate b_k against 1/k over the last (up to) five points
    let take = bounds.len().min(5);
    if bounds.len() >= 3 {
        let us: Vec<f64> = (k - take + 1..=k).map(|kk| 1.0 / kk as f64).collect();
        let ys: Vec<f64> = bounds[bounds.len() - take..].to_vec();
        let (_, intercept) = crate::special::linear_fit(&us, &ys);
        let rel = intercept / values[0];
        report.trend = if rel >= ATOM_PLATEAU_REL {
            SeriesTrend::Converging { plateau: intercept.max(0.0) }
        } else if rel <= NOATOM_PLATEAU_REL {
            SeriesTrend::Diverging
        } else {
            SeriesTrend::Inconclusive
        };
    }
    report.atom_at_zero = match report.trend {
        SeriesTrend::Converging { plateau } => {
            ZeroAtomFinding::Atom { mass: plateau, degenerate: false }
        }
        SeriesTrend::Diverging => ZeroAtomFinding::NoAtom,
        SeriesTrend::Inconclusive => ZeroAtomFinding::Undetermined,
    };
    report.quadrature = jacobi_quadrature(&values, k).ok();
    Ok(report)
}

/// Carleman partial sums Σ_k r_{2k}^{-1/(2k)} with a divergence-trend
/// classification (harmonic-or-slower decay of the terms diverges).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CarlemanReport {
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub trend: SeriesTrend,
}

pub fn carleman_check(r: &[f64], max_k: usize) -> Result<CarlemanReport> {
    let mut terms = Vec::new();
    for k in 1..=max_k {
        let idx = 2 * k;
        if idx >= r.len() {
            break;
        }
        if r[idx].is_nan() || r[idx] <= 0.0 {
            return Err(Error::Numerical(format!("even moment r_{idx} must be > 0")));
        }
        terms.push(r[idx].powf(-1.0 / (2.0 * k as f64)));
    }
    if terms.len() < 2 {
        return Err(Error::Insufficient("Carleman check needs ≥ 2 terms".into()));
    }
    let mut sums = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for t in &terms {
        acc += t;
        sums.push(acc);
    }
    // scaled ratios q_k = (t_{k+1}/t_k)·(k+1)/k: ≥ 1 means the terms decay
    // no faster than harmonically, so the sum keeps growing.
    let mut scaled = Vec::new();
    for (k, pair) in terms.windows(2).enumerate() {
        let k1 = (k + 1) as f64;
        scaled.push(pair[1] / pair[0] * (k1 + 1.0) / k1);
    }
    let tail = &scaled[scaled.len().saturating_sub(2)..];
    let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let raw_tail = terms[terms.len() - 1] / terms[terms.len() - 2];
    let trend = if tail_mean >= 0.95 {
        SeriesTrend::Diverging
    } else if raw_tail <= 0.8 {
        SeriesTrend::Converging { plateau: f64::NAN }
    } else {
        SeriesTrend::Inconclusive
    };
    Ok(CarlemanReport { terms, partial_sums: sums, trend })
}
