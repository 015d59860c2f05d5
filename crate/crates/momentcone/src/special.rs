//! Scalar special functions used by the samplers and analytic moment
//! formulas: the exponential integral E1 and its inverse on the positive
//! axis, plus small numeric helpers shared across modules.

/// Euler-Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E1(x) = ∫_x^∞ t^{-1} e^{-t} dt` for `x > 0`.
///
/// Power series for small arguments, modified-Lentz continued fraction
/// otherwise. Relative accuracy is ~1e-15 over (0, 700].
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0 && x.is_finite(), "E1 requires x > 0, got {x}");
    if x <= 1.0 {
        // E1(x) = -γ - ln x + Σ_{k≥1} (-1)^{k+1} x^k / (k·k!)
        let mut sum = 0.0_f64;
        let mut term = 1.0_f64;
        for k in 1..200 {
            let kf = k as f64;
            term *= -x / kf;
            let contrib = -term / kf;
            sum += contrib;
            if contrib.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() + sum
    } else {
        // E1(x) = e^{-x} / (x + 1 - 1²/(x + 3 - 2²/(x + 5 - ...)))
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..200 {
            let a = -(i as f64) * (i as f64);
            b += 2.0;
            d = a * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x).exp() * h
    }
}

/// Inverse of E1 on (0, ∞): returns `t` with `E1(t) = y`.
///
/// Bisection on a bracket grown from `lo`; the iteration stops when the
/// bracket width falls below 1e-12 in absolute terms.
pub fn inverse_exp_integral_e1(y: f64, lo_hint: f64) -> f64 {
    assert!(y > 0.0, "inverse E1 requires y > 0");
    let mut lo = lo_hint.max(1e-300);
    // E1 is strictly decreasing; make sure the bracket contains the root.
    while exp_integral_e1(lo) < y {
        lo *= 0.5;
        if lo < 1e-280 {
            return lo;
        }
    }
    let mut hi = lo.max(1.0);
    while exp_integral_e1(hi) > y {
        hi *= 2.0;
        if hi > 710.0 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if exp_integral_e1(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Pairwise (cascade) summation. Gives a platform-stable, order-fixed
/// reduction for Monte Carlo means regardless of how the inputs were
/// produced in parallel.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Mean together with the delete-1 jackknife standard error.
///
/// For the plain mean the jackknife reduces to sqrt(Σ(x-x̄)²/(S(S-1))),
/// but the replicate form is kept so the same helper serves ratio-type
/// statistics later.
pub fn mean_and_jackknife_se(xs: &[f64]) -> (f64, f64) {
    let s = xs.len();
    if s == 0 {
        return (f64::NAN, f64::NAN);
    }
    let total = pairwise_sum(xs);
    let mean = total / s as f64;
    if s == 1 {
        return (mean, 0.0);
    }
    let mut ssq = 0.0;
    for &x in xs {
        let leave_out = (total - x) / (s as f64 - 1.0);
        let d = leave_out - mean;
        ssq += d * d;
    }
    let se = ((s as f64 - 1.0) / s as f64 * ssq).sqrt();
    (mean, se)
}

/// Least-squares fit of `y = slope·u + intercept`.
pub fn linear_fit(us: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(us.len(), ys.len());
    let n = us.len() as f64;
    let su: f64 = us.iter().sum();
    let sy: f64 = ys.iter().sum();
    let suu: f64 = us.iter().map(|u| u * u).sum();
    let suy: f64 = us.iter().zip(ys).map(|(u, y)| u * y).sum();
    let denom = n * suu - su * su;
    if denom.abs() < 1e-300 {
        return (0.0, sy / n);
    }
    let slope = (n * suy - su * sy) / denom;
    let intercept = (sy - slope * su) / n;
    (slope, intercept)
}
