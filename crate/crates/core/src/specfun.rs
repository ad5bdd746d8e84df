//! Special functions on the real parameter ranges needed by the sphere
//! potential formulas: `ln Γ`, the digamma function `ψ`, the regularized
//! incomplete beta function `I_x(a, b)` and the regularized Gauss
//! hypergeometric function `₂F̃₁(a, b; c; z) = ₂F₁(a, b; c; z) / Γ(c)`.
//!
//! All functions are pure and deterministic.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{domain, Result};

/// Euler–Mascheroni constant γ.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

/// `ln √(2π)`.
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_8;

/// Number of terms of the Taylor series of `ln Γ(1 + z)` / `ln Γ(2 + z)`.
const LNGAMMA_SERIES_TERMS: usize = 48;

/// Below this argument the Stirling series is replaced by reduction to `[1.5, 2.5)`.
const STIRLING_THRESHOLD: f64 = 15.0;

/// `ζ(k) − 1` for `k = 0..LNGAMMA_SERIES_TERMS` (entries 0 and 1 unused).
///
/// Computed once by Euler–Maclaurin summation of `Σ n^{-k}`, `n ≥ 2`, which
/// is accurate to a few ulps for every `k ≥ 2`.
fn zeta_minus_one() -> &'static [f64; LNGAMMA_SERIES_TERMS] {
    static TABLE: OnceLock<[f64; LNGAMMA_SERIES_TERMS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        // Bernoulli numbers B_2 .. B_12.
        const BERNOULLI: [f64; 6] = [
            1.0 / 6.0,
            -1.0 / 30.0,
            1.0 / 42.0,
            -1.0 / 30.0,
            5.0 / 66.0,
            -691.0 / 2730.0,
        ];
        const N: usize = 20;
        let n = N as f64;
        let mut table = [0.0; LNGAMMA_SERIES_TERMS];
        for (k, slot) in table.iter_mut().enumerate().skip(2) {
            let kf = k as f64;
            // Tail correction first (smallest terms), then the explicit sum
            // from the largest index downwards.
            let mut tail = 0.0;
            let mut rising = kf; // (k)_{2j-1}
            let mut factorial = 2.0; // (2j)!
            for (j, b) in BERNOULLI.iter().enumerate() {
                let j1 = (j + 1) as f64;
                if j > 0 {
                    rising *= (kf + 2.0 * j1 - 3.0) * (kf + 2.0 * j1 - 2.0);
                    factorial *= (2.0 * j1 - 1.0) * (2.0 * j1);
                }
                tail += b / factorial * rising * n.powf(-kf - 2.0 * j1 + 1.0);
            }
            let mut sum = tail + n.powf(1.0 - kf) / (kf - 1.0) + 0.5 * n.powf(-kf);
            for m in (2..N).rev() {
                sum += (m as f64).powf(-kf);
            }
            *slot = sum;
        }
        table
    })
}

/// `Σ_{k≥2} (−1)^k (ζ(k) − 1) z^k / k` for `|z| ≤ 1/2`.
fn lngamma_series(z: f64) -> f64 {
    let zeta = zeta_minus_one();
    let mut acc = 0.0;
    for k in (2..LNGAMMA_SERIES_TERMS).rev() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc = acc * z + sign * zeta[k] / k as f64;
    }
    acc * z * z
}

/// `ln Γ(2 + z)` for `z ∈ [−1/2, 1/2]`, accurate relative to the result
/// even near the zero at `z = 0`.
fn lngamma_near_two(z: f64) -> f64 {
    z * (1.0 - EULER_GAMMA) + lngamma_series(z)
}

/// Natural logarithm of the gamma function for `x > 0`.
///
/// Small arguments are reduced to a Taylor expansion about `2` whose
/// coefficients are `ζ(k) − 1`; this keeps full relative accuracy around the
/// zeros at `x = 1` and `x = 2`. Large arguments use the Stirling series.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(
            "ln_gamma",
            format!("x = {x} must be positive and finite"),
        ));
    }
    Ok(ln_gamma_positive(x))
}

pub(crate) fn ln_gamma_positive(x: f64) -> f64 {
    if x < 0.5 {
        // ln Γ(x) = ln Γ(x + 1) − ln x with x + 1 ∈ (1, 1.5).
        return ln_gamma_positive(x + 1.0) - x.ln();
    }
    if x < 1.5 {
        // ln Γ(x) = ln Γ(x + 1) − ln x, with x + 1 = 2 + z and z = x − 1.
        let z = x - 1.0;
        return lngamma_near_two(z) - z.ln_1p();
    }
    if x < 2.5 {
        return lngamma_near_two(x - 2.0);
    }
    if x < STIRLING_THRESHOLD {
        // Γ(x) = (x−1)(x−2)…(x−n) Γ(x−n) with x − n ∈ [1.5, 2.5).
        let mut y = x;
        let mut product = 1.0;
        while y >= 2.5 {
            y -= 1.0;
            product *= y;
        }
        return product.ln() + lngamma_near_two(y - 2.0);
    }
    stirling(x)
}

fn stirling(x: f64) -> f64 {
    // Coefficients B_{2k} / (2k (2k − 1)).
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    for c in C.iter().rev() {
        series = series * inv2 + c;
    }
    (x - 0.5) * x.ln() - x + LN_SQRT_2PI + series * inv
}

/// Reciprocal gamma function `1/Γ(x)`, an entire function: it vanishes at
/// the non-positive integers and is finite everywhere.
pub fn rgamma(x: f64) -> f64 {
    if x > 0.0 {
        return (-ln_gamma_positive(x)).exp();
    }
    let nearest = x.round();
    if x == nearest {
        return 0.0;
    }
    // Reflection: 1/Γ(x) = sin(πx) Γ(1 − x) / π.
    sin_pi(x) * ln_gamma_positive(1.0 - x).exp() / PI
}

/// `sin(πx)` with exact reduction of the integer part.
fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let r = x - n;
    let s = (PI * r).sin();
    if (n as i64) % 2 == 0 {
        s
    } else {
        -s
    }
}

/// `Γ(a) / Γ(b)` for positive `a`, `b`.
///
/// When `a − b` is an integer of moderate size the ratio is formed as an
/// exact product, so identities such as `Γ(1/2)/Γ(3/2) = 2` hold to the ulp.
pub fn gamma_ratio(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(domain(
            "gamma_ratio",
            format!("arguments ({a}, {b}) must be positive"),
        ));
    }
    let diff = a - b;
    if diff == diff.round() && diff.abs() <= 64.0 {
        let n = diff.abs() as usize;
        let (low, invert) = if diff >= 0.0 { (b, false) } else { (a, true) };
        let mut product = 1.0;
        for k in 0..n {
            product *= low + k as f64;
        }
        return Ok(if invert { 1.0 / product } else { product });
    }
    Ok((ln_gamma_positive(a) - ln_gamma_positive(b)).exp())
}

/// Digamma function `ψ(x) = Γ'(x)/Γ(x)` for `x > 0`.
///
/// Upward recurrence to `x ≥ 10` followed by the asymptotic expansion.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(
            "digamma",
            format!("x = {x} must be positive and finite"),
        ));
    }
    let mut y = x;
    let mut shift = 0.0;
    while y < 10.0 {
        shift += 1.0 / y;
        y += 1.0;
    }
    // −Σ B_{2k} / (2k y^{2k}).
    const C: [f64; 7] = [
        -1.0 / 12.0,
        1.0 / 120.0,
        -1.0 / 252.0,
        1.0 / 240.0,
        -1.0 / 132.0,
        691.0 / 32_760.0,
        -1.0 / 12.0,
    ];
    let inv2 = 1.0 / (y * y);
    let mut series = 0.0;
    for c in C.iter().rev() {
        series = series * inv2 + c;
    }
    Ok(y.ln() - 0.5 / y + series * inv2 - shift)
}

/// `ln B(a, b)`.
fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma_positive(a) + ln_gamma_positive(b) - ln_gamma_positive(a + b)
}

/// Regularized incomplete beta function
///
/// ```text
///              1      ⌠x
/// I_x(a, b) = ─────── │  u^{a−1} (1 − u)^{b−1} du
///             B(a, b) ⌡0
/// ```
///
/// evaluated by the Lentz continued fraction, applied to `I_x(a, b)` or to
/// `1 − I_{1−x}(b, a)` depending on which side of the mean `x` lies.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(domain(
            "reg_inc_beta",
            format!("parameters a = {a}, b = {b} must be positive"),
        ));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(domain("reg_inc_beta", format!("x = {x} outside [0, 1]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(1.0 - x, b, a) / b
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 10_000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized Gauss hypergeometric function
/// `₂F̃₁(a, b; c; z) = Σ_k (a)_k (b)_k z^k / (k! Γ(c + k))` for `z ∈ [0, 1)`.
///
/// The series is summed term by term with the reciprocal gamma factor
/// carried inside each term, so it stays finite when `c` approaches a pole
/// of `Γ`. Summation stops once a geometric bound on the remaining tail
/// falls below machine precision relative to the partial sum.
pub fn reg_hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&z) {
        return Err(domain("reg_hyp2f1", format!("z = {z} outside [0, 1)")));
    }
    if !a.is_finite() || !b.is_finite() || !c.is_finite() {
        return Err(domain("reg_hyp2f1", "non-finite parameter"));
    }
    const MAX_TERMS: usize = 200_000;

    // Index of the first term with non-zero reciprocal gamma. For c a
    // non-positive integer the leading terms vanish identically.
    let start = if c <= 0.0 && c == c.round() {
        (1.0 - c) as usize
    } else {
        0
    };
    // Pochhammer/factorial part of the starting term.
    let mut coeff = 1.0;
    for k in 0..start {
        let k = k as f64;
        coeff *= (a + k) * (b + k) * z / (k + 1.0);
    }
    if coeff == 0.0 && start > 0 {
        return Ok(0.0);
    }
    let mut term = coeff * rgamma(c + start as f64);
    let mut sum = term;
    let mut compensation = 0.0;
    let mut k = start as f64;
    for _ in start..MAX_TERMS {
        let ratio = (a + k) * (b + k) * z / ((k + 1.0) * (c + k));
        term *= ratio;
        k += 1.0;
        // Neumaier summation.
        let t = sum + term;
        if sum.abs() >= term.abs() {
            compensation += (sum - t) + term;
        } else {
            compensation += (term - t) + sum;
        }
        sum = t;
        if term == 0.0 {
            break;
        }
        // Geometric tail bound once the ratio has settled below one.
        let rho = ratio.abs().max(z);
        if k > (a.abs() + b.abs() + c.abs() + 2.0) && rho < 1.0 {
            let tail = term.abs() * rho / (1.0 - rho);
            if tail <= 1e-17 * (sum + compensation).abs() {
                break;
            }
        }
    }
    Ok(sum + compensation)
}
