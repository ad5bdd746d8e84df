//! Independent numerical oracles shared by the integration tests.
//!
//! Nothing here calls into the library's own quadrature or special-function
//! code, so agreement with the library is a genuine cross-check.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

/// Double-exponential (tanh-sinh) quadrature of `f` over `[a, b]`.
///
/// The integrand receives `(x, x − a, b − x)`, with both distances computed
/// without cancellation, so integrable endpoint singularities can be written
/// in terms of the exact distance to the endpoint.
pub fn tanh_sinh(f: impl Fn(f64, f64, f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mut previous = f64::NAN;
    let mut h = 0.25;
    for _level in 0..10 {
        let mut sum = 0.0;
        let kmax = (6.5 / h) as i64;
        for k in -kmax..=kmax {
            let x = k as f64 * h;
            let u = FRAC_PI_2 * x.sinh();
            let weight = FRAC_PI_2 * x.cosh() / u.cosh().powi(2);
            // 1 − tanh|u| without cancellation.
            let gap = half / (u.abs().exp() * u.abs().cosh());
            if gap == 0.0 || weight == 0.0 {
                continue;
            }
            let (y, left, right) = if u >= 0.0 {
                (b - gap, 2.0 * half - gap, gap)
            } else {
                (a + gap, gap, 2.0 * half - gap)
            };
            let v = f(y, left, right);
            if v.is_finite() {
                sum += weight * v;
            }
        }
        let estimate = sum * h * half;
        if (estimate - previous).abs() <= 1e-14 * estimate.abs().max(1e-300) {
            return estimate;
        }
        previous = estimate;
        h *= 0.5;
    }
    previous
}

/// Relative difference `|a − b| / max(|b|, tiny)`.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
