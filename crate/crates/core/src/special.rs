//! Euler Beta function and the terminating Gauss hypergeometric series used by
//! the extrapolation kernel.

use crate::error::{Error, Result};

// Lanczos approximation, g = 7, n = 9 (Godfrey's coefficients).
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // reflection keeps the series in its accurate half-plane
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn small_positive_integer(v: f64) -> Option<u32> {
    if v.fract() == 0.0 && (1.0..=64.0).contains(&v) {
        Some(v as u32)
    } else {
        None
    }
}

/// Euler Beta function B(a, b) = Γ(a)Γ(b)/Γ(a+b).
///
/// When either argument is a small positive integer the finite product
/// B(a, k) = (k−1)! / (a (a+1) ⋯ (a+k−1)) is used, which is exact up to
/// rounding. Otherwise the log-gamma route is taken.
pub fn beta_fn(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid(format!("beta_fn requires a, b > 0 (got {a}, {b})")));
    }
    let (a, k) = match (small_positive_integer(b), small_positive_integer(a)) {
        (Some(k), _) => (a, Some(k)),
        (None, Some(k)) => (b, Some(k)),
        (None, None) => (a, None),
    };
    match k {
        Some(k) => {
            let mut value = 1.0;
            for j in 0..k {
                value *= (j.max(1)) as f64 / (a + j as f64);
            }
            Ok(value)
        }
        None => Ok((ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()),
    }
}

/// ₂F₁(1−n, m+1; n+m+1; z) as the finite sum of its `n` non-zero terms.
pub fn hyp2f1_terminating(n: u32, m: f64, z: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("smoothness index n must be at least 1"));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::invalid(format!("hypergeometric argument {z} outside [0, 1]")));
    }
    let a = 1.0 - n as f64;
    let b = m + 1.0;
    let c = n as f64 + m + 1.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..(n - 1) {
        let k = k as f64;
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
        sum += term;
    }
    Ok(sum)
}
