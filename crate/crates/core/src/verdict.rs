//! Tail-power classification and the integral test for ∫ₐ^∞ x/σ²(x) dx.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_pieces, Tolerance};
use crate::rkhs::ExtrapolationModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Bubble,
    NoBubble,
    Indeterminate,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Bubble => "Bubble",
            Classification::NoBubble => "NoBubble",
            Classification::Indeterminate => "Indeterminate",
        })
    }
}

/// σ(x) ~ C·x^α with α = (1 + m)/2.
pub fn alpha_from_m(m: f64) -> f64 {
    (1.0 + m) / 2.0
}

/// Bubble iff α > 1 + ε, no bubble iff α < 1 − ε.
pub fn classify(alpha: f64, epsilon: f64) -> Classification {
    if alpha > 1.0 + epsilon {
        Classification::Bubble
    } else if alpha < 1.0 - epsilon {
        Classification::NoBubble
    } else {
        Classification::Indeterminate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralTest {
    pub finite: bool,
    /// ∫ₐ^∞ x f(x) dx when finite; the bounded part ∫ₐ^split otherwise.
    pub value: f64,
    pub lower: f64,
    pub split: f64,
}

/// Numerically integrates `x·f(x)` on `[a, split]` and closes the tail
/// exactly; finite iff `m > 1`.
pub fn integral_test(model: &ExtrapolationModel, a: f64, split: f64) -> Result<IntegralTest> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("lower bound must be positive, got {a}")));
    }
    if !(split >= model.last_knot()) {
        return Err(Error::invalid(format!("split {split} below last knot {}", model.last_knot())));
    }
    model.asymptotic_limit()?;
    let split = split.max(a);
    let mut points = vec![a];
    points.extend(model.knots.iter().copied().filter(|&x| x > a && x < split));
    points.push(split);
    let checked = std::cell::Cell::new(None::<Error>);
    let integrand = |x: f64| {
        let f = model.f(x).unwrap_or(f64::NAN);
        if !(f > 0.0) {
            checked.set(Some(Error::NonPositive { x, value: f }));
            return 0.0;
        }
        x * f
    };
    let tol = Tolerance { abs: 1e-300, rel: 1e-10, max_intervals: 20_000 };
    let bounded = integrate_pieces(integrand, &points, tol)?.value;
    if let Some(e) = checked.take() {
        return Err(e);
    }
    match model.tail_moment(split)? {
        Some(tail) => Ok(IntegralTest { finite: true, value: bounded + tail, lower: a, split }),
        None => Ok(IntegralTest { finite: false, value: bounded, lower: a, split }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub alpha: f64,
    pub classification: Classification,
    pub band: f64,
    pub integral_finite: bool,
    pub integral_value: f64,
    pub lower_bound: f64,
    pub split: f64,
}

pub fn decide(model: &ExtrapolationModel, epsilon: f64, lower: f64, split: f64) -> Result<Verdict> {
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let alpha = alpha_from_m(model.m);
    let test = integral_test(model, lower, split)?;
    Ok(Verdict {
        alpha,
        classification: classify(alpha, epsilon),
        band: epsilon,
        integral_finite: test.finite,
        integral_value: test.value,
        lower_bound: lower,
        split: test.split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::quadrature::integrate;

    #[test]
    fn alpha_values() {
        assert!((alpha_from_m(9.42) - 5.21).abs() < 1e-12);
        assert!((alpha_from_m(7.8543) - 4.42715).abs() < 1e-12);
        assert_eq!(alpha_from_m(1.0), 1.0);
    }

    #[test]
    fn classification_bands() {
        assert_eq!(classify(5.21, 0.05), Classification::Bubble);
        assert_eq!(classify(1.0, 0.05), Classification::Indeterminate);
        assert_eq!(classify(0.5, 0.05), Classification::NoBubble);
        assert_eq!(classify(1.0, 0.0), Classification::Indeterminate);
        assert_eq!(classify(1.0 + 1e-9, 0.0), Classification::Bubble);
    }

    fn power_model(m: f64) -> ExtrapolationModel {
        // single first-order knot: f(x) = x^(−(m+1)) for x ≥ 1
        let q = crate::rkhs::kernel_q(1, m, 1.0, 1.0).unwrap();
        ExtrapolationModel { n: 1, m, knots: vec![1.0], values: vec![1.0], coefficients: vec![1.0 / q] }
    }

    #[test]
    fn sigma_linear_diverges() {
        // σ(x) = x ⇒ f = x⁻², m = 1
        let t = integral_test(&power_model(1.0), 1.0, 10.0).unwrap();
        assert!(!t.finite);
    }

    #[test]
    fn sigma_three_halves_integrates_to_one() {
        // σ = x^1.5 ⇒ f = x⁻³, m = 2; ∫₁^∞ x⁻² dx = 1
        let t = integral_test(&power_model(2.0), 1.0, 10.0).unwrap();
        assert!(t.finite);
        assert_relative_eq!(t.value, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn bad_bounds() {
        let m = power_model(2.0);
        assert!(integral_test(&m, 0.0, 10.0).is_err());
        assert!(integral_test(&m, 1.0, 0.5).is_err());
    }

    #[test]
    fn lower_bound_past_split() {
        let t = integral_test(&power_model(3.0), 50.0, 10.0).unwrap();
        // ∫₅₀^∞ x⁻³ dx
        assert_relative_eq!(t.value, 1.0 / (2.0 * 2500.0), max_relative = 1e-9);
    }

    #[test]
    fn tail_is_closed_exactly() {
        // ∫₁^∞ x·x^(−4) dx = 1/2
        let t = integral_test(&power_model(3.0), 1.0, 1.0).unwrap();
        assert!(t.finite);
        assert_relative_eq!(t.value, 0.5, max_relative = 1e-12);
        let t = integral_test(&power_model(3.0), 1.0, 10.0).unwrap();
        assert_relative_eq!(t.value, 0.5, max_relative = 1e-10);
    }

    #[test]
    fn second_order_tail_matches_quadrature() {
        let model = ExtrapolationModel::fit(&[1.0, 2.0, 3.0], &[1.0, 0.2, 0.07], 2, 4.0).unwrap();
        let exact = model.tail_moment(3.0).unwrap().unwrap();
        let tol = Tolerance { abs: 1e-300, rel: 1e-12, max_intervals: 4000 };
        let near = integrate(|x| x * model.f(x).unwrap(), 3.0, 3e4, tol).unwrap().value;
        let far = model.asymptotic_limit().unwrap() * 3e4f64.powf(-3.0) / 3.0;
        assert_relative_eq!(exact, near + far, max_relative = 1e-8);
    }
}
