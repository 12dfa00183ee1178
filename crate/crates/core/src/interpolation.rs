//! Interpolation of the grid estimates into a bounded volatility curve σᵇ on
//! `[x_1, x_M]`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A volatility curve defined on a closed price interval.
pub trait VolCurve: Sync {
    fn domain(&self) -> (f64, f64);

    /// Value at `x`; errors outside the domain.
    fn eval(&self, x: f64) -> Result<f64>;

    fn check_domain(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if x >= lo && x <= hi {
            Ok(())
        } else {
            Err(Error::OutOfDomain { x, lo, hi })
        }
    }
}

fn validate_knots(knots: &[(f64, f64)], min_len: usize) -> Result<()> {
    if knots.len() < min_len {
        return Err(Error::invalid(format!("need at least {min_len} knots, got {}", knots.len())));
    }
    for (i, &(x, s)) in knots.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::invalid(format!("knot {i} has non-finite abscissa")));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositive { x, value: s });
        }
        if i > 0 && x <= knots[i - 1].0 {
            return Err(Error::BadKnots(i));
        }
    }
    Ok(())
}

/// Natural cubic spline (zero second derivative at both ends).
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn new(knots: &[(f64, f64)]) -> Result<Self> {
        validate_knots(knots, 2)?;
        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let n = xs.len();
        let mut second = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives.
            let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
            }
            for i in 1..m {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                rhs[i] -= w * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - h[i + 1] * second[i + 2]) / diag[i];
            }
        }
        Ok(CubicSpline { xs, ys, second })
    }

    pub fn knots(&self) -> Vec<(f64, f64)> {
        self.xs.iter().copied().zip(self.ys.iter().copied()).collect()
    }

    fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = self.xs.partition_point(|&k| k <= x).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let (a, b) = (x1 - x, x - x0);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        m0 * a.powi(3) / (6.0 * h)
            + m1 * b.powi(3) / (6.0 * h)
            + (self.ys[i] / h - m0 * h / 6.0) * a
            + (self.ys[i + 1] / h - m1 * h / 6.0) * b
    }
}

impl VolCurve for CubicSpline {
    fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn eval(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.value(x))
    }
}

/// First-order Sobolev (Laplace) kernel `exp(−τ|u − v|)/(2τ)` on the
/// normalized coordinate `u = (x − x_1)/(x_M − x_1)`.
pub fn sobolev_kernel(u: f64, v: f64, tau: f64) -> f64 {
    (-tau * (u - v).abs()).exp() / (2.0 * tau)
}

/// Ceiling on the Gram condition estimate before a solve is refused.
pub const MAX_CONDITION: f64 = 1e14;

/// Solves a symmetric positive definite system by Cholesky factorization of
/// the unit-diagonal rescaled matrix, with one round of iterative refinement.
/// The condition estimate is taken on the rescaled matrix.
pub(crate) fn solve_spd(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = gram.nrows();
    if (0..n).any(|i| !(gram[(i, i)] > 0.0)) {
        return Err(Error::SingularGram(f64::INFINITY));
    }
    let scale = DVector::from_fn(n, |i, _| 1.0 / gram[(i, i)].sqrt());
    let scaled = DMatrix::from_fn(n, n, |i, j| gram[(i, j)] * scale[i] * scale[j]);
    let eig = scaled.clone().symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularGram(cond));
    }
    let chol = scaled.clone().cholesky().ok_or(Error::SingularGram(cond))?;
    let b = rhs.component_mul(&scale);
    let mut sol = chol.solve(&b);
    let residual = &b - &scaled * &sol;
    sol += chol.solve(&residual);
    Ok(sol.component_mul(&scale))
}

/// Exact kernel interpolant `Σ a_j K(u, u_j; τ) + b_0 + b_1·u` through the
/// knots, with side conditions `Σ a_j = Σ a_j u_j = 0`.
///
/// Between knots the curve solves `f'' = τ² (f − trend)`: it tends to the
/// broken line as `τ → 0` and relaxes toward the affine trend (rather than
/// toward zero, as the bare kernel sum would) as `τ` grows. A single knot uses
/// a constant trend only.
#[derive(Debug, Clone, PartialEq)]
pub struct RkhsInterpolant {
    xs: Vec<f64>,
    ys: Vec<f64>,
    weights: Vec<f64>,
    trend: Vec<f64>,
    tau: f64,
    origin: f64,
    scale: f64,
}

impl RkhsInterpolant {
    pub fn new(knots: &[(f64, f64)], tau: f64) -> Result<Self> {
        validate_knots(knots, 1)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let n = xs.len();
        let origin = xs[0];
        let scale = if n > 1 { xs[n - 1] - xs[0] } else { 1.0 };
        let us: Vec<f64> = xs.iter().map(|x| (x - origin) / scale).collect();
        let gram = DMatrix::from_fn(n, n, |i, j| sobolev_kernel(us[i], us[j], tau));
        let degree = if n > 1 { 2 } else { 1 };
        let basis = DMatrix::from_fn(n, degree, |i, j| us[i].powi(j as i32));
        let y = DVector::from_column_slice(&ys);

        // Schur complement on the trend block: b = (Pᵀ K⁻¹ P)⁻¹ Pᵀ K⁻¹ y, a = K⁻¹ (y − P b)
        let k_inv_y = solve_spd(&gram, &y)?;
        let mut k_inv_p = DMatrix::zeros(n, degree);
        for j in 0..degree {
            k_inv_p.set_column(j, &solve_spd(&gram, &basis.column(j).into_owned())?);
        }
        let schur = basis.transpose() * &k_inv_p;
        let trend = solve_spd(&schur, &(basis.transpose() * &k_inv_y))?;
        let weights = solve_spd(&gram, &(&y - &basis * &trend))?;

        let fitted = &gram * &weights + &basis * &trend;
        let worst = fitted.iter().zip(&ys).map(|(f, y)| ((f - y) / y).abs()).fold(0.0, f64::max);
        if !(worst < 1e-10) {
            return Err(Error::Residual(worst));
        }
        Ok(RkhsInterpolant {
            xs,
            ys,
            weights: weights.iter().copied().collect(),
            trend: trend.iter().copied().collect(),
            tau,
            origin,
            scale,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Kernel weights `a_j`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Trend coefficients `(b_0, b_1)` in the normalized coordinate.
    pub fn trend(&self) -> &[f64] {
        &self.trend
    }

    pub fn knots(&self) -> Vec<(f64, f64)> {
        self.xs.iter().copied().zip(self.ys.iter().copied()).collect()
    }

    fn value(&self, x: f64) -> f64 {
        let u = (x - self.origin) / self.scale;
        let kernel: f64 = self
            .xs
            .iter()
            .zip(&self.weights)
            .map(|(xj, a)| a * sobolev_kernel(u, (xj - self.origin) / self.scale, self.tau))
            .sum();
        let trend: f64 = self.trend.iter().enumerate().map(|(j, b)| b * u.powi(j as i32)).sum();
        kernel + trend
    }
}

impl VolCurve for RkhsInterpolant {
    fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn eval(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.value(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpolatorKind {
    Spline,
    #[default]
    Rkhs,
}

impl fmt::Display for InterpolatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InterpolatorKind::Spline => "spline",
            InterpolatorKind::Rkhs => "rkhs",
        })
    }
}

impl FromStr for InterpolatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spline" => Ok(InterpolatorKind::Spline),
            "rkhs" => Ok(InterpolatorKind::Rkhs),
            other => Err(Error::invalid(format!("unknown interpolator `{other}`"))),
        }
    }
}

/// The interpolated σᵇ actually used downstream.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundedCurve {
    Spline(CubicSpline),
    Rkhs(RkhsInterpolant),
}

/// Evaluation points for the positivity guard.
pub const POSITIVITY_MESH: usize = 512;

impl BoundedCurve {
    pub fn cubic_spline(knots: &[(f64, f64)]) -> Result<Self> {
        Ok(BoundedCurve::Spline(CubicSpline::new(knots)?))
    }

    pub fn rkhs(knots: &[(f64, f64)], tau: f64) -> Result<Self> {
        Ok(BoundedCurve::Rkhs(RkhsInterpolant::new(knots, tau)?))
    }

    /// Builds the requested interpolant. A kernel interpolant whose Gram
    /// matrix is too ill-conditioned falls back to the spline.
    pub fn build(knots: &[(f64, f64)], kind: InterpolatorKind, tau: f64) -> Result<Self> {
        let curve = match kind {
            InterpolatorKind::Spline => Self::cubic_spline(knots)?,
            InterpolatorKind::Rkhs => match Self::rkhs(knots, tau) {
                Err(Error::SingularGram(_)) if knots.len() >= 2 => Self::cubic_spline(knots)?,
                other => other?,
            },
        };
        curve.check_positive(POSITIVITY_MESH)?;
        Ok(curve)
    }

    pub fn kind(&self) -> InterpolatorKind {
        match self {
            BoundedCurve::Spline(_) => InterpolatorKind::Spline,
            BoundedCurve::Rkhs(_) => InterpolatorKind::Rkhs,
        }
    }

    /// Errors if any value on a uniform `mesh`-point grid over the domain is ≤ 0.
    pub fn check_positive(&self, mesh: usize) -> Result<()> {
        for x in uniform_mesh(self.domain(), mesh) {
            let v = self.eval(x)?;
            if !(v > 0.0) {
                return Err(Error::NonPositive { x, value: v });
            }
        }
        Ok(())
    }
}

impl VolCurve for BoundedCurve {
    fn domain(&self) -> (f64, f64) {
        match self {
            BoundedCurve::Spline(c) => c.domain(),
            BoundedCurve::Rkhs(c) => c.domain(),
        }
    }

    fn eval(&self, x: f64) -> Result<f64> {
        match self {
            BoundedCurve::Spline(c) => c.eval(x),
            BoundedCurve::Rkhs(c) => c.eval(x),
        }
    }
}

/// `count` equally spaced points from `lo` to `hi` inclusive.
pub fn uniform_mesh((lo, hi): (f64, f64), count: usize) -> impl Iterator<Item = f64> {
    let count = count.max(1);
    let step = if count > 1 { (hi - lo) / (count - 1) as f64 } else { 0.0 };
    (0..count).map(move |i| if i + 1 == count { hi } else { lo + i as f64 * step })
}
