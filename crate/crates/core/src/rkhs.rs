//! Extrapolation of f = 1/σ² to the whole half-line.
//!
//! The space is `H_n` (functions on `[0, ∞)` whose first `n − 1` scaled
//! derivatives `x^k f^(k)(x)` vanish at infinity) with inner product
//!
//! ```text
//! <f, g> = ∫₀^∞ (yⁿ f⁽ⁿ⁾(y)/n!) (yⁿ g⁽ⁿ⁾(y)/n!) yᵐ dy
//! ```
//!
//! Writing `f` through its Taylor remainder at infinity gives the reproducing
//! kernel
//!
//! ```text
//! q(x, y) = n² ∫_{x∨y}^∞ [(v − x)(v − y)]ⁿ⁻¹ v^(−2n−m) dv
//!         = n² B(m+1, n) (x∨y)^(−(m+1)) ₂F₁(1−n, m+1; n+m+1; (x∧y)/(x∨y)),
//! ```
//!
//! so every interpolant `Σ cᵢ q(xᵢ, ·)` decays like
//! `n² B(m+1, n) Σcᵢ · x^(−(m+1))` and σ grows like `x^((1+m)/2)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolation::{solve_spd, uniform_mesh, VolCurve};
use crate::optimize::scan_then_golden;
use crate::special::{beta_fn, hyp2f1_terminating};

/// Kernel residual tolerance, relative to each knot value.
pub const RESIDUAL_TOL: f64 = 1e-9;

pub fn kernel_q(n: u32, m: f64, x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::invalid(format!("kernel arguments must be positive, got ({x}, {y})")));
    }
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::invalid(format!("weight exponent m must be non-negative, got {m}")));
    }
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    let nf = n as f64;
    let prefactor = nf * nf * beta_fn(m + 1.0, nf)?;
    Ok(prefactor * hi.powf(-(m + 1.0)) * hyp2f1_terminating(n, m, lo / hi)?)
}

/// `(x, σ)` pairs to knot abscissae and `f = 1/σ²` values.
pub fn reciprocal_variance(knots: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    knots.iter().map(|&(x, s)| (x, 1.0 / (s * s))).unzip()
}

fn validate(knots: &[f64], values: &[f64], n: u32) -> Result<()> {
    if knots.is_empty() {
        return Err(Error::invalid("no knots to extrapolate from"));
    }
    if knots.len() != values.len() {
        return Err(Error::invalid(format!("{} knots but {} values", knots.len(), values.len())));
    }
    if n == 0 {
        return Err(Error::invalid("smoothness index n must be at least 1"));
    }
    for (i, (&x, &f)) in knots.iter().zip(values).enumerate() {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::invalid(format!("knot {i} must be positive, got {x}")));
        }
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::NonPositive { x, value: f });
        }
        if i > 0 && x <= knots[i - 1] {
            return Err(Error::BadKnots(i));
        }
    }
    Ok(())
}

/// Coefficients `c` with `Σᵢ cᵢ q(xᵢ, x_k) = f_k` for every knot.
pub fn solve_coefficients(knots: &[f64], values: &[f64], n: u32, m: f64) -> Result<Vec<f64>> {
    validate(knots, values, n)?;
    let len = knots.len();
    let mut gram = DMatrix::zeros(len, len);
    for i in 0..len {
        for j in i..len {
            let q = kernel_q(n, m, knots[i], knots[j])?;
            gram[(i, j)] = q;
            gram[(j, i)] = q;
        }
    }
    let c = solve_spd(&gram, &DVector::from_column_slice(values))?;
    let fitted = &gram * &c;
    let worst = fitted
        .iter()
        .zip(values)
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0, f64::max);
    if !(worst < RESIDUAL_TOL) {
        return Err(Error::Residual(worst));
    }
    Ok(c.iter().copied().collect())
}

/// Exact interpolant of `f = 1/σ²` in `H_{n,m}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationModel {
    pub n: u32,
    pub m: f64,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl ExtrapolationModel {
    pub fn fit(knots: &[f64], values: &[f64], n: u32, m: f64) -> Result<Self> {
        let coefficients = solve_coefficients(knots, values, n, m)?;
        Ok(ExtrapolationModel { n, m, knots: knots.to_vec(), values: values.to_vec(), coefficients })
    }

    pub fn last_knot(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn first_knot(&self) -> f64 {
        self.knots[0]
    }

    /// `Σ cᵢ q(xᵢ, x)` without any sign check.
    pub fn f(&self, x: f64) -> Result<f64> {
        self.knots.iter().zip(&self.coefficients).try_fold(0.0, |acc, (&xi, &c)| {
            Ok(acc + c * kernel_q(self.n, self.m, xi, x)?)
        })
    }

    /// `(f(x), σ(x))`, erroring where `f` is not positive.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let f = self.f(x)?;
        if !(f > 0.0) {
            return Err(Error::NonPositive { x, value: f });
        }
        Ok((f, f.powf(-0.5)))
    }

    pub fn sigma(&self, x: f64) -> Result<f64> {
        self.eval(x).map(|(_, s)| s)
    }

    pub fn coefficient_sum(&self) -> f64 {
        self.coefficients.iter().sum()
    }

    /// `lim x^(m+1) f(x) = n² B(m+1, n) Σcᵢ`.
    pub fn asymptotic_limit(&self) -> Result<f64> {
        let sum = self.coefficient_sum();
        if !(sum > 0.0) {
            return Err(Error::NoPositiveTail(sum));
        }
        let nf = self.n as f64;
        Ok(nf * nf * beta_fn(self.m + 1.0, nf)? * sum)
    }

    /// `∫_split^∞ x f(x) dx` in closed form, `None` when it diverges
    /// (`m ≤ 1`). Beyond the last knot each `q(xᵢ, x)` is a finite sum of
    /// powers `x^(−(m+1)−k)`, so the tail integrates term by term.
    pub fn tail_moment(&self, split: f64) -> Result<Option<f64>> {
        if !(split >= self.last_knot()) {
            return Err(Error::invalid(format!("split {split} below last knot {}", self.last_knot())));
        }
        if self.m <= 1.0 {
            return Ok(None);
        }
        let (n, m) = (self.n as f64, self.m);
        let (a, b, c) = (1.0 - n, m + 1.0, n + m + 1.0);
        let mut total = 0.0;
        let mut term = 1.0;
        for k in 0..self.n {
            let k = k as f64;
            if k > 0.0 {
                let j = k - 1.0;
                term *= (a + j) * (b + j) / ((c + j) * k);
            }
            let moment: f64 = self.knots.iter().zip(&self.coefficients).map(|(&xi, &ci)| ci * xi.powf(k)).sum();
            total += term * moment * split.powf(1.0 - m - k) / (m + k - 1.0);
        }
        Ok(Some(n * n * beta_fn(m + 1.0, n)? * total))
    }

    /// Largest relative deviation from the input knot values.
    pub fn knot_residual(&self) -> Result<f64> {
        self.knots.iter().zip(&self.values).try_fold(0.0f64, |worst, (&x, &v)| {
            Ok(worst.max(((self.f(x)? - v) / v).abs()))
        })
    }
}

/// Settings for the weight-exponent search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MSearch {
    pub range: (f64, f64),
    /// Quadrature points on the last third of the bounded interval.
    pub mesh: usize,
    /// Coarse-scan candidates before golden-section refinement.
    pub scan_points: usize,
    /// Tail positivity is checked on `[x_M, tail_factor · x_M]`.
    pub tail_factor: f64,
}

impl Default for MSearch {
    fn default() -> Self {
        MSearch { range: (0.5, 25.0), mesh: 200, scan_points: 50, tail_factor: 10.0 }
    }
}

/// One row of the `(m, J(m))` scan table. `objective` is `None` for
/// infeasible candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MScan {
    pub m: f64,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub m: f64,
    pub objective: f64,
    pub model: ExtrapolationModel,
    pub scan: Vec<MScan>,
}

const TAIL_CHECK_POINTS: usize = 200;

/// `[lo + (2/3)(hi − lo), hi]`.
pub fn last_third((lo, hi): (f64, f64)) -> (f64, f64) {
    (lo + 2.0 / 3.0 * (hi - lo), hi)
}

/// L² distance between the extrapolated σ and `sigma_b` on the last third of
/// the bounded interval, by the trapezoid rule on `mesh` points. `None` when
/// the candidate is infeasible.
pub fn objective(
    model: &ExtrapolationModel,
    sigma_b: &dyn VolCurve,
    mesh: usize,
    tail_factor: f64,
) -> Option<f64> {
    if !(model.coefficient_sum() > 0.0) {
        return None;
    }
    let x_top = model.last_knot();
    let tail = (x_top, tail_factor * x_top);
    for x in uniform_mesh(tail, TAIL_CHECK_POINTS) {
        if !(model.f(x).ok()? > 0.0) {
            return None;
        }
    }
    let (a, b) = last_third(sigma_b.domain());
    let mesh = mesh.max(2);
    let h = (b - a) / (mesh - 1) as f64;
    let mut acc = 0.0;
    for (i, x) in uniform_mesh((a, b), mesh).enumerate() {
        let d = model.sigma(x).ok()? - sigma_b.eval(x).ok()?;
        let w = if i == 0 || i + 1 == mesh { 0.5 } else { 1.0 };
        acc += w * d * d;
    }
    Some((acc * h).sqrt())
}

/// Chooses `m` so the exact interpolant's σ is closest to `sigma_b` on the
/// last third of its domain.
pub fn optimize_m(
    knots: &[f64],
    values: &[f64],
    n: u32,
    sigma_b: &dyn VolCurve,
    search: MSearch,
) -> Result<Optimized> {
    validate(knots, values, n)?;
    let (lo, hi) = search.range;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::invalid(format!("weight range [{lo}, {hi}] must be a non-empty subset of (0, ∞)")));
    }
    let (dlo, dhi) = sigma_b.domain();
    if knots.iter().any(|&x| x < dlo - 1e-9 * dlo.abs() || x > dhi + 1e-9 * dhi.abs()) {
        return Err(Error::invalid("knots fall outside the bounded curve's domain"));
    }
    let score = |m: f64| {
        let model = ExtrapolationModel::fit(knots, values, n, m).ok()?;
        objective(&model, sigma_b, search.mesh, search.tail_factor)
    };
    let (m, objective, samples) = scan_then_golden(score, lo, hi, search.scan_points, 1e-6)?;
    let model = ExtrapolationModel::fit(knots, values, n, m)?;
    let scan = samples.into_iter().map(|s| MScan { m: s.x, objective: s.value }).collect();
    Ok(Optimized { m, objective, model, scan })
}
