//! Local-time estimates of the squared diffusion coefficient σ²(x) on a
//! bandwidth-driven price grid.
//!
//! With `n` observations the normalized half-width is `h = n^(-1/3)`, which
//! keeps `n·h → ∞`, `n·h² → ∞` and `n·h⁴ → 0` simultaneously. Grid centers sit
//! at `min + (2k − 1)·h·(max − min)` for `k = 1..K`, `K = ⌈1/(2h)⌉ + 1`, so the
//! bands `|x − x_k| < h·(max − min)` tile the observed range without overlap
//! and the last center may fall above the observed maximum.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::market_data::PriceSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Indicator-kernel local-time estimator.
    #[default]
    Zmirou,
    /// Triangular-kernel weighted variant with the same bandwidth.
    Smoothed,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Zmirou => "zmirou",
            EstimatorKind::Smoothed => "smoothed",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zmirou" => Ok(EstimatorKind::Zmirou),
            "smoothed" => Ok(EstimatorKind::Smoothed),
            other => Err(Error::invalid(format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    centers: Vec<f64>,
    half_width: f64,
    half_width_price: f64,
}

impl GridSpec {
    /// Grid from explicit centers. `half_width` is normalized by `price_range`.
    pub fn custom(centers: Vec<f64>, half_width: f64, price_range: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid("grid needs at least one center"));
        }
        if !(half_width > 0.0 && half_width < 1.0) {
            return Err(Error::invalid(format!("normalized half-width {half_width} outside (0, 1)")));
        }
        if !(price_range > 0.0 && price_range.is_finite()) {
            return Err(Error::invalid(format!("price range must be positive, got {price_range}")));
        }
        if centers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid centers must be strictly ascending"));
        }
        Ok(GridSpec { centers, half_width, half_width_price: half_width * price_range })
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn half_width_price(&self) -> f64 {
        self.half_width_price
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Normalized bandwidth `n^(-1/3)`.
pub fn bandwidth(n: usize) -> f64 {
    1.0 / (n as f64).cbrt()
}

pub fn build_grid(series: &PriceSeries) -> Result<GridSpec> {
    let n = series.len();
    if n < 8 {
        return Err(Error::invalid(format!("grid needs at least 8 observations, got {n}")));
    }
    let (lo, hi) = (series.min(), series.max());
    if hi <= lo {
        return Err(Error::invalid("constant series has no price range to grid"));
    }
    let h = bandwidth(n);
    let range = hi - lo;
    // cbrt of a perfect cube can land one ulp off; do not let that add a point
    let count = ((0.5 / h) - 1e-9).ceil() as usize + 1;
    let centers = (1..=count).map(|k| lo + (2 * k - 1) as f64 * h * range).collect();
    GridSpec::custom(centers, h, range)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub center: f64,
    /// Observations (excluding the last) strictly inside the band.
    pub visits: usize,
    /// Sum of kernel weights; equals `visits` for the indicator kernel.
    pub weight: f64,
    pub sigma_sq: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilityEstimate {
    pub estimator: EstimatorKind,
    pub points: Vec<GridPoint>,
}

impl VolatilityEstimate {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(center, σ)` pairs for every estimated point.
    pub fn sigma_knots(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.sigma_sq.map(|s| (p.center, s.sqrt())))
            .collect()
    }

    /// Sets each point's `reliable` flag from its visit count.
    pub fn flag_reliability(mut self, min_visits: usize) -> Self {
        for p in &mut self.points {
            p.reliable = p.visits >= min_visits && p.sigma_sq.is_some();
        }
        self
    }

    /// Keeps only the first `count` grid points.
    pub fn truncate(mut self, count: usize) -> Self {
        self.points.truncate(count);
        self
    }
}

fn estimate_with<K: Fn(f64) -> f64>(
    series: &PriceSeries,
    grid: &GridSpec,
    estimator: EstimatorKind,
    kernel: K,
) -> VolatilityEstimate {
    let prices = series.prices();
    let dt = series.dt();
    let hw = grid.half_width_price();
    let points = grid
        .centers()
        .iter()
        .map(|&center| {
            let mut visits = 0usize;
            let mut weight = 0.0;
            let mut acc = 0.0;
            for w in prices.windows(2) {
                let d = (w[0] - center).abs();
                if d < hw {
                    let k = kernel(d / hw);
                    visits += 1;
                    weight += k;
                    acc += k * (w[1] - w[0]).powi(2) / dt;
                }
            }
            let sigma_sq = (weight > 0.0).then(|| acc / weight);
            GridPoint { center, visits, weight, sigma_sq, ci_low: None, ci_high: None, reliable: false }
        })
        .collect();
    VolatilityEstimate { estimator, points }
}

/// Average of normalized squared increments over in-band visits.
pub fn zmirou_estimate(series: &PriceSeries, grid: &GridSpec) -> VolatilityEstimate {
    estimate_with(series, grid, EstimatorKind::Zmirou, |_| 1.0)
}

/// Triangular-kernel weighted average, `w = max(0, 1 − |S_i − x|/h)`.
pub fn smoothed_estimate(series: &PriceSeries, grid: &GridSpec) -> VolatilityEstimate {
    estimate_with(series, grid, EstimatorKind::Smoothed, |u| (1.0 - u).max(0.0))
}

pub fn estimate(series: &PriceSeries, grid: &GridSpec, kind: EstimatorKind) -> VolatilityEstimate {
    match kind {
        EstimatorKind::Zmirou => zmirou_estimate(series, grid),
        EstimatorKind::Smoothed => smoothed_estimate(series, grid),
    }
}

/// Normal-approximation interval `σ̂²·(1 ± z·√(2/N))`, lower end clamped at 0.
/// `N` is the kernel weight (visit count for the indicator kernel).
pub fn confidence_interval(mut est: VolatilityEstimate, level: f64) -> Result<VolatilityEstimate> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level {level} outside (0, 1)")));
    }
    let z = Normal::standard().inverse_cdf(0.5 * (1.0 + level));
    for p in &mut est.points {
        match p.sigma_sq {
            Some(s) if p.weight > 0.0 => {
                let spread = z * (2.0 / p.weight).sqrt();
                p.ci_low = Some(s * (1.0 - spread).max(0.0));
                p.ci_high = Some(s * (1.0 + spread));
            }
            _ => {
                p.ci_low = None;
                p.ci_high = None;
            }
        }
    }
    Ok(est)
}

/// Longest prefix of grid points with at least `min_visits` visits each.
pub fn reliability_filter(est: &VolatilityEstimate, min_visits: usize) -> Result<VolatilityEstimate> {
    if min_visits == 0 {
        return Err(Error::invalid("min_visits must be at least 1"));
    }
    let points: Vec<GridPoint> = est
        .points
        .iter()
        .take_while(|p| p.visits >= min_visits && p.sigma_sq.is_some())
        .cloned()
        .map(|mut p| {
            p.reliable = true;
            p
        })
        .collect();
    if points.is_empty() {
        return Err(Error::NoReliablePoints { min_visits });
    }
    Ok(VolatilityEstimate { estimator: est.estimator, points })
}
