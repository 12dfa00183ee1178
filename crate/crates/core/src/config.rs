//! Run configuration: defaults, flat `key = value` files, and overrides.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::interpolation::InterpolatorKind;
use crate::market_data::PriceField;
use crate::rkhs::MSearch;
pub use crate::vol_estimator::EstimatorKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub field: PriceField,
    pub time_span: f64,
    pub estimator: EstimatorKind,
    pub confidence: f64,
    pub min_visits: usize,
    /// Keep at most this many leading grid points after the reliability filter.
    pub max_points: Option<usize>,
    pub interpolator: InterpolatorKind,
    pub tau: f64,
    pub smoothness: u32,
    pub m_min: f64,
    pub m_max: f64,
    pub mesh: usize,
    pub scan_points: usize,
    pub epsilon: f64,
    /// Lower limit `a` of the integral test; the first knot when unset.
    pub lower_bound: Option<f64>,
    /// The integral is split at `split_factor · x_M`.
    pub split_factor: f64,
    pub seed: u64,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            field: PriceField::Open,
            time_span: 1.0,
            estimator: EstimatorKind::Zmirou,
            confidence: 0.95,
            min_visits: 2,
            max_points: None,
            interpolator: InterpolatorKind::Rkhs,
            tau: 6.0,
            smoothness: 1,
            m_min: 0.5,
            m_max: 25.0,
            mesh: 200,
            scan_points: 50,
            epsilon: 0.05,
            lower_bound: None,
            split_factor: 10.0,
            seed: 0,
            output: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value `{value}` for `{key}`")))
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value {
        "" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

impl RunConfig {
    /// Sets one key. Keys match the field names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "field" => self.field = value.parse()?,
            "time_span" => self.time_span = parse(key, value)?,
            "estimator" => self.estimator = value.parse()?,
            "confidence" => self.confidence = parse(key, value)?,
            "min_visits" => self.min_visits = parse(key, value)?,
            "max_points" => self.max_points = optional(key, value)?,
            "interpolator" => self.interpolator = value.parse()?,
            "tau" => self.tau = parse(key, value)?,
            "smoothness" | "n" => self.smoothness = parse(key, value)?,
            "m_min" => self.m_min = parse(key, value)?,
            "m_max" => self.m_max = parse(key, value)?,
            "mesh" => self.mesh = parse(key, value)?,
            "scan_points" => self.scan_points = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "lower_bound" => self.lower_bound = optional(key, value)?,
            "split_factor" => self.split_factor = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            other => return Err(Error::invalid(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a flat config file: one `key = value` per line, `#` comments.
    pub fn apply_file_contents(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected `key = value`, got `{line}`") })?;
            self.set(key, value).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if !(self.time_span > 0.0) {
            return bad(format!("time_span must be positive, got {}", self.time_span));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad(format!("confidence must lie in (0, 1), got {}", self.confidence));
        }
        if self.min_visits == 0 {
            return bad("min_visits must be at least 1".into());
        }
        if self.max_points == Some(0) {
            return bad("max_points must be at least 1".into());
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.smoothness == 0 {
            return bad("smoothness must be at least 1".into());
        }
        if !(self.m_min > 0.0 && self.m_min < self.m_max && self.m_max.is_finite()) {
            return bad(format!("m range [{}, {}] must be a non-empty subset of (0, ∞)", self.m_min, self.m_max));
        }
        if self.mesh < 2 || self.scan_points < 3 {
            return bad("mesh needs at least 2 points and the scan at least 3".into());
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon must be non-negative, got {}", self.epsilon));
        }
        if let Some(a) = self.lower_bound {
            if !(a > 0.0) {
                return bad(format!("lower_bound must be positive, got {a}"));
            }
        }
        if !(self.split_factor >= 1.0) {
            return bad(format!("split_factor must be at least 1, got {}", self.split_factor));
        }
        Ok(())
    }

    pub fn m_search(&self) -> MSearch {
        MSearch {
            range: (self.m_min, self.m_max),
            mesh: self.mesh,
            scan_points: self.scan_points,
            tail_factor: self.split_factor,
        }
    }
}
