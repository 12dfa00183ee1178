//! Stage orchestration over an output directory.
//!
//! Each `run_*` function reads the files earlier stages left in `dir` and
//! writes its own, so the stages can be run one at a time or all at once with
//! [`run_detect`]. Errors carry the name of the failing stage.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result, StageError, StageExt};
use crate::interpolation::{uniform_mesh, BoundedCurve, CubicSpline, InterpolatorKind, RkhsInterpolant, VolCurve, POSITIVITY_MESH};
use crate::io;
use crate::market_data::{PriceSeries, SeriesSummary};
use crate::rkhs::{optimize_m, reciprocal_variance, Optimized};
use crate::verdict::{decide, Verdict};
use crate::vol_estimator::{build_grid, confidence_interval, estimate, reliability_filter, EstimatorKind, VolatilityEstimate};

pub const SCHEMA_VERSION: u32 = 1;

/// Extrapolated samples cover `[x_1, EXTRAPOLATION_SPAN · x_M]`.
pub const EXTRAPOLATION_SPAN: f64 = 2.0;
const EXTRAPOLATION_POINTS: usize = 200;

pub type StageResult<T> = std::result::Result<T, StageError>;

/// Grid, estimate, confidence intervals and reliability flags.
pub fn estimate_series(series: &PriceSeries, cfg: &RunConfig) -> Result<VolatilityEstimate> {
    let series = series.rescale_time(cfg.time_span)?;
    let grid = build_grid(&series)?;
    let est = estimate(&series, &grid, cfg.estimator);
    Ok(confidence_interval(est, cfg.confidence)?.flag_reliability(cfg.min_visits))
}

/// `(x, σ)` knots: the reliable prefix, capped at `max_points`.
pub fn select_knots(est: &VolatilityEstimate, cfg: &RunConfig) -> Result<Vec<(f64, f64)>> {
    let mut kept = reliability_filter(est, cfg.min_visits)?;
    if let Some(max) = cfg.max_points {
        kept = kept.truncate(max);
    }
    Ok(kept.sigma_knots())
}

pub fn bounded_curve(knots: &[(f64, f64)], cfg: &RunConfig) -> Result<BoundedCurve> {
    BoundedCurve::build(knots, cfg.interpolator, cfg.tau)
}

/// Both interpolants sampled on the positivity mesh, for plotting.
pub fn curve_samples(knots: &[(f64, f64)], cfg: &RunConfig) -> Vec<io::CurveRow> {
    let spline = CubicSpline::new(knots).ok();
    let rkhs = RkhsInterpolant::new(knots, cfg.tau).ok();
    let domain = (knots[0].0, knots[knots.len() - 1].0);
    uniform_mesh(domain, POSITIVITY_MESH)
        .map(|x| {
            (
                x,
                spline.as_ref().and_then(|c| c.eval(x).ok()),
                rkhs.as_ref().and_then(|c| c.eval(x).ok()),
            )
        })
        .collect()
}

pub fn extrapolate(knots: &[(f64, f64)], curve: &BoundedCurve, cfg: &RunConfig) -> Result<Optimized> {
    let (xs, fs) = reciprocal_variance(knots);
    optimize_m(&xs, &fs, cfg.smoothness, curve, cfg.m_search())
}

pub fn extrapolation_samples(opt: &Optimized, curve: &BoundedCurve) -> Result<Vec<io::ExtrapolationRow>> {
    let model = &opt.model;
    let span = (model.first_knot(), EXTRAPOLATION_SPAN * model.last_knot());
    uniform_mesh(span, EXTRAPOLATION_POINTS)
        .map(|x| {
            let (f, s) = model.eval(x)?;
            Ok((x, f, s, curve.eval(x).ok()))
        })
        .collect()
}

pub fn verdict_for(model: &crate::rkhs::ExtrapolationModel, cfg: &RunConfig) -> Result<Verdict> {
    let lower = cfg.lower_bound.unwrap_or(model.first_knot());
    decide(model, cfg.epsilon, lower, cfg.split_factor * model.last_knot())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub estimator: EstimatorKind,
    pub grid_points: usize,
    pub knots: usize,
    pub smoothness: u32,
    pub m: f64,
    pub interpolator: InterpolatorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub m: f64,
    pub coefficient_sum: f64,
    pub asymptotic_limit: f64,
    pub knot_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Files {
    pub summary: String,
    pub estimate: String,
    pub curve: String,
    pub mscan: String,
    pub extrapolation: String,
    pub model: String,
}

impl Default for Files {
    fn default() -> Self {
        Files {
            summary: io::SUMMARY_FILE.into(),
            estimate: io::ESTIMATE_FILE.into(),
            curve: io::CURVE_FILE.into(),
            mscan: io::MSCAN_FILE.into(),
            extrapolation: io::EXTRAPOLATION_FILE.into(),
            model: io::MODEL_FILE.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub generated_at: String,
    pub data: SeriesSummary,
    pub config: RunConfig,
    pub provenance: Provenance,
    pub model: ModelSummary,
    pub verdict: Verdict,
    pub files: Files,
}

pub fn parse_report_json(text: &str) -> Result<Report> {
    let report: Report = serde_json::from_str(text)
        .map_err(|e| Error::Schema { file: io::REPORT_FILE.into(), msg: e.to_string() })?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema {
            file: io::REPORT_FILE.into(),
            msg: format!("schema version {} (expected {SCHEMA_VERSION})", report.schema_version),
        });
    }
    Ok(report)
}

pub fn build_report(
    data: SeriesSummary,
    est: &VolatilityEstimate,
    model: &crate::rkhs::ExtrapolationModel,
    verdict: Verdict,
    interpolator: InterpolatorKind,
    cfg: &RunConfig,
) -> Result<Report> {
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        data,
        config: cfg.clone(),
        provenance: Provenance {
            estimator: cfg.estimator,
            grid_points: est.len(),
            knots: model.knots.len(),
            smoothness: model.n,
            m: model.m,
            interpolator,
        },
        model: ModelSummary {
            m: model.m,
            coefficient_sum: model.coefficient_sum(),
            asymptotic_limit: model.asymptotic_limit()?,
            knot_residual: model.knot_residual()?,
        },
        verdict,
        files: Files::default(),
    })
}

fn load_estimate(dir: &Path, cfg: &RunConfig) -> Result<VolatilityEstimate> {
    io::parse_estimate_csv(&io::read(dir, io::ESTIMATE_FILE)?, cfg.estimator)
}

/// Writes `summary.json` and `estimate.csv`.
pub fn run_estimate(series: &PriceSeries, cfg: &RunConfig, dir: &Path) -> StageResult<VolatilityEstimate> {
    const STAGE: &str = "estimate";
    cfg.validate().stage(STAGE)?;
    let est = estimate_series(series, cfg).stage(STAGE)?;
    io::write(dir, io::SUMMARY_FILE, &io::summary_json(&series.summary()).stage(STAGE)?).stage(STAGE)?;
    io::write(dir, io::ESTIMATE_FILE, &io::estimate_csv(&est).stage(STAGE)?).stage(STAGE)?;
    Ok(est)
}

/// Reads `estimate.csv`, writes `curve.csv`.
pub fn run_interpolate(cfg: &RunConfig, dir: &Path) -> StageResult<BoundedCurve> {
    const STAGE: &str = "interpolate";
    cfg.validate().stage(STAGE)?;
    let est = load_estimate(dir, cfg).stage(STAGE)?;
    let knots = select_knots(&est, cfg).stage(STAGE)?;
    let curve = bounded_curve(&knots, cfg).stage(STAGE)?;
    io::write(dir, io::CURVE_FILE, &io::curve_csv(&curve_samples(&knots, cfg)).stage(STAGE)?).stage(STAGE)?;
    Ok(curve)
}

/// Reads `estimate.csv`, writes `mscan.csv`, `extrapolation.csv` and `model.json`.
pub fn run_extrapolate(cfg: &RunConfig, dir: &Path) -> StageResult<Optimized> {
    const STAGE: &str = "extrapolate";
    cfg.validate().stage(STAGE)?;
    let est = load_estimate(dir, cfg).stage(STAGE)?;
    let knots = select_knots(&est, cfg).stage(STAGE)?;
    let curve = bounded_curve(&knots, cfg).stage(STAGE)?;
    let opt = extrapolate(&knots, &curve, cfg).stage(STAGE)?;
    io::write(dir, io::MSCAN_FILE, &io::mscan_csv(&opt.scan).stage(STAGE)?).stage(STAGE)?;
    let samples = extrapolation_samples(&opt, &curve).stage(STAGE)?;
    io::write(dir, io::EXTRAPOLATION_FILE, &io::extrapolation_csv(&samples).stage(STAGE)?).stage(STAGE)?;
    io::write(dir, io::MODEL_FILE, &io::model_json(&opt.model).stage(STAGE)?).stage(STAGE)?;
    Ok(opt)
}

/// Reads `summary.json`, `estimate.csv` and `model.json`, writes `report.json`.
pub fn run_report(cfg: &RunConfig, dir: &Path) -> StageResult<Report> {
    const STAGE: &str = "report";
    cfg.validate().stage(STAGE)?;
    let summary = io::read(dir, io::SUMMARY_FILE).and_then(|t| io::parse_summary_json(&t)).stage(STAGE)?;
    let est = load_estimate(dir, cfg).stage(STAGE)?;
    let model = io::read(dir, io::MODEL_FILE).and_then(|t| io::parse_model_json(&t)).stage(STAGE)?;
    let knots = select_knots(&est, cfg).stage(STAGE)?;
    let kind = bounded_curve(&knots, cfg).stage(STAGE)?.kind();
    let verdict = verdict_for(&model, cfg).stage(STAGE)?;
    let report = build_report(summary, &est, &model, verdict, kind, cfg).stage(STAGE)?;
    io::write(dir, io::REPORT_FILE, &io::to_json(&report).stage(STAGE)?).stage(STAGE)?;
    Ok(report)
}

/// All stages in order.
pub fn run_detect(series: &PriceSeries, cfg: &RunConfig, dir: &Path) -> StageResult<Report> {
    run_estimate(series, cfg, dir)?;
    run_interpolate(cfg, dir)?;
    run_extrapolate(cfg, dir)?;
    run_report(cfg, dir)
}
