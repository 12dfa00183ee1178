//! On-disk formats for stage outputs.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! read back reproduces the in-memory values bit for bit. Every reader checks
//! the exact header before parsing rows.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::SeriesSummary;
use crate::rkhs::{ExtrapolationModel, MScan};
use crate::vol_estimator::{EstimatorKind, GridPoint, VolatilityEstimate};

pub const SUMMARY_FILE: &str = "summary.json";
pub const ESTIMATE_FILE: &str = "estimate.csv";
pub const CURVE_FILE: &str = "curve.csv";
pub const MSCAN_FILE: &str = "mscan.csv";
pub const EXTRAPOLATION_FILE: &str = "extrapolation.csv";
pub const MODEL_FILE: &str = "model.json";
pub const REPORT_FILE: &str = "report.json";

pub const ESTIMATE_HEADER: [&str; 6] = ["center", "visits", "sigma_sq", "ci_low", "ci_high", "reliable"];
pub const CURVE_HEADER: [&str; 3] = ["x", "sigma_spline", "sigma_rkhs"];
pub const MSCAN_HEADER: [&str; 3] = ["m", "objective", "feasible"];
pub const EXTRAPOLATION_HEADER: [&str; 4] = ["x", "f", "sigma", "sigma_b"];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn schema(file: &str, msg: impl Into<String>) -> Error {
    Error::Schema { file: file.to_string(), msg: msg.into() }
}

fn check_header(file: &str, reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let found: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if found != expected {
        return Err(schema(file, format!("expected header {expected:?}, found {found:?}")));
    }
    Ok(())
}

fn parse_f64(file: &str, line: usize, col: &str, raw: &str) -> Result<f64> {
    raw.parse().map_err(|_| schema(file, format!("line {line}: bad {col} `{raw}`")))
}

fn parse_opt(file: &str, line: usize, col: &str, raw: &str) -> Result<Option<f64>> {
    if raw.is_empty() {
        Ok(None)
    } else {
        parse_f64(file, line, col, raw).map(Some)
    }
}

fn check_point(p: &GridPoint) -> std::result::Result<(), String> {
    if !(p.center.is_finite()) {
        return Err("non-finite center".into());
    }
    match (p.sigma_sq, p.ci_low, p.ci_high) {
        (None, None, None) => {
            if p.visits > 0 {
                return Err(format!("center {}: visited but not estimated", p.center));
            }
            if p.reliable {
                return Err(format!("center {}: unestimated point flagged reliable", p.center));
            }
        }
        (Some(s), lo, hi) => {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(format!("center {}: sigma_sq {s} invalid", p.center));
            }
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if !(lo >= 0.0 && lo <= s && s <= hi) {
                    return Err(format!("center {}: interval [{lo}, {hi}] does not bracket {s}", p.center));
                }
            } else if lo.is_some() != hi.is_some() {
                return Err(format!("center {}: half-open interval", p.center));
            }
        }
        (None, _, _) => return Err(format!("center {}: interval without estimate", p.center)),
    }
    Ok(())
}

pub fn estimate_csv(est: &VolatilityEstimate) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ESTIMATE_HEADER)?;
    let mut prev = f64::NEG_INFINITY;
    for p in &est.points {
        check_point(p).map_err(|m| schema(ESTIMATE_FILE, m))?;
        if p.center <= prev {
            return Err(schema(ESTIMATE_FILE, "centers not ascending"));
        }
        prev = p.center;
        w.write_record([
            fmt_f64(p.center),
            p.visits.to_string(),
            fmt_opt(p.sigma_sq),
            fmt_opt(p.ci_low),
            fmt_opt(p.ci_high),
            p.reliable.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv output is utf-8"))
}

/// Reads an estimate table. The kernel weight is taken to be the visit count.
pub fn parse_estimate_csv(text: &str, estimator: EstimatorKind) -> Result<VolatilityEstimate> {
    let file = ESTIMATE_FILE;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    check_header(file, &mut r, &ESTIMATE_HEADER)?;
    let mut points = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != ESTIMATE_HEADER.len() {
            return Err(schema(file, format!("line {line}: expected 6 fields, got {}", rec.len())));
        }
        let visits: usize = rec[1].parse().map_err(|_| schema(file, format!("line {line}: bad visits `{}`", &rec[1])))?;
        let reliable = match &rec[5] {
            "true" => true,
            "false" => false,
            other => return Err(schema(file, format!("line {line}: bad reliable flag `{other}`"))),
        };
        let p = GridPoint {
            center: parse_f64(file, line, "center", &rec[0])?,
            visits,
            weight: visits as f64,
            sigma_sq: parse_opt(file, line, "sigma_sq", &rec[2])?,
            ci_low: parse_opt(file, line, "ci_low", &rec[3])?,
            ci_high: parse_opt(file, line, "ci_high", &rec[4])?,
            reliable,
        };
        check_point(&p).map_err(|m| schema(file, format!("line {line}: {m}")))?;
        if let Some(last) = points.last().map(|q: &GridPoint| q.center) {
            if p.center <= last {
                return Err(schema(file, format!("line {line}: centers not ascending")));
            }
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(schema(file, "no rows"));
    }
    Ok(VolatilityEstimate { estimator, points })
}

/// `(x, σ_spline, σ_rkhs)`; either curve may be missing.
pub type CurveRow = (f64, Option<f64>, Option<f64>);

/// `(x, f, σ, σᵇ)`; `σᵇ` is empty outside the bounded interval.
pub type ExtrapolationRow = (f64, f64, f64, Option<f64>);

/// Rows of [`CurveRow`].
pub fn curve_csv(rows: &[CurveRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CURVE_HEADER)?;
    for &(x, s, r) in rows {
        for v in [s, r].into_iter().flatten() {
            if !(v > 0.0) {
                return Err(schema(CURVE_FILE, format!("non-positive curve value {v} at x = {x}")));
            }
        }
        w.write_record([fmt_f64(x), fmt_opt(s), fmt_opt(r)])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf-8"))
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<CurveRow>> {
    let file = CURVE_FILE;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    check_header(file, &mut r, &CURVE_HEADER)?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let line = i + 2;
            Ok((
                parse_f64(file, line, "x", &rec[0])?,
                parse_opt(file, line, "sigma_spline", &rec[1])?,
                parse_opt(file, line, "sigma_rkhs", &rec[2])?,
            ))
        })
        .collect()
}

pub fn mscan_csv(scan: &[MScan]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MSCAN_HEADER)?;
    for s in scan {
        if !(s.m > 0.0) {
            return Err(schema(MSCAN_FILE, format!("non-positive m {}", s.m)));
        }
        w.write_record([fmt_f64(s.m), fmt_opt(s.objective), s.objective.is_some().to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf-8"))
}

pub fn parse_mscan_csv(text: &str) -> Result<Vec<MScan>> {
    let file = MSCAN_FILE;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    check_header(file, &mut r, &MSCAN_HEADER)?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let line = i + 2;
            let objective = parse_opt(file, line, "objective", &rec[1])?;
            let feasible = &rec[2] == "true";
            if feasible != objective.is_some() {
                return Err(schema(file, format!("line {line}: feasible flag disagrees with objective")));
            }
            Ok(MScan { m: parse_f64(file, line, "m", &rec[0])?, objective })
        })
        .collect()
}

/// Rows of `(x, f, σ, σᵇ)`, σᵇ present only inside the bounded interval.
pub fn extrapolation_csv(rows: &[ExtrapolationRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EXTRAPOLATION_HEADER)?;
    for &(x, f, s, b) in rows {
        if !(f > 0.0 && s > 0.0) {
            return Err(schema(EXTRAPOLATION_FILE, format!("non-positive value at x = {x}")));
        }
        w.write_record([fmt_f64(x), fmt_f64(f), fmt_f64(s), fmt_opt(b)])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf-8"))
}

fn check_model(m: &ExtrapolationModel) -> std::result::Result<(), String> {
    let len = m.knots.len();
    if len == 0 {
        return Err("model has no knots".into());
    }
    if m.values.len() != len || m.coefficients.len() != len {
        return Err(format!("{len} knots, {} values, {} coefficients", m.values.len(), m.coefficients.len()));
    }
    if m.n == 0 || !(m.m >= 0.0) {
        return Err(format!("invalid (n, m) = ({}, {})", m.n, m.m));
    }
    if m.knots.windows(2).any(|w| w[1] <= w[0]) || m.knots[0] <= 0.0 {
        return Err("knots must be positive and ascending".into());
    }
    if m.values.iter().any(|&v| !(v > 0.0)) {
        return Err("knot values must be positive".into());
    }
    Ok(())
}

pub fn model_json(model: &ExtrapolationModel) -> Result<String> {
    check_model(model).map_err(|m| schema(MODEL_FILE, m))?;
    Ok(serde_json::to_string_pretty(model)? + "\n")
}

pub fn parse_model_json(text: &str) -> Result<ExtrapolationModel> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Wire {
        n: u32,
        m: f64,
        knots: Vec<f64>,
        values: Vec<f64>,
        coefficients: Vec<f64>,
    }
    let w: Wire = serde_json::from_str(text).map_err(|e| schema(MODEL_FILE, e.to_string()))?;
    let model = ExtrapolationModel { n: w.n, m: w.m, knots: w.knots, values: w.values, coefficients: w.coefficients };
    check_model(&model).map_err(|m| schema(MODEL_FILE, m))?;
    Ok(model)
}

pub fn summary_json(summary: &SeriesSummary) -> Result<String> {
    Ok(serde_json::to_string(summary)? + "\n")
}

pub fn parse_summary_json(text: &str) -> Result<SeriesSummary> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Wire {
        min: f64,
        max: f64,
        n: usize,
        first: f64,
        last: f64,
    }
    let w: Wire = serde_json::from_str(text).map_err(|e| schema(SUMMARY_FILE, e.to_string()))?;
    if !(w.min > 0.0 && w.min <= w.max && w.n >= 2) {
        return Err(schema(SUMMARY_FILE, "inconsistent summary"));
    }
    Ok(SeriesSummary { min: w.min, max: w.max, n: w.n, first: w.first, last: w.last })
}

pub fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

/// Serializes any value as pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VolatilityEstimate {
        VolatilityEstimate {
            estimator: EstimatorKind::Zmirou,
            points: vec![
                GridPoint { center: 84.665, visits: 300, weight: 300.0, sigma_sq: Some(41.3), ci_low: Some(36.0), ci_high: Some(46.6), reliable: true },
                GridPoint { center: 91.5, visits: 1, weight: 1.0, sigma_sq: Some(0.1), ci_low: Some(0.0), ci_high: Some(0.377), reliable: false },
                GridPoint { center: 98.4, visits: 0, weight: 0.0, sigma_sq: None, ci_low: None, ci_high: None, reliable: false },
            ],
        }
    }

    #[test]
    fn estimate_roundtrip_preserves_bits() {
        let text = estimate_csv(&sample()).unwrap();
        assert!(text.starts_with("center,visits,sigma_sq,ci_low,ci_high,reliable\n"));
        assert_eq!(parse_estimate_csv(&text, EstimatorKind::Zmirou).unwrap(), sample());
    }

    #[test]
    fn estimate_rejects_wrong_header_and_broken_rows() {
        assert!(parse_estimate_csv("center,visits\n1,2\n", EstimatorKind::Zmirou).is_err());
        let bad = "center,visits,sigma_sq,ci_low,ci_high,reliable\n1.0,3,1.0,2.0,3.0,true\n";
        assert!(matches!(parse_estimate_csv(bad, EstimatorKind::Zmirou), Err(Error::Schema { .. })));
        let empty = "center,visits,sigma_sq,ci_low,ci_high,reliable\n";
        assert!(parse_estimate_csv(empty, EstimatorKind::Zmirou).is_err());
    }

    #[test]
    fn estimate_write_validates() {
        let mut e = sample();
        e.points[0].ci_low = Some(50.0);
        assert!(estimate_csv(&e).is_err());
    }

    #[test]
    fn model_json_strict() {
        let m = ExtrapolationModel { n: 1, m: 3.0, knots: vec![1.0, 2.0], values: vec![1.0, 0.0625], coefficients: vec![4.0, 0.0] };
        let text = model_json(&m).unwrap();
        assert_eq!(parse_model_json(&text).unwrap(), m);
        assert!(parse_model_json(r#"{"n":1,"m":3,"knots":[1],"values":[1],"coefficients":[1],"extra":0}"#).is_err());
        assert!(parse_model_json(r#"{"n":1,"m":3,"knots":[1,2],"values":[1],"coefficients":[1]}"#).is_err());
    }

    #[test]
    fn mscan_roundtrip() {
        let scan = vec![MScan { m: 0.5, objective: None }, MScan { m: 1.0, objective: Some(0.25) }];
        assert_eq!(parse_mscan_csv(&mscan_csv(&scan).unwrap()).unwrap(), scan);
    }
}
