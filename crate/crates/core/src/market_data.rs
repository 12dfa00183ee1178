//! Minute-bar ingestion and model-time rescaling.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which bar column to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceField {
    #[default]
    Open,
    High,
    Low,
    Close,
}

impl PriceField {
    pub fn name(self) -> &'static str {
        match self {
            PriceField::Open => "open",
            PriceField::High => "high",
            PriceField::Low => "low",
            PriceField::Close => "close",
        }
    }
}

impl fmt::Display for PriceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PriceField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "open" => Ok(PriceField::Open),
            "high" => Ok(PriceField::High),
            "low" => Ok(PriceField::Low),
            "close" => Ok(PriceField::Close),
            other => Err(Error::invalid(format!("unknown price field `{other}`"))),
        }
    }
}

/// Positive prices on strictly increasing timestamps, treated as equally
/// spaced in model time.
///
/// Gaps in wall-clock time (overnight, halts) are ignored: the step `dt` is
/// `time_span / (n - 1)` regardless of the timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    timestamps_ms: Vec<i64>,
    prices: Vec<f64>,
    time_span: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    pub first: f64,
    pub last: f64,
}

impl PriceSeries {
    pub fn new(timestamps_ms: Vec<i64>, prices: Vec<f64>, time_span: f64) -> Result<Self> {
        if timestamps_ms.len() != prices.len() {
            return Err(Error::invalid(format!(
                "{} timestamps for {} prices",
                timestamps_ms.len(),
                prices.len()
            )));
        }
        if prices.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 observations, got {}", prices.len())));
        }
        check_time_span(time_span)?;
        for (row, &p) in prices.iter().enumerate() {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::NonPositivePrice { row, value: p });
            }
        }
        for (i, w) in timestamps_ms.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::NonIncreasingTimestamp { row: i + 1 });
            }
        }
        Ok(PriceSeries { timestamps_ms, prices, time_span })
    }

    /// Series with synthetic one-minute timestamps starting at the epoch.
    pub fn from_prices(prices: Vec<f64>, time_span: f64) -> Result<Self> {
        let ts = (0..prices.len() as i64).map(|i| i * 60_000).collect();
        Self::new(ts, prices, time_span)
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn timestamps_ms(&self) -> &[i64] {
        &self.timestamps_ms
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn time_span(&self) -> f64 {
        self.time_span
    }

    /// Uniform model-time step.
    pub fn dt(&self) -> f64 {
        self.time_span / (self.prices.len() - 1) as f64
    }

    /// Same prices, `total` units of model time end to end.
    pub fn rescale_time(&self, total: f64) -> Result<Self> {
        check_time_span(total)?;
        Ok(PriceSeries { time_span: total, ..self.clone() })
    }

    /// Shifts every timestamp by `offset_ms`. Prices and model time are untouched.
    pub fn shift_timestamps(&self, offset_ms: i64) -> Self {
        PriceSeries {
            timestamps_ms: self.timestamps_ms.iter().map(|t| t + offset_ms).collect(),
            ..self.clone()
        }
    }

    pub fn min(&self) -> f64 {
        self.prices.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.prices.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn summary(&self) -> SeriesSummary {
        SeriesSummary {
            min: self.min(),
            max: self.max(),
            n: self.len(),
            first: self.prices[0],
            last: self.prices[self.len() - 1],
        }
    }
}

fn check_time_span(total: f64) -> Result<()> {
    if total > 0.0 && total.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("time span must be positive, got {total}")))
    }
}

/// Parses an ISO-8601 instant (with or without offset) or an epoch value in
/// seconds, returning milliseconds since the epoch.
pub fn parse_timestamp(raw: &str) -> Option<i64> {
    let s = raw.trim();
    if let Ok(secs) = s.parse::<f64>() {
        return secs.is_finite().then(|| (secs * 1000.0).round() as i64);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_millis());
    }
    const FORMATS: [&str; 6] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
        "%m/%d/%Y %H:%M:%S",
        "%m/%d/%Y %H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|dt| dt.and_utc().timestamp_millis())
}

const TIME_COLUMNS: [&str; 4] = ["timestamp", "time", "datetime", "date"];

/// Reads delimited minute bars (comma or tab) and returns the selected price
/// column on a unit model-time span.
pub fn parse_ticks(raw: &str, field: PriceField) -> Result<PriceSeries> {
    let header_line = raw.lines().next().unwrap_or("");
    let delimiter = if header_line.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes());
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let price_col = find(field.name()).ok_or_else(|| Error::MissingField(field.name().to_string()))?;
    let time_col = TIME_COLUMNS.iter().find_map(|c| find(c)).unwrap_or(0);

    let mut timestamps = Vec::new();
    let mut prices = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        // header is line 1
        let line = row + 2;
        let ts_raw = record.get(time_col).unwrap_or("");
        let ts = parse_timestamp(ts_raw)
            .ok_or_else(|| Error::Parse { line, msg: format!("bad timestamp `{ts_raw}`") })?;
        let p_raw = record.get(price_col).unwrap_or("");
        let p: f64 = p_raw
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("bad {} price `{p_raw}`", field) })?;
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::NonPositivePrice { row, value: p });
        }
        if let Some(&prev) = timestamps.last() {
            if ts <= prev {
                return Err(Error::NonIncreasingTimestamp { row });
            }
        }
        timestamps.push(ts);
        prices.push(p);
    }
    PriceSeries::new(timestamps, prices, 1.0)
}

/// Writes the series in the bar format [`parse_ticks`] reads. All four price
/// columns carry the same value; timestamps are epoch seconds.
pub fn write_ticks<W: std::io::Write>(series: &PriceSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "open", "high", "low", "close"])?;
    for (&t, &p) in series.timestamps_ms.iter().zip(&series.prices) {
        let ts = if t % 1000 == 0 { (t / 1000).to_string() } else { format!("{}", t as f64 / 1000.0) };
        let p = format!("{p:?}");
        w.write_record([ts.as_str(), &p, &p, &p, &p])?;
    }
    w.flush()?;
    Ok(())
}
