//! One-dimensional minimization by coarse scan followed by golden-section
//! refinement inside the best bracket.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// `f` returns `None` where it is undefined; such points are treated as +∞.
/// Returns `(x, f(x))` for the best point seen.
pub fn golden_section<F>(f: F, mut lo: f64, mut hi: f64, x_tol: f64, max_iter: usize) -> Option<(f64, f64)>
where
    F: Fn(f64) -> Option<f64>,
{
    let eval = |x: f64| f(x).unwrap_or(f64::INFINITY);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = eval(c);
    let mut fd = eval(d);
    for _ in 0..max_iter {
        if (hi - lo).abs() <= x_tol {
            break;
        }
        // ties go left
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = eval(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = eval(d);
        }
    }
    let (x, fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    fx.is_finite().then_some((x, fx))
}

/// One evaluated candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub value: Option<f64>,
}

/// Scans `points` equally spaced candidates on `[lo, hi]`, then refines with
/// golden-section search between the neighbours of the best feasible scan
/// point. Ties in the scan resolve toward smaller `x`.
pub fn scan_then_golden<F>(f: F, lo: f64, hi: f64, points: usize, x_tol: f64) -> Result<(f64, f64, Vec<Sample>)>
where
    F: Fn(f64) -> Option<f64> + Sync,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("empty search range [{lo}, {hi}]")));
    }
    let points = points.max(3);
    let step = (hi - lo) / (points - 1) as f64;
    let xs: Vec<f64> = (0..points).map(|i| if i + 1 == points { hi } else { lo + i as f64 * step }).collect();
    let samples: Vec<Sample> = {
        use rayon::prelude::*;
        xs.par_iter().map(|&x| Sample { x, value: f(x) }).collect()
    };
    let best = samples
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.value.map(|v| (i, v)))
        .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
            Some((_, bv)) if bv <= v => acc,
            _ => Some((i, v)),
        })
        .ok_or(Error::NoFeasibleWeight { lo, hi })?;
    let (i, v) = best;
    let a = xs[i.saturating_sub(1)];
    let b = xs[(i + 1).min(points - 1)];
    let refined = golden_section(&f, a, b, x_tol, 200);
    let (x, fx) = match refined {
        Some((x, fx)) if fx < v => (x, fx),
        _ => (xs[i], v),
    };
    Ok((x, fx, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_minimum() {
        let (x, fx) = golden_section(|x| Some((x - 1.3).powi(2) + 0.5), 0.0, 4.0, 1e-10, 500).unwrap();
        assert_abs_diff_eq!(x, 1.3, epsilon = 1e-8);
        assert_abs_diff_eq!(fx, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn scan_escapes_local_minimum() {
        // local min near 1, global near 4
        let f = |x: f64| Some((x - 1.0).powi(2) * (x - 4.0).powi(2) + 0.3 * (x - 4.0).powi(2));
        let (x, _, samples) = scan_then_golden(f, 0.0, 5.0, 50, 1e-9).unwrap();
        assert_eq!(samples.len(), 50);
        assert_abs_diff_eq!(x, 4.0, epsilon = 1e-6);
    }

    #[test]
    fn infeasible_regions_are_skipped() {
        let f = |x: f64| if x < 2.0 { None } else { Some((x - 2.5).powi(2)) };
        let (x, _, _) = scan_then_golden(f, 0.0, 5.0, 21, 1e-9).unwrap();
        assert_abs_diff_eq!(x, 2.5, epsilon = 1e-6);
    }

    #[test]
    fn nothing_feasible() {
        assert!(matches!(
            scan_then_golden(|_| None, 0.0, 1.0, 10, 1e-6),
            Err(Error::NoFeasibleWeight { .. })
        ));
        assert!(scan_then_golden(Some, 1.0, 1.0, 10, 1e-6).is_err());
    }
}
