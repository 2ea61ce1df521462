use serde::Serialize;

use crate::error::{Error, Result};

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// `exp(intercept)`, so that `y ~ prefactor * x^slope`.
    pub prefactor: f64,
    /// Coefficient of determination.
    pub r2: f64,
    /// Standard error of the slope (zero for two points).
    pub slope_stderr: f64,
    pub points: usize,
}

/// Fit `y = C x^p` in log-log space. Points with a non-positive coordinate
/// are skipped; at least two must remain.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    let m = pts.len();
    if m < 2 {
        return Err(Error::Validation(format!("log-log fit needs at least two positive points, got {m}")));
    }
    let mf = m as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / mf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Validation("log-log fit needs at least two distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_stderr = if m > 2 { (sse / (mf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LogLogFit { slope, intercept, prefactor: intercept.exp(), r2, slope_stderr, points: m })
}

/// `count` points spaced geometrically from `start` to `end` inclusive.
pub fn geometric_grid(start: f64, end: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::Validation("grid must have at least one point".into()));
    }
    if !(start > 0.0 && end > 0.0) {
        return Err(Error::Validation("geometric grid bounds must be positive".into()));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let ratio = (end / start).ln() / (count - 1) as f64;
    Ok((0..count).map(|i| if i + 1 == count { end } else { start * (ratio * i as f64).exp() }).collect())
}
