use serde::{Deserialize, Serialize};

use super::ed::EdResult;
use crate::error::{Error, Result};

/// Couplings below this are ignored by the slope fit.
pub const MIN_FIT_COUPLING: f64 = 10.0;

/// `K̂` from a least-squares line `E = E_∞ − K̂ (1/g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub k: f64,
    /// Extrapolated `E` at `1/g = 0`.
    pub intercept: f64,
    pub standard_error: f64,
    /// `|K̂(n_max) − K̂(coarser basis)|`, zero when no coarse run is given.
    pub truncation: f64,
    /// `2·standard_error + truncation`.
    pub half_width: f64,
    /// Root-mean-square residual of the line.
    pub residual: f64,
    pub points: usize,
}

impl SlopeFit {
    pub fn contains(&self, k: f64) -> bool {
        (self.k - k).abs() <= self.half_width
    }
}

fn line_fit(result: &EdResult, state: usize) -> Result<(f64, f64, f64, f64, usize)> {
    if state >= result.tracked.first().map_or(0, |r| r.len()) {
        return Err(Error::InsufficientPoints(format!("state {state} was not tracked")));
    }
    let pts: Vec<(f64, f64)> = result
        .couplings
        .iter()
        .zip(&result.tracked)
        .filter(|(&g, _)| g >= MIN_FIT_COUPLING)
        .map(|(&g, row)| (1.0 / g, row[state].energy))
        .collect();
    let m = pts.len();
    if m < 3 {
        return Err(Error::InsufficientPoints(format!(
            "{m} couplings ≥ {MIN_FIT_COUPLING}, need 3"
        )));
    }
    let mf = m as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / mf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let se = (ssr / (mf - 2.0) / sxx).sqrt();
    Ok((-slope, intercept, se, (ssr / mf).sqrt(), m))
}

/// Fits tracked state `state` of `result`. Passing the same run at a smaller
/// basis (`n_max − 4`) adds the change of `K̂` as a truncation estimate.
pub fn slope_fit(result: &EdResult, state: usize, coarse: Option<&EdResult>) -> Result<SlopeFit> {
    let (k, intercept, se, residual, points) = line_fit(result, state)?;
    let truncation = match coarse {
        Some(c) => (k - line_fit(c, state)?.0).abs(),
        None => 0.0,
    };
    Ok(SlopeFit {
        k,
        intercept,
        standard_error: se,
        truncation,
        half_width: 2.0 * se + truncation,
        residual,
        points,
    })
}
