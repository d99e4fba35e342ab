use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line `log e = slope log x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation of the log errors from the line.
    pub residual: f64,
}

impl Fit {
    /// `exp(intercept)`, the constant in `e ~ K x^slope`.
    pub fn constant(&self) -> f64 {
        self.intercept.exp()
    }
}

/// Fits `log error` against `log x` over all points.
pub fn fit_order(points: &[(f64, f64)]) -> Result<Fit> {
    if points.len() < 3 {
        return Err(Error::Config(format!("an order fit needs at least 3 points, got {}", points.len())));
    }
    if let Some((x, e)) = points.iter().find(|(x, e)| !(*x > 0.0 && *e > 0.0 && x.is_finite() && e.is_finite())) {
        return Err(Error::Config(format!("order fit needs positive finite values, got ({x}, {e})")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, e)| (x.ln(), e.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 1e-24 * n {
        return Err(Error::Degenerate("all abscissae are identical".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (logs.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Ok(Fit {
        slope,
        intercept,
        residual,
    })
}
