use serde::Serialize;

use crate::error::{Error, Result};

/// Ordinary least-squares line with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
}

/// Fits mean band PSD against detected optical power.
pub fn noise_linearity_fit(powers: &[f64], psds: &[f64]) -> Result<LinearFit> {
    if powers.len() != psds.len() {
        return Err(Error::DegenerateFit("powers and PSDs differ in length".into()));
    }
    if powers.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "needs at least 3 power points, got {}",
            powers.len()
        )));
    }
    let n = powers.len() as f64;
    let mx = powers.iter().sum::<f64>() / n;
    let my = psds.iter().sum::<f64>() / n;
    let sxx: f64 = powers.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) || sxx <= 1e-24 * mx * mx * n {
        return Err(Error::DegenerateFit("all powers are equal".into()));
    }
    let sxy: f64 = powers.iter().zip(psds).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = psds.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = powers
        .iter()
        .zip(psds)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let s2 = sse / (n - 2.0);
    let slope_stderr = (s2 / sxx).sqrt();
    let intercept_stderr = (s2 * (1.0 / n + mx * mx / sxx)).sqrt();
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        intercept_stderr,
    })
}
