use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// (eps_bar_s, nonlinearity, constant) coefficients of the qualifier score.
pub const XI_HAT_COEFFS: (f64, f64, f64) = (1.98, -0.132, -0.583);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualifierFeatures {
    pub eps_bar_s: f64,
    pub nonlinearity: f64,
    pub xi_hat: f64,
    pub xi: Option<f64>,
}

impl QualifierFeatures {
    pub fn new(eps_bar_s: f64, nonlinearity: f64) -> Self {
        Self { eps_bar_s, nonlinearity, xi_hat: qualifier(eps_bar_s, nonlinearity), xi: None }
    }

    /// True when the quantum model is recommended.
    pub fn prefers_quantum(&self) -> bool {
        self.xi_hat > 0.0
    }
}

pub fn qualifier(eps_bar_s: f64, nonlinearity: f64) -> f64 {
    let (a, b, c) = XI_HAT_COEFFS;
    a * eps_bar_s + b * nonlinearity + c
}

fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateData("all regressor values are equal".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx, my))
}

/// Residual sum of squares of the linear fit over the total sum of squares.
pub fn nonlinearity(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::DegenerateData(format!("{} points, need at least 3", points.len())));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (slope, intercept, my) = ols(&x, &y)?;
    let tss: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if tss == 0.0 {
        return Err(Error::DegenerateData("all responses are equal".into()));
    }
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    Ok(rss / tss)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_used: usize,
    pub n_excluded: usize,
}

/// OLS of measured Xi on predicted Xi-hat. Points whose residual exceeds
/// 3 robust standard deviations (1.4826 MAD) of the first fit are dropped
/// and the line refitted once.
pub fn qualifier_calibration(pairs: &[(f64, f64)]) -> Result<Calibration> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateData(format!("{} pairs, need at least 3", pairs.len())));
    }
    let fit = |pts: &[(f64, f64)]| -> Result<(f64, f64, f64)> {
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let (s, i, my) = ols(&x, &y)?;
        let tss: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
        let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - s * a - i).powi(2)).sum();
        let r2 = if tss == 0.0 { 1.0 } else { 1.0 - rss / tss };
        Ok((s, i, r2))
    };
    let (s, i, r2) = fit(pairs)?;
    let resid: Vec<f64> = pairs.iter().map(|(x, y)| y - s * x - i).collect();
    let mut abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let mad = median_sorted(&abs);
    if mad > 0.0 {
        let cut = 3.0 * 1.4826 * mad;
        let kept: Vec<(f64, f64)> = pairs.iter().zip(&resid).filter(|(_, r)| r.abs() <= cut).map(|(p, _)| *p).collect();
        if kept.len() < pairs.len() && kept.len() >= 3 {
            if let Ok((s, i, r2)) = fit(&kept) {
                return Ok(Calibration {
                    slope: s,
                    intercept: i,
                    r_squared: r2,
                    n_used: kept.len(),
                    n_excluded: pairs.len() - kept.len(),
                });
            }
        }
    }
    Ok(Calibration { slope: s, intercept: i, r_squared: r2, n_used: pairs.len(), n_excluded: 0 })
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
