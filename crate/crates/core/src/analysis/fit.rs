use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Unweighted least-squares line through transformed `(T, value)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub grid: Vec<(f64, f64)>,
}

fn check_grid(grid: &[(f64, f64)]) -> Result<()> {
    if grid.len() < 4 {
        return Err(Error::invalid("grid", format!("need at least 4 points, got {}", grid.len())));
    }
    for &(t, v) in grid {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::invalid("grid", format!("T must be positive, got {t}")));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid("grid", format!("values must be positive, got {v} at T={t}")));
        }
    }
    Ok(())
}

fn line(grid: &[(f64, f64)], xs: Vec<f64>, ys: Vec<f64>) -> Result<RateFit> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("grid", "needs at least two distinct T values"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        grid: grid.to_vec(),
    })
}

/// Fits `log value = intercept + slope · log T`.
pub fn fit_rate(grid: &[(f64, f64)]) -> Result<RateFit> {
    check_grid(grid)?;
    let xs = grid.iter().map(|p| p.0.ln()).collect();
    let ys = grid.iter().map(|p| p.1.ln()).collect();
    line(grid, xs, ys)
}

/// Fits `log value = intercept + slope · T` (linear convergence).
pub fn fit_log_linear(grid: &[(f64, f64)]) -> Result<RateFit> {
    check_grid(grid)?;
    let xs = grid.iter().map(|p| p.0).collect();
    let ys = grid.iter().map(|p| p.1.ln()).collect();
    line(grid, xs, ys)
}
