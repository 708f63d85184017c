//! Exact oracles, Monte Carlo estimators and empirical rate/speedup analysis.

mod fit;
mod lemma;
mod speedup;
pub mod trace;


use nalgebra::{DMatrix, DVector};

use crate::linalg::norm_sq;
use crate::problems::{sample_batch, DataModel, Problem};
use crate::rng::RngState;
use crate::{Error, Result};

pub use fit::{fit_log_linear, fit_rate, RateFit};
pub use lemma::{check_projection_lemma, random_projection_case, LemmaCheck, ProjectionInstance};
pub use speedup::{critical_batch, time_to_eps, CriticalBatch, FinalPoint, SpeedupRow, SpeedupTable};
pub use trace::{read_records, stage_ends, Algorithm, RunTrace, TraceHeader, TraceRecord, TraceStatus, TRACE_COLUMNS};

/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_RTOL: f64 = 1e-10;

/// Minimum-norm minimizer and minimum value of a built-in problem's expected loss.
pub fn exact_min(problem: &Problem) -> Result<(Vec<f64>, f64)> {
    let d = problem.dim();
    let wstar = match &problem.model {
        DataModel::Atoms(table) => {
            // Minimize Σ p_k ½(⟨w, x_k⟩ − y_k)² = ½‖Aw − c‖² with rows √p_k x_k.
            let n = table.rows.len();
            let a = DMatrix::<f64>::from_fn(n, d, |i, j| table.weights[i].sqrt() * table.rows[i][j]);
            let c = DVector::<f64>::from_fn(n, |i, _| table.weights[i].sqrt() * table.labels[i]);
            let svd = a.svd(true, true);
            let smax = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
            if smax == 0.0 {
                vec![0.0; d]
            } else {
                let sol = svd
                    .solve(&c, PINV_RTOL * smax)
                    .map_err(|e| Error::Numerical(e.to_string()))?;
                sol.iter().copied().collect()
            }
        }
        DataModel::Spike { p, sqrt_h, mean, .. } => {
            if p * sqrt_h > 0.0 {
                vec![mean / sqrt_h]
            } else {
                vec![0.0]
            }
        }
        DataModel::Deterministic { curvature, center } => curvature
            .iter()
            .zip(center)
            .map(|(&m, &c)| if m > 0.0 { c } else { 0.0 })
            .collect(),
        DataModel::Custom(_) => return Err(Error::NotLeastSquares),
    };
    let lstar = problem.exact_loss(&wstar).ok_or(Error::NotLeastSquares)?;
    Ok((wstar, lstar))
}

/// Monte Carlo estimate of `E‖∇ℓ(w; z) − ∇L(w)‖²` with its standard error.
///
/// Without a closed-form `∇L` the sample mean gradient stands in for it and
/// the squared deviations are rescaled by `n/(n−1)`; the estimate is then
/// unbiased but its standard error ignores the dependence through the mean.
pub fn variance_at(problem: &Problem, w: &[f64], n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if n_samples < 2 {
        return Err(Error::invalid("n_samples", "need at least two samples"));
    }
    let mut state = RngState::new(seed);
    let batch = sample_batch(problem, n_samples, &mut state)?;
    let grads: Vec<Vec<f64>> = batch.iter().map(|z| problem.gradient(w, z)).collect();
    let (center, correction) = match problem.exact_gradient(w) {
        Some(g) => (g, 1.0),
        None => {
            let mut mean = vec![0.0; problem.dim()];
            for g in &grads {
                crate::linalg::axpy(1.0 / n_samples as f64, g, &mut mean);
            }
            (mean, n_samples as f64 / (n_samples - 1) as f64)
        }
    };
    let values: Vec<f64> = grads
        .iter()
        .map(|g| correction * norm_sq(&crate::linalg::sub(g, &center)))
        .collect();
    Ok(mean_and_stderr(&values))
}

/// Sample mean and its standard error.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    if n < 2 {
        return (mean, f64::NAN);
    }
    (mean, (m2 / (n - 1) as f64 / n as f64).sqrt())
}

/// Linear-interpolated quantile (`q ∈ [0, 1]`) of finite-or-infinite values;
/// NaN entries sort as `+∞`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v: Vec<f64> = values
        .iter()
        .map(|&x| if x.is_nan() { f64::INFINITY } else { x })
        .collect();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi || v[lo] == v[hi] {
        v[lo]
    } else {
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    }
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}
