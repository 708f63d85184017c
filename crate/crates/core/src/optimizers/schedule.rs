use serde::{Deserialize, Serialize};

use super::json_hash;
use crate::{Error, Result};

/// Stepsize schedule of the accelerated method for a fixed horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    /// Base stepsize `γ`.
    pub gamma: f64,
    pub horizon: u64,
    pub batch: usize,
    pub smoothness: f64,
    pub radius: f64,
    pub noise_sq: f64,
}

impl StepSchedule {
    /// `β_t = 1 + t/6`.
    pub fn beta(&self, t: u64) -> f64 {
        1.0 + t as f64 / 6.0
    }

    /// `γ_t = γ·(t + 1)`.
    pub fn step(&self, t: u64) -> f64 {
        self.gamma * (t + 1) as f64
    }

    /// The three candidates whose minimum is `γ`; the last is `+∞` without noise.
    pub fn gamma_branches(&self) -> [f64; 3] {
        gamma_branches(self.smoothness, self.batch, self.horizon, self.radius, self.noise_sq)
    }

    pub fn hash(&self) -> String {
        json_hash(self)
    }
}

fn gamma_branches(h: f64, b: usize, horizon: u64, radius: f64, noise_sq: f64) -> [f64; 3] {
    let t = horizon as f64;
    let b = b as f64;
    let noise_branch = if noise_sq == 0.0 {
        f64::INFINITY
    } else {
        (b * radius * radius / (noise_sq * t * t * t)).sqrt()
    };
    [1.0 / (12.0 * h), b / (24.0 * h * (t + 1.0)), noise_branch]
}

pub fn make_schedule(smoothness: f64, b: usize, horizon: u64, radius: f64, noise_sq: f64) -> Result<StepSchedule> {
    if !(smoothness.is_finite() && smoothness > 0.0) {
        return Err(Error::invalid("smoothness", format!("must be positive, got {smoothness}")));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
    }
    if b == 0 {
        return Err(Error::invalid("b", "minibatch size must be at least 1"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    if !(noise_sq.is_finite() && noise_sq >= 0.0) {
        return Err(Error::invalid("noise_sq", format!("must be non-negative, got {noise_sq}")));
    }
    let gamma = gamma_branches(smoothness, b, horizon, radius, noise_sq)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(StepSchedule {
        gamma,
        horizon,
        batch: b,
        smoothness,
        radius,
        noise_sq,
    })
}

/// Explicit-constant bound on the expected suboptimality of the accelerated
/// method after `horizon` steps: `108HB²/T² + 144HB²/(bT) + 27σ*B/√(bT)`.
pub fn convex_bound(smoothness: f64, radius_sq: f64, b: usize, horizon: f64, sigma_star: f64) -> f64 {
    let bt = b as f64 * horizon;
    108.0 * smoothness * radius_sq / (horizon * horizon)
        + 144.0 * smoothness * radius_sq / bt
        + 27.0 * sigma_star * radius_sq.sqrt() / bt.sqrt()
}
