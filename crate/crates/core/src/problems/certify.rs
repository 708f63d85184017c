//! Probe-based certification of the per-sample assumptions a problem's
//! metadata claims: non-negativity, convexity, `H`-smoothness, the norm bound
//! on the minimizer, and (when `λ > 0`) quadratic growth.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{sample_batch, Problem};
use crate::linalg::{dot, norm, sub};
use crate::rng::RngState;
use crate::Result;

/// Relative tolerance for the per-sample inequalities.
pub const ASSUMPTION_RTOL: f64 = 1e-8;
/// Absolute tolerance for the growth inequality.
pub const GROWTH_TOL: f64 = 1e-10;

/// Worst cases over all probes. Violations are `max(lhs − rhs, 0)` divided by
/// the sum of the absolute values of the terms involved, so they are
/// meaningful at any scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub probes: usize,
    /// Smallest per-sample loss seen.
    pub min_loss: f64,
    /// `ℓ(u) + ⟨∇ℓ(u), w − u⟩ ≤ ℓ(w)`.
    pub convexity_violation: f64,
    /// `‖∇ℓ(w) − ∇ℓ(u)‖ ≤ H‖w − u‖`.
    pub lipschitz_violation: f64,
    /// `ℓ(w) ≤ ℓ(u) + ⟨∇ℓ(u), w − u⟩ + (H/2)‖w − u‖²`.
    pub upper_bound_violation: f64,
    /// `‖w*‖ − B` when a minimizer is known.
    pub wstar_excess: Option<f64>,
    /// Smallest `L(w) − L* − (λ/2)·dist(w, W*)²`; present when `λ > 0`.
    pub growth_slack: Option<f64>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.min_loss >= 0.0
            && self.convexity_violation <= ASSUMPTION_RTOL
            && self.lipschitz_violation <= ASSUMPTION_RTOL
            && self.upper_bound_violation <= ASSUMPTION_RTOL
            && self.wstar_excess.is_none_or(|e| e <= ASSUMPTION_RTOL)
            && self.growth_slack.is_none_or(|s| s >= -GROWTH_TOL)
    }
}

fn relative(excess: f64, scale: f64) -> f64 {
    if excess <= 0.0 {
        0.0
    } else if scale > 0.0 {
        excess / scale
    } else {
        f64::INFINITY
    }
}

/// Uniform point in the centered ball of the given radius.
fn ball_point<R: Rng>(rng: &mut R, d: usize, radius: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm(&v);
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x *= r / n);
    }
    v
}

/// Checks the assumptions on `probes` random `(w, u, z)` triples with
/// `‖w‖, ‖u‖ ≤ 2B`. Growth probes split between that ball and a small
/// neighbourhood of the known minimizer, where the inequality is tightest.
pub fn certify_assumptions(problem: &Problem, probes: usize, seed: u64) -> Result<AssumptionReport> {
    let meta = problem.meta();
    let d = problem.dim();
    let h = meta.smoothness;
    let big = 2.0 * meta.radius;
    let state = RngState::new(seed);
    let mut rng = state.stream().sample_rng(u64::MAX, 0);
    let mut samples = RngState::at(seed, 1);

    let mut report = AssumptionReport {
        probes,
        min_loss: f64::INFINITY,
        convexity_violation: 0.0,
        lipschitz_violation: 0.0,
        upper_bound_violation: 0.0,
        wstar_excess: meta.wstar.as_ref().map(|w| norm(w) - meta.radius),
        growth_slack: None,
    };
    for _ in 0..probes {
        let w = ball_point(&mut rng, d, big);
        let u = ball_point(&mut rng, d, big);
        let z = sample_batch(problem, 1, &mut samples)?.remove(0);
        let (lw, lu) = (problem.loss(&w, &z), problem.loss(&u, &z));
        let (gw, gu) = (problem.gradient(&w, &z), problem.gradient(&u, &z));
        let diff = sub(&w, &u);
        let lin = dot(&gu, &diff);
        let dist = norm(&diff);

        report.min_loss = report.min_loss.min(lw).min(lu);
        let scale = lw.abs() + lu.abs() + lin.abs();
        report.convexity_violation = report.convexity_violation.max(relative(lu + lin - lw, scale));
        let quad = 0.5 * h * dist * dist;
        report.upper_bound_violation = report
            .upper_bound_violation
            .max(relative(lw - lu - lin - quad, scale + quad));
        let gdist = norm(&sub(&gw, &gu));
        report.lipschitz_violation = report
            .lipschitz_violation
            .max(relative(gdist - h * dist, gdist + h * dist));
    }

    if meta.lambda > 0.0 {
        if let Some(wstar) = &meta.wstar {
            let mut slack = f64::INFINITY;
            for i in 0..probes {
                let w = if i % 2 == 0 {
                    ball_point(&mut rng, d, big)
                } else {
                    let step = ball_point(&mut rng, d, 1e-2 * meta.radius);
                    wstar.iter().zip(&step).map(|(a, b)| a + b).collect()
                };
                let (Some(excess), Some(dist)) = (problem.excess_loss(&w), problem.distance_to_minimizers(&w)) else {
                    break;
                };
                slack = slack.min(excess - 0.5 * meta.lambda * dist * dist);
            }
            report.growth_slack = Some(slack);
        }
    }
    Ok(report)
}
