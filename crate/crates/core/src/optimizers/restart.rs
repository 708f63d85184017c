//! Restarting the accelerated method under quadratic growth.
//!
//! Stage `t` targets `ε_t = θ^{−t}Δ`. Growth turns the previous stage's
//! guarantee into a distance bound, so stage `t` only has to search a ball of
//! squared radius `B_t² = 2θ^{1−t}Δ/λ` around the previous output, and the
//! explicit-constant convex bound gives the iterations needed to reach `ε_t`.

use serde::{Deserialize, Serialize};

use super::{json_hash, make_schedule, run_stage, schedule::convex_bound, Recorder, RunOptions, RunOutput};
use crate::analysis::trace::{Algorithm, RunTrace, TraceHeader, TraceStatus};
use crate::problems::Problem;
use crate::rng::RngState;
use crate::{Error, Result};

/// Largest horizon `stage_budget` will search.
const MAX_BUDGET: u64 = 1 << 52;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub eps: f64,
    pub radius_sq: f64,
    pub iterations: u64,
}

impl Stage {
    pub fn radius(&self) -> f64 {
        self.radius_sq.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub theta: f64,
    pub eps: f64,
    pub lambda: f64,
    pub delta: f64,
    pub smoothness: f64,
    pub batch: usize,
    pub lstar: f64,
    pub stages: Vec<Stage>,
}

impl StagePlan {
    pub fn total_iterations(&self) -> u64 {
        self.stages.iter().map(|s| s.iterations).sum()
    }

    pub fn hash(&self) -> String {
        json_hash(self)
    }
}

/// Smallest `T` with `convex_bound(H, B², b, T, σ*) ≤ eps`, where `σ* = √(2HL*)`.
pub fn stage_budget(eps: f64, radius_sq: f64, smoothness: f64, b: usize, lstar: f64) -> Result<u64> {
    if !(lstar.is_finite() && lstar >= 0.0) {
        return Err(Error::invalid("lstar", format!("must be non-negative, got {lstar}")));
    }
    stage_budget_sigma(eps, radius_sq, smoothness, b, (2.0 * smoothness * lstar).sqrt())
}

/// As [`stage_budget`] with `σ*` given directly.
pub fn stage_budget_sigma(eps: f64, radius_sq: f64, smoothness: f64, b: usize, sigma_star: f64) -> Result<u64> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid("eps", format!("must be positive, got {eps}")));
    }
    if !(radius_sq.is_finite() && radius_sq > 0.0) {
        return Err(Error::invalid("radius_sq", format!("must be positive, got {radius_sq}")));
    }
    if b == 0 {
        return Err(Error::invalid("b", "minibatch size must be at least 1"));
    }
    let ok = |t: u64| convex_bound(smoothness, radius_sq, b, t as f64, sigma_star) <= eps;
    if ok(1) {
        return Ok(1);
    }
    // Doubling finds a feasible horizon; bisection keeps `lo` infeasible and `hi` feasible.
    let mut hi = 2u64;
    while !ok(hi) {
        if hi >= MAX_BUDGET {
            return Err(Error::invalid("eps", format!("target {eps} needs more than {MAX_BUDGET} iterations")));
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `⌈log_θ(Δ/ε)⌉`, treating ratios within rounding error of an integer power as exact.
pub fn stage_count(delta: f64, eps: f64, theta: f64) -> u32 {
    if eps >= delta {
        return 0;
    }
    let x = (delta / eps).ln() / theta.ln();
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as u32
    } else {
        x.ceil() as u32
    }
}

pub fn make_stage_plan(
    delta: f64,
    eps: f64,
    theta: f64,
    lambda: f64,
    smoothness: f64,
    b: usize,
    lstar: f64,
) -> Result<StagePlan> {
    if !(theta.is_finite() && theta > 1.0) {
        return Err(Error::invalid("theta", format!("must exceed 1, got {theta}")));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid("lambda", format!("must be positive, got {lambda}")));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid("eps", format!("must be positive, got {eps}")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
    }
    if !(smoothness.is_finite() && smoothness > 0.0) {
        return Err(Error::invalid("smoothness", format!("must be positive, got {smoothness}")));
    }
    let k = stage_count(delta, eps, theta);
    let stages = (1..=k)
        .map(|t| {
            let t = f64::from(t);
            let stage_eps = theta.powf(-t) * delta;
            let radius_sq = 2.0 * theta.powf(1.0 - t) * delta / lambda;
            let iterations = stage_budget(stage_eps, radius_sq, smoothness, b, lstar)?;
            Ok(Stage {
                eps: stage_eps,
                radius_sq,
                iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StagePlan {
        theta,
        eps,
        lambda,
        delta,
        smoothness,
        batch: b,
        lstar,
        stages,
    })
}

/// Runs the accelerated method once per stage, each stage re-centred at the
/// previous output with the stage's radius. The sample stream continues
/// across stages. Trace records carry the stage index (starting at 1).
pub fn run_restarted(problem: &Problem, plan: &StagePlan, seed: u64, opts: &RunOptions) -> Result<RunOutput> {
    let noise_sq = match (opts.noise_sq, opts.lstar) {
        (Some(s), _) => s,
        (None, Some(l)) => 2.0 * plan.smoothness * l,
        (None, None) => 2.0 * plan.smoothness * plan.lstar,
    };
    let header = TraceHeader {
        algorithm: Algorithm::Restarted,
        problem_hash: problem.config_hash(),
        problem: problem.config().cloned(),
        batch: plan.batch,
        horizon: plan.total_iterations(),
        seed,
        gamma: None,
        radius: plan.stages.first().map_or(0.0, Stage::radius),
        noise_sq,
        schedule_hash: plan.hash(),
    };
    let mut trace = RunTrace::new(header);
    let recorder = Recorder { problem, seed, opts };
    let mut center = vec![0.0; problem.dim()];
    recorder.record(&mut trace, 0, 0, 0.0, &center, None)?;

    let mut rng = RngState::new(seed);
    let mut t_offset = 0;
    for (i, stage) in plan.stages.iter().enumerate() {
        let schedule = make_schedule(plan.smoothness, plan.batch, stage.iterations, stage.radius(), noise_sq)?;
        center = run_stage(problem, &schedule, &center, &mut rng, &recorder, &mut trace, t_offset, i as u32 + 1)?;
        if trace.status != TraceStatus::Completed {
            break;
        }
        t_offset += stage.iterations;
    }
    Ok(RunOutput { w: center, trace })
}
