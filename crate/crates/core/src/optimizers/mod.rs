//! Accelerated minibatch SGD, plain minibatch SGD, and the restart scheme for
//! objectives with quadratic growth.
//!
//! All methods start from `w₀ = 0` (in their own coordinate frame), project
//! onto a Euclidean ball, and write one [`TraceRecord`] per iteration unless
//! asked to keep only the endpoints. A run is strictly sequential; independent
//! runs can be executed in parallel because problems are immutable and every
//! run owns its [`RngState`].

mod restart;
mod schedule;
mod sgd;

#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};

use crate::analysis::trace::{Algorithm, RunTrace, TraceHeader, TraceRecord, TraceStatus};
use crate::digest::sha256_hex;
use crate::linalg::{add, all_finite, axpy, norm};
use crate::problems::{grad_noise_sq, minibatch_gradient_into, sample_batch, Problem};
use crate::rng::{derive_seed, RngState};
use crate::{Error, Result};

pub use restart::{make_stage_plan, run_restarted, stage_budget, stage_budget_sigma, stage_count, Stage, StagePlan};
pub use schedule::{convex_bound, make_schedule, StepSchedule};
pub use sgd::{run_sgd, Averaging, SgdSchedule};

/// Euclidean projection onto the ball of radius `radius` around the origin.
pub fn project_ball(w: &[f64], radius: f64) -> Vec<f64> {
    let mut out = w.to_vec();
    project_ball_in_place(&mut out, radius);
    out
}

pub fn project_ball_in_place(w: &mut [f64], radius: f64) {
    let n = norm(w);
    if n > radius {
        for x in w.iter_mut() {
            *x = *x * radius / n;
        }
    }
}

/// Iterates of accelerated minibatch SGD in the run's coordinate frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub w: Vec<f64>,
    pub w_ag: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    pub fn zeros(dim: usize) -> Self {
        Self {
            w: vec![0.0; dim],
            w_ag: vec![0.0; dim],
            t: 0,
        }
    }
}

/// Quantities of one accelerated step, in the run's coordinate frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Iteration index of the step (`t` before incrementing).
    pub t: u64,
    pub w_prev: Vec<f64>,
    pub w_md: Vec<f64>,
    /// Minibatch gradient evaluated at `w_md`.
    pub grad: Vec<f64>,
    /// `γ_t`.
    pub step: f64,
}

/// One accelerated iteration. The iterates live in coordinates shifted by
/// `center`: gradients are evaluated at `center + w_md`.
pub fn acc_step(
    state: &mut OptimizerState,
    schedule: &StepSchedule,
    problem: &Problem,
    center: &[f64],
    rng: &mut RngState,
) -> Result<StepInfo> {
    let t = state.t;
    if t >= schedule.horizon {
        return Err(Error::invalid("state", format!("iteration {t} is past the horizon {}", schedule.horizon)));
    }
    let inv_beta = 1.0 / schedule.beta(t);
    let step = schedule.step(t);

    let w_md: Vec<f64> = state
        .w
        .iter()
        .zip(&state.w_ag)
        .map(|(w, ag)| inv_beta * w + (1.0 - inv_beta) * ag)
        .collect();
    let batch = sample_batch(problem, schedule.batch, rng)?;
    let mut grad = vec![0.0; problem.dim()];
    minibatch_gradient_into(problem, &add(center, &w_md), &batch, &mut grad)?;
    if !all_finite(&grad) {
        return Err(Error::NonFinite {
            iteration: t,
            what: "gradient",
        });
    }

    let w_prev = state.w.clone();
    axpy(-step, &grad, &mut state.w);
    project_ball_in_place(&mut state.w, schedule.radius);
    for (ag, w) in state.w_ag.iter_mut().zip(&state.w) {
        *ag = inv_beta * w + (1.0 - inv_beta) * *ag;
    }
    if !all_finite(&state.w) || !all_finite(&state.w_ag) {
        return Err(Error::NonFinite { iteration: t, what: "iterate" });
    }
    state.t += 1;
    Ok(StepInfo {
        t,
        w_prev,
        w_md,
        grad,
        step,
    })
}

/// Which iterations a run writes to its trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recording {
    /// The start point and every iteration.
    #[default]
    Full,
    /// The start point, stage ends, and the final iteration.
    Endpoints,
}

/// Overrides and trace settings shared by all runners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    /// Projection radius `B̃`; defaults to the problem's `B`.
    pub radius: Option<f64>,
    /// Upper bound `L̃*` used to derive the noise level `2·H·L̃*`.
    pub lstar: Option<f64>,
    /// Noise level `σ*²` used directly in the stepsize; takes precedence over `lstar`.
    pub noise_sq: Option<f64>,
    pub recording: Recording,
    /// Samples per Monte Carlo loss estimate for problems without closed form.
    pub mc_samples: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            radius: None,
            lstar: None,
            noise_sq: None,
            recording: Recording::Full,
            mc_samples: 2000,
        }
    }
}

impl RunOptions {
    pub fn endpoints() -> Self {
        Self {
            recording: Recording::Endpoints,
            ..Self::default()
        }
    }

    pub fn resolve_radius(&self, problem: &Problem) -> Result<f64> {
        let r = self.radius.unwrap_or(problem.meta().radius);
        if r.is_finite() && r > 0.0 {
            Ok(r)
        } else {
            Err(Error::invalid("radius", format!("must be positive, got {r}")))
        }
    }

    /// `σ*²` from the explicit override, else `2·H·L̃*`.
    pub fn resolve_noise_sq(&self, problem: &Problem) -> Result<f64> {
        let meta = problem.meta();
        let v = match (self.noise_sq, self.lstar) {
            (Some(s), _) => s,
            (None, Some(l)) => 2.0 * meta.smoothness * l,
            (None, None) => 2.0 * meta.smoothness * meta.lstar,
        };
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(Error::invalid("noise_sq", format!("must be non-negative, got {v}")))
        }
    }
}

/// Output of a run: the returned iterate (in the problem's coordinates) and its trace.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub w: Vec<f64>,
    pub trace: RunTrace,
}

/// Measures `L(w) − L*` exactly, or by Monte Carlo for custom objectives.
pub(crate) fn measure(problem: &Problem, w: &[f64], seed: u64, t: u64, opts: &RunOptions) -> Result<(f64, f64)> {
    if let Some(v) = problem.excess_loss(w) {
        return Ok((v, 0.0));
    }
    let (mean, se) = problem.expected_loss_mc(w, opts.mc_samples, derive_seed(seed ^ 0x5EED_0F10_5500, t))?;
    Ok((mean - problem.meta().lstar, se))
}

/// Writes `(t, stage)` bookkeeping and measurements into a trace row.
pub(crate) struct Recorder<'a> {
    pub problem: &'a Problem,
    pub seed: u64,
    pub opts: &'a RunOptions,
}

impl Recorder<'_> {
    pub fn record(
        &self,
        trace: &mut RunTrace,
        t: u64,
        stage: u32,
        w_abs_norm: f64,
        avg_abs: &[f64],
        noise: Option<f64>,
    ) -> Result<()> {
        let (subopt, subopt_stderr) = measure(self.problem, avg_abs, self.seed, t, self.opts)?;
        trace.records.push(TraceRecord {
            t,
            norm_w: w_abs_norm,
            norm_wag: norm(avg_abs),
            subopt,
            subopt_stderr,
            grad_noise_sq: noise,
            stage,
        });
        Ok(())
    }

    /// `‖g − ∇L(w_md)‖²` when the exact gradient is available.
    pub fn noise(&self, w_md_abs: &[f64], grad: &[f64]) -> Option<f64> {
        self.problem
            .exact_gradient(w_md_abs)
            .map(|exact| grad_noise_sq(grad, &exact))
    }
}

pub(crate) fn abort(trace: &mut RunTrace, err: &Error) -> bool {
    if let Error::NonFinite { iteration, what } = err {
        trace.status = TraceStatus::Aborted {
            iteration: *iteration,
            what: (*what).to_string(),
        };
        true
    } else {
        false
    }
}

/// Runs one accelerated stage around `center`, appending to `trace`.
/// Returns the final averaged iterate in absolute coordinates; stops early
/// (with the trace flagged) on non-finite values.
pub(crate) fn run_stage(
    problem: &Problem,
    schedule: &StepSchedule,
    center: &[f64],
    rng: &mut RngState,
    recorder: &Recorder<'_>,
    trace: &mut RunTrace,
    t_offset: u64,
    stage: u32,
) -> Result<Vec<f64>> {
    let mut state = OptimizerState::zeros(problem.dim());
    let full = recorder.opts.recording == Recording::Full;
    while state.t < schedule.horizon {
        let info = match acc_step(&mut state, schedule, problem, center, rng) {
            Ok(info) => info,
            Err(e) if abort(trace, &e) => {
                // Re-key the iteration to the global counter.
                if let TraceStatus::Aborted { iteration, .. } = &mut trace.status {
                    *iteration += t_offset;
                }
                break;
            }
            Err(e) => return Err(e),
        };
        if full || state.t == schedule.horizon {
            let w_md_abs = add(center, &info.w_md);
            let noise = if full { recorder.noise(&w_md_abs, &info.grad) } else { None };
            let w_abs = add(center, &state.w);
            let ag_abs = add(center, &state.w_ag);
            recorder.record(trace, t_offset + state.t, stage, norm(&w_abs), &ag_abs, noise)?;
        }
    }
    Ok(add(center, &state.w_ag))
}

/// Accelerated minibatch SGD for `horizon` iterations from `w₀ = 0`, returning `w^ag_T`.
pub fn run_acc_mb_sgd(problem: &Problem, b: usize, horizon: u64, seed: u64, opts: &RunOptions) -> Result<RunOutput> {
    let radius = opts.resolve_radius(problem)?;
    let noise_sq = opts.resolve_noise_sq(problem)?;
    let schedule = make_schedule(problem.meta().smoothness, b, horizon, radius, noise_sq)?;
    let header = TraceHeader {
        algorithm: Algorithm::AccMbSgd,
        problem_hash: problem.config_hash(),
        problem: problem.config().cloned(),
        batch: b,
        horizon,
        seed,
        gamma: Some(schedule.gamma),
        radius,
        noise_sq,
        schedule_hash: schedule.hash(),
    };
    let mut trace = RunTrace::new(header);
    let recorder = Recorder { problem, seed, opts };
    let origin = vec![0.0; problem.dim()];
    recorder.record(&mut trace, 0, 0, 0.0, &origin, None)?;
    let mut rng = RngState::new(seed);
    let w = run_stage(problem, &schedule, &origin, &mut rng, &recorder, &mut trace, 0, 0)?;
    Ok(RunOutput { w, trace })
}

pub(crate) fn json_hash<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("schedule serializes"))
}
