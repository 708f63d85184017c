//! Projected minibatch SGD with a constant stepsize and iterate averaging.

use serde::{Deserialize, Serialize};

use super::{abort, json_hash, project_ball_in_place, Recorder, Recording, RunOptions, RunOutput};
use crate::analysis::trace::{Algorithm, RunTrace, TraceHeader};
use crate::linalg::{all_finite, axpy, norm};
use crate::problems::{minibatch_gradient_into, sample_batch, Problem};
use crate::rng::RngState;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Mean of `w_1, …, w_T`.
    #[default]
    Uniform,
    /// Mean of the second half, `w_{⌊T/2⌋+1}, …, w_T`.
    Tail,
    /// Return `w_T` itself.
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdSchedule {
    /// Requested stepsize; the effective one is `min{1/(2H), step}`.
    pub step: f64,
    #[serde(default)]
    pub averaging: Averaging,
}

impl SgdSchedule {
    pub fn new(step: f64) -> Self {
        Self {
            step,
            averaging: Averaging::Uniform,
        }
    }

    pub fn effective_step(&self, smoothness: f64) -> f64 {
        self.step.min(0.5 / smoothness)
    }
}

/// `w_{t+1} = Π_B(w_t − η·g_t(w_t))` from `w₀ = 0`, returning the averaged iterate.
pub fn run_sgd(
    problem: &Problem,
    b: usize,
    horizon: u64,
    schedule: &SgdSchedule,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunOutput> {
    if b == 0 {
        return Err(Error::invalid("b", "minibatch size must be at least 1"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    if !(schedule.step.is_finite() && schedule.step > 0.0) {
        return Err(Error::invalid("step", format!("must be positive, got {}", schedule.step)));
    }
    let radius = opts.resolve_radius(problem)?;
    let eta = schedule.effective_step(problem.meta().smoothness);
    let header = TraceHeader {
        algorithm: Algorithm::Sgd,
        problem_hash: problem.config_hash(),
        problem: problem.config().cloned(),
        batch: b,
        horizon,
        seed,
        gamma: Some(eta),
        radius,
        noise_sq: 0.0,
        schedule_hash: json_hash(&(schedule, eta, radius, horizon)),
    };
    let mut trace = RunTrace::new(header);
    let recorder = Recorder { problem, seed, opts };
    let d = problem.dim();
    let mut w = vec![0.0; d];
    let mut avg = vec![0.0; d];
    let mut count = 0u64;
    recorder.record(&mut trace, 0, 0, 0.0, &avg, None)?;

    let start = match schedule.averaging {
        Averaging::Uniform => 0,
        Averaging::Tail => horizon / 2,
        Averaging::Last => horizon - 1,
    };
    let full = opts.recording == Recording::Full;
    let mut rng = RngState::new(seed);
    let mut grad = vec![0.0; d];
    for t in 0..horizon {
        let batch = sample_batch(problem, b, &mut rng)?;
        minibatch_gradient_into(problem, &w, &batch, &mut grad)?;
        if !all_finite(&grad) {
            abort(&mut trace, &Error::NonFinite { iteration: t, what: "gradient" });
            break;
        }
        let noise = if full { recorder.noise(&w, &grad) } else { None };
        axpy(-eta, &grad, &mut w);
        project_ball_in_place(&mut w, radius);
        if t >= start {
            count += 1;
            let inv = 1.0 / count as f64;
            for (a, wi) in avg.iter_mut().zip(&w) {
                *a += (wi - *a) * inv;
            }
        }
        if !all_finite(&w) {
            abort(&mut trace, &Error::NonFinite { iteration: t, what: "iterate" });
            break;
        }
        if full || t + 1 == horizon {
            // Before averaging starts the reported point is the current iterate.
            let reported = if count == 0 { &w } else { &avg };
            recorder.record(&mut trace, t + 1, 0, norm(&w), reported, noise)?;
        }
    }
    Ok(RunOutput { w: avg, trace })
}
