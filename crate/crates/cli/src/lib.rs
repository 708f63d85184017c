//! Experiment harness: spec-driven sweeps, verification suites and plot data.

pub mod error;
pub mod plotdata;
pub mod runner;
pub mod spec;
pub mod suites;

use optaccel_core::optimizers::make_schedule;

pub use error::{HarnessError, Result};

/// CSV table of `β_t` and `γ_t` for the stepsize rule, preceded by `#`
/// comment lines giving `γ` and its three candidate branches.
pub fn schedule_table(smoothness: f64, b: usize, horizon: u64, radius: f64, noise_sq: f64) -> Result<String> {
    let s = make_schedule(smoothness, b, horizon, radius, noise_sq)?;
    let [curvature, batch, noise] = s.gamma_branches();
    let mut out = format!(
        "# gamma = {:e}\n# branches: 1/(12H) = {curvature:e}, b/(24H(T+1)) = {batch:e}, noise = {noise:e}\nt,beta_t,gamma_t\n",
        s.gamma
    );
    for t in 0..horizon {
        out.push_str(&format!("{t},{},{:e}\n", s.beta(t), s.step(t)));
    }
    Ok(out)
}
