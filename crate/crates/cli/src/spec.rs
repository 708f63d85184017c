//! Experiment specifications: the JSON files consumed by `optaccel run`.
//!
//! The schema is strict: unknown keys are rejected, and every grid must be
//! nonempty. See `docs/spec-schema.md` for a field-by-field description.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use optaccel_core::analysis::Algorithm;
use optaccel_core::digest::sha256_hex;
use optaccel_core::optimizers::{Averaging, Recording};
use optaccel_core::problems::ProblemConfig;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub count: u32,
    #[serde(default)]
    pub base: u64,
}

/// Values that replace problem metadata or default algorithm settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    /// Upper bound `L̃*` on the minimum loss.
    pub lstar: Option<f64>,
    /// Projection radius `B̃`.
    pub radius: Option<f64>,
    /// Noise level `σ*²` used in the stepsize (takes precedence over `lstar`).
    pub noise_sq: Option<f64>,
    /// Restart ratio; defaults to `e`.
    pub theta: Option<f64>,
    /// Final target of restarted runs, as an absolute suboptimality.
    pub restart_eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub problems: Vec<ProblemConfig>,
    pub algorithms: Vec<Algorithm>,
    pub batch_sizes: Vec<usize>,
    /// Iteration budgets; restarted runs take theirs from the stage plan instead.
    pub horizons: Vec<u64>,
    pub seeds: SeedSpec,
    /// Targets for the time-to-ε tables; `speedup.csv` is written only when nonempty.
    #[serde(default)]
    pub eps: Vec<f64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub overrides: Overrides,
    /// Stepsizes tried by plain SGD; each is capped at `1/(2H)`.
    #[serde(default = "default_sgd_steps")]
    pub sgd_steps: Vec<f64>,
    #[serde(default)]
    pub sgd_averaging: Averaging,
    #[serde(default)]
    pub recording: Recording,
    /// Worker threads; `OPTACCEL_WORKERS` takes precedence.
    #[serde(default)]
    pub workers: Option<usize>,
}

/// `0.5 · 2^{-k}` for `k = 0..=5`.
pub fn default_sgd_steps() -> Vec<f64> {
    (0..6).map(|k| 0.5 * 0.5f64.powi(k)).collect()
}

impl ExperimentSpec {
    /// Checks everything serde cannot: nonempty grids, positive values, and
    /// that every problem builds.
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, why: &str| Err(HarnessError::Config(format!("invalid `{field}`: {why}")));
        if self.problems.is_empty() {
            return fail("problems", "empty grid");
        }
        if self.algorithms.is_empty() {
            return fail("algorithms", "empty grid");
        }
        if self.batch_sizes.is_empty() {
            return fail("batch_sizes", "empty grid");
        }
        if self.batch_sizes.contains(&0) {
            return fail("batch_sizes", "entries must be at least 1");
        }
        let needs_horizons = self.algorithms.iter().any(|a| *a != Algorithm::Restarted);
        if needs_horizons && self.horizons.is_empty() {
            return fail("horizons", "empty grid");
        }
        if self.horizons.contains(&0) {
            return fail("horizons", "entries must be at least 1");
        }
        if self.seeds.count == 0 {
            return fail("seeds.count", "must be at least 1");
        }
        if self.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return fail("eps", "entries must be positive");
        }
        if self.algorithms.contains(&Algorithm::Sgd)
            && (self.sgd_steps.is_empty() || self.sgd_steps.iter().any(|s| !(s.is_finite() && *s > 0.0)))
        {
            return fail("sgd_steps", "needs at least one positive stepsize");
        }
        if self.algorithms.contains(&Algorithm::Restarted) {
            match self.overrides.restart_eps {
                Some(e) if e.is_finite() && e > 0.0 => {}
                _ => return fail("overrides.restart_eps", "restarted runs need a positive target"),
            }
        }
        if self.workers == Some(0) {
            return fail("workers", "must be at least 1");
        }
        for (i, p) in self.problems.iter().enumerate() {
            p.build()
                .map_err(|e| HarnessError::Config(format!("invalid `problems[{i}]`: {e}")))?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        sha256_hex(&canonical_json(self))
    }
}

fn canonical_json(spec: &ExperimentSpec) -> Vec<u8> {
    serde_json::to_vec(spec).expect("spec serializes")
}

/// Parses and validates a spec from JSON text.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec = serde_json::from_str(text).map_err(|e| {
        HarnessError::Config(format!("parse error at line {}, column {}: {e}", e.line(), e.column()))
    })?;
    spec.validate()?;
    Ok(spec)
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_spec(&text).map_err(|e| match e {
        HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn spec_to_string(spec: &ExperimentSpec) -> String {
    let mut s = serde_json::to_string_pretty(spec).expect("spec serializes");
    s.push('\n');
    s
}

pub fn save_spec(spec: &ExperimentSpec, path: &Path) -> Result<()> {
    fs::write(path, spec_to_string(spec)).map_err(|e| HarnessError::io(path, e))
}
