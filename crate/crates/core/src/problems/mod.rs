//! Stochastic objectives `L(w) = E_z ℓ(w; z)` and their synthetic families.
//!
//! Every built-in family is a least-squares model: a data point `z = (x, y)`
//! costs `ℓ(w; z) = ½(⟨w, x⟩ − y)²`, which is non-negative, convex and
//! `‖x‖²`-smooth. The families differ only in the data distribution, and each
//! one carries [`ProblemMeta`] describing the constants the optimizers need.
//!
//! Problems are immutable once built and can be shared across threads. All
//! randomness comes from the caller's [`RngState`].

mod certify;
mod families;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::linalg::{axpy, dot, norm_sq};
use crate::rng::RngState;
use crate::{Error, Result};

pub use certify::{certify_assumptions, AssumptionReport, ASSUMPTION_RTOL, GROWTH_TOL};
pub use families::{
    make_gaussian_spike_problem, make_growth_problem, make_interpolation_least_squares,
    make_noiseless_quadratic, make_sign_vector_problem,
};

/// Constants certifying which assumptions a problem satisfies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    /// Per-sample smoothness constant `H`.
    pub smoothness: f64,
    /// Norm bound `B` on a minimizer.
    pub radius: f64,
    /// Minimum expected loss `L*`.
    pub lstar: f64,
    /// `E‖∇ℓ(w*; z) − ∇L(w*)‖²`.
    pub sigma_star_sq: f64,
    /// Quadratic-growth constant, zero when the growth condition is not certified.
    pub lambda: f64,
    /// Bound on the initial suboptimality `L(0) − L*`.
    pub delta: f64,
    /// A known minimizer, when available.
    pub wstar: Option<Vec<f64>>,
}

/// One data point drawn from a problem's distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sample {
    /// Explicit labelled feature vector.
    Row { x: Vec<f64>, y: f64 },
    /// Index into the problem's finite table of labelled rows.
    Atom(usize),
    /// Noiseless draw: the per-sample loss equals the expected loss.
    Exact,
}

/// Declarative description of a built-in problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    InterpolationLeastSquares {
        dim: usize,
        n_atoms: usize,
        smoothness: f64,
        radius: f64,
        seed: u64,
    },
    SignVector {
        n: usize,
        smoothness: f64,
        radius: f64,
        signs: Vec<i8>,
    },
    GaussianSpike {
        smoothness: f64,
        radius: f64,
        p: f64,
        s: f64,
        sign: i8,
    },
    Growth {
        dim: usize,
        rank: usize,
        lambda: f64,
        smoothness: f64,
        delta: f64,
        seed: u64,
    },
    NoiselessQuadratic {
        dim: usize,
        smoothness: f64,
        radius: f64,
        decay: f64,
    },
}

impl ProblemConfig {
    pub fn family(&self) -> &'static str {
        match self {
            ProblemConfig::InterpolationLeastSquares { .. } => "interpolation_least_squares",
            ProblemConfig::SignVector { .. } => "sign_vector",
            ProblemConfig::GaussianSpike { .. } => "gaussian_spike",
            ProblemConfig::Growth { .. } => "growth",
            ProblemConfig::NoiselessQuadratic { .. } => "noiseless_quadratic",
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("problem config serializes");
        sha256_hex(&bytes)
    }

    pub fn build(&self) -> Result<Problem> {
        match *self {
            ProblemConfig::InterpolationLeastSquares {
                dim,
                n_atoms,
                smoothness,
                radius,
                seed,
            } => make_interpolation_least_squares(dim, n_atoms, smoothness, radius, seed),
            ProblemConfig::SignVector {
                n,
                smoothness,
                radius,
                ref signs,
            } => make_sign_vector_problem(n, smoothness, radius, signs),
            ProblemConfig::GaussianSpike {
                smoothness,
                radius,
                p,
                s,
                sign,
            } => make_gaussian_spike_problem(smoothness, radius, p, s, sign),
            ProblemConfig::Growth {
                dim,
                rank,
                lambda,
                smoothness,
                delta,
                seed,
            } => make_growth_problem(dim, rank, lambda, smoothness, delta, seed),
            ProblemConfig::NoiselessQuadratic {
                dim,
                smoothness,
                radius,
                decay,
            } => make_noiseless_quadratic(dim, smoothness, radius, decay),
        }
    }
}

/// User-supplied sampler and loss for objectives outside the built-in
/// families. Such problems have no closed-form expected loss.
pub trait SampleObjective: Send + Sync + fmt::Debug {
    fn draw(&self, rng: &mut dyn RngCore) -> Sample;
    fn loss(&self, w: &[f64], z: &Sample) -> f64;
    fn add_gradient(&self, w: &[f64], z: &Sample, out: &mut [f64]);
}

/// Finite table of labelled rows drawn with fixed probabilities.
#[derive(Debug, Clone)]
pub(crate) struct AtomTable {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub weights: Vec<f64>,
    /// Cumulative weights; `None` when the draw is uniform.
    pub cumulative: Option<Vec<f64>>,
    /// Orthonormal basis of the span of rows with positive weight.
    pub row_space: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub(crate) enum DataModel {
    Atoms(AtomTable),
    /// `(0, 0)` with probability `1 − p`, otherwise `x = √H`, `y ~ N(mean, s²)`.
    Spike {
        p: f64,
        sqrt_h: f64,
        mean: f64,
        s: f64,
    },
    /// `ℓ(w; z) = L(w) = ½ Σ curvature_i (w_i − center_i)²`.
    Deterministic {
        curvature: Vec<f64>,
        center: Vec<f64>,
    },
    Custom(Arc<dyn SampleObjective>),
}

/// A sampled stochastic objective with certified metadata.
#[derive(Debug, Clone)]
pub struct Problem {
    config: Option<ProblemConfig>,
    dim: usize,
    meta: ProblemMeta,
    pub(crate) model: DataModel,
}

impl Problem {
    pub(crate) fn new(config: ProblemConfig, dim: usize, meta: ProblemMeta, model: DataModel) -> Self {
        Self {
            config: Some(config),
            dim,
            meta,
            model,
        }
    }

    /// Wraps a user-defined objective. The metadata is trusted as given.
    pub fn custom(dim: usize, meta: ProblemMeta, objective: Arc<dyn SampleObjective>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        Ok(Self {
            config: None,
            dim,
            meta,
            model: DataModel::Custom(objective),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn meta(&self) -> &ProblemMeta {
        &self.meta
    }

    pub fn config(&self) -> Option<&ProblemConfig> {
        self.config.as_ref()
    }

    /// Hash of the generating config, or `"custom"` for user objectives.
    pub fn config_hash(&self) -> String {
        self.config
            .as_ref()
            .map(ProblemConfig::hash)
            .unwrap_or_else(|| "custom".to_string())
    }

    pub fn has_exact_loss(&self) -> bool {
        !matches!(self.model, DataModel::Custom(_))
    }

    /// Whether the expected loss is a least-squares objective with a known design.
    pub fn is_least_squares(&self) -> bool {
        self.has_exact_loss()
    }

    /// Draws one data point.
    pub fn draw(&self, rng: &mut dyn RngCore) -> Sample {
        match &self.model {
            DataModel::Atoms(table) => {
                let k = match &table.cumulative {
                    None => rng.random_range(0..table.rows.len()),
                    Some(cum) => {
                        let u: f64 = rng.random();
                        cum.partition_point(|&c| c <= u).min(cum.len() - 1)
                    }
                };
                Sample::Atom(k)
            }
            DataModel::Spike { p, sqrt_h, mean, s } => {
                let u: f64 = rng.random();
                if u < *p {
                    let noise: f64 = rng.sample(StandardNormal);
                    Sample::Row {
                        x: vec![*sqrt_h],
                        y: mean + s * noise,
                    }
                } else {
                    Sample::Row { x: vec![0.0], y: 0.0 }
                }
            }
            DataModel::Deterministic { .. } => Sample::Exact,
            DataModel::Custom(obj) => obj.draw(rng),
        }
    }

    /// Per-sample loss `ℓ(w; z)`.
    pub fn loss(&self, w: &[f64], z: &Sample) -> f64 {
        if let DataModel::Custom(obj) = &self.model {
            return obj.loss(w, z);
        }
        match z {
            Sample::Row { x, y } => {
                let r = dot(w, x) - y;
                0.5 * r * r
            }
            Sample::Atom(k) => {
                let table = self.atoms().expect("atom sample on atom problem");
                let r = dot(w, &table.rows[*k]) - table.labels[*k];
                0.5 * r * r
            }
            Sample::Exact => self.exact_loss(w).expect("exact sample on closed-form problem"),
        }
    }

    /// Adds `∇ℓ(w; z)` into `out`.
    pub fn add_gradient(&self, w: &[f64], z: &Sample, out: &mut [f64]) {
        if let DataModel::Custom(obj) = &self.model {
            obj.add_gradient(w, z, out);
            return;
        }
        match z {
            Sample::Row { x, y } => {
                let r = dot(w, x) - y;
                axpy(r, x, out);
            }
            Sample::Atom(k) => {
                let table = self.atoms().expect("atom sample on atom problem");
                let row = &table.rows[*k];
                let r = dot(w, row) - table.labels[*k];
                axpy(r, row, out);
            }
            Sample::Exact => match &self.model {
                DataModel::Deterministic { curvature, center } => {
                    for (o, (m, (wi, ci))) in out.iter_mut().zip(curvature.iter().zip(w.iter().zip(center))) {
                        *o += m * (wi - ci);
                    }
                }
                _ => {
                    let g = self
                        .exact_gradient(w)
                        .expect("exact sample on closed-form problem");
                    axpy(1.0, &g, out);
                }
            },
        }
    }

    pub fn gradient(&self, w: &[f64], z: &Sample) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.add_gradient(w, z, &mut g);
        g
    }

    /// Closed-form expected loss `L(w)`.
    pub fn exact_loss(&self, w: &[f64]) -> Option<f64> {
        match &self.model {
            DataModel::Atoms(table) => Some(
                table
                    .rows
                    .iter()
                    .zip(&table.labels)
                    .zip(&table.weights)
                    .map(|((x, y), p)| {
                        let r = dot(w, x) - y;
                        0.5 * p * r * r
                    })
                    .sum(),
            ),
            DataModel::Spike { p, sqrt_h, mean, s } => {
                let r = sqrt_h * w[0] - mean;
                Some(0.5 * p * r * r + 0.5 * p * s * s)
            }
            DataModel::Deterministic { curvature, center } => Some(
                curvature
                    .iter()
                    .zip(w.iter().zip(center))
                    .map(|(m, (wi, ci))| 0.5 * m * (wi - ci) * (wi - ci))
                    .sum(),
            ),
            DataModel::Custom(_) => None,
        }
    }

    /// Closed-form `∇L(w)`.
    pub fn exact_gradient(&self, w: &[f64]) -> Option<Vec<f64>> {
        match &self.model {
            DataModel::Atoms(table) => {
                let mut g = vec![0.0; self.dim];
                for ((x, y), p) in table.rows.iter().zip(&table.labels).zip(&table.weights) {
                    let r = dot(w, x) - y;
                    axpy(p * r, x, &mut g);
                }
                Some(g)
            }
            DataModel::Spike { p, sqrt_h, mean, .. } => Some(vec![p * sqrt_h * (sqrt_h * w[0] - mean)]),
            DataModel::Deterministic { curvature, center } => Some(
                curvature
                    .iter()
                    .zip(w.iter().zip(center))
                    .map(|(m, (wi, ci))| m * (wi - ci))
                    .collect(),
            ),
            DataModel::Custom(_) => None,
        }
    }

    /// `L(w) − L*`, computed without cancellation where the model allows it.
    pub fn excess_loss(&self, w: &[f64]) -> Option<f64> {
        match &self.model {
            DataModel::Spike { p, sqrt_h, mean, .. } => {
                let r = sqrt_h * w[0] - mean;
                Some(0.5 * p * r * r)
            }
            DataModel::Deterministic { .. } => self.exact_loss(w),
            _ => self.exact_loss(w).map(|l| l - self.meta.lstar),
        }
    }

    /// Distance from `w` to the set of minimizers of `L`.
    pub fn distance_to_minimizers(&self, w: &[f64]) -> Option<f64> {
        let anchor = self.meta.wstar.as_ref()?;
        match &self.model {
            DataModel::Atoms(table) => {
                let r: Vec<f64> = w.iter().zip(anchor).map(|(a, b)| a - b).collect();
                let proj: f64 = table.row_space.iter().map(|q| dot(&r, q).powi(2)).sum();
                Some(proj.sqrt())
            }
            DataModel::Spike { p, sqrt_h, .. } if p * sqrt_h > 0.0 => Some((w[0] - anchor[0]).abs()),
            DataModel::Deterministic { curvature, center } if curvature.iter().all(|&m| m > 0.0) => {
                Some(crate::linalg::dist_sq(w, center).sqrt())
            }
            _ => None,
        }
    }

    /// Monte Carlo estimate of `L(w)` with its standard error.
    pub fn expected_loss_mc(&self, w: &[f64], n_samples: usize, seed: u64) -> Result<(f64, f64)> {
        if n_samples < 2 {
            return Err(Error::invalid("n_samples", "need at least two samples"));
        }
        let state = RngState::new(seed);
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for i in 0..n_samples {
            let mut rng = state.stream().sample_rng(0, i as u64);
            let z = self.draw(&mut rng);
            let v = self.loss(w, &z);
            let delta = v - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (v - mean);
        }
        let var = m2 / (n_samples - 1) as f64;
        Ok((mean, (var / n_samples as f64).sqrt()))
    }

    pub(crate) fn atoms(&self) -> Option<&AtomTable> {
        match &self.model {
            DataModel::Atoms(t) => Some(t),
            _ => None,
        }
    }
}

/// Draws `b` i.i.d. samples for the current iteration slot of `state` and
/// advances it. Sample `i` is a pure function of `(seed, slot, i)`.
pub fn sample_batch(problem: &Problem, b: usize, state: &mut RngState) -> Result<Vec<Sample>> {
    if b == 0 {
        return Err(Error::invalid("b", "minibatch size must be at least 1"));
    }
    let slot = state.advance();
    if let DataModel::Deterministic { .. } = problem.model {
        // Noiseless draws consume no randomness.
        return Ok(vec![Sample::Exact; b]);
    }
    Ok((0..b as u64)
        .map(|i| {
            let mut rng = state.stream().sample_rng(slot, i);
            problem.draw(&mut rng)
        })
        .collect())
}

/// Mean of per-sample gradients, accumulated in sample order.
pub fn minibatch_gradient(problem: &Problem, w: &[f64], batch: &[Sample]) -> Result<Vec<f64>> {
    let mut g = vec![0.0; problem.dim()];
    minibatch_gradient_into(problem, w, batch, &mut g)?;
    Ok(g)
}

pub(crate) fn minibatch_gradient_into(
    problem: &Problem,
    w: &[f64],
    batch: &[Sample],
    out: &mut [f64],
) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("batch", "must be nonempty"));
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    for z in batch {
        problem.add_gradient(w, z, out);
    }
    let inv = 1.0 / batch.len() as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    Ok(())
}

/// Squared gradient norm helper used by diagnostics.
pub(crate) fn grad_noise_sq(g: &[f64], exact: &[f64]) -> f64 {
    norm_sq(&crate::linalg::sub(g, exact))
}
