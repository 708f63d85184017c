use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{dist_sq, dot, norm, sub};
use crate::optimizers::project_ball;
use crate::rng::RngState;
use crate::{Error, Result};

/// One projected step `w_{t+1} = Π_B(w_t − γ_t g)` together with the point
/// `w_md` at which `g` was evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionInstance {
    pub w_t: Vec<f64>,
    pub w_md: Vec<f64>,
    pub g: Vec<f64>,
    pub step: f64,
    pub radius: f64,
}

impl ProjectionInstance {
    pub fn next(&self) -> Vec<f64> {
        let tilde: Vec<f64> = self
            .w_t
            .iter()
            .zip(&self.g)
            .map(|(w, g)| w - self.step * g)
            .collect();
        project_ball(&tilde, self.radius)
    }

    /// `lhs − rhs` of the three-point inequality at probe `w`; non-positive when it holds.
    pub fn gap(&self, w: &[f64], next: &[f64]) -> f64 {
        // The w_md terms cancel analytically; subtracting them before rounding
        // keeps the residual at w = next exactly zero instead of O(ulp(γ‖g‖)).
        let linear = self.step * dot(&self.g, &sub(next, w));
        let three_point = 0.5 * dist_sq(w, &self.w_t) - 0.5 * dist_sq(w, next) - 0.5 * dist_sq(next, &self.w_t);
        linear - three_point
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub passed: bool,
    /// Largest positive `lhs − rhs` over the probes (0 when none is positive).
    pub max_violation: f64,
    /// `|lhs − rhs|` at the probe `w = w_{t+1}`, where the inequality is tight.
    pub equality_residual: f64,
}

/// Violation tolerance for the projection inequality.
pub const LEMMA_TOL: f64 = 1e-9;

/// Evaluates the projection inequality
/// `γ⟨g, w₊ − w_md⟩ ≤ γ⟨g, w − w_md⟩ + ½‖w − w_t‖² − ½‖w − w₊‖² − ½‖w₊ − w_t‖²`
/// at each probe `w` in the ball.
pub fn check_projection_lemma(instance: &ProjectionInstance, probes: &[Vec<f64>]) -> Result<LemmaCheck> {
    if !(instance.radius > 0.0) {
        return Err(Error::invalid("radius", "must be positive"));
    }
    let next = instance.next();
    let mut max_violation = 0.0_f64;
    for w in probes {
        if norm(w) > instance.radius * (1.0 + 1e-12) {
            return Err(Error::invalid("probes", "every probe must lie in the ball"));
        }
        max_violation = max_violation.max(instance.gap(w, &next));
    }
    let equality_residual = instance.gap(&next, &next).abs();
    Ok(LemmaCheck {
        passed: max_violation <= LEMMA_TOL,
        max_violation,
        equality_residual,
    })
}

/// A reproducible random instance with `n_probes` probes in its ball.
///
/// Dimensions range over 1..=8 and radii over `[0.1, 10]`. A third of the
/// instances take steps large enough to leave the ball, so both the interior
/// and the projected branch are exercised.
pub fn random_projection_case(seed: u64, index: u64, n_probes: usize) -> (ProjectionInstance, Vec<Vec<f64>>) {
    let mut rng = RngState::new(seed).stream().sample_rng(index, 0);
    let d = rng.random_range(1..=8usize);
    let radius = 10f64.powf(rng.random_range(-1.0..1.0));
    let mut gauss = |scale: f64| -> Vec<f64> { (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect() };
    let w_t = project_ball(&gauss(radius), radius);
    let w_md = gauss(radius);
    let g = gauss(1.0);
    let step = if index.is_multiple_of(3) {
        10.0 * radius
    } else {
        0.1 * radius
    };
    let instance = ProjectionInstance {
        w_t,
        w_md,
        g,
        step,
        radius,
    };
    let probes = (0..n_probes)
        .map(|k| {
            let mut r = RngState::new(seed).stream().sample_rng(index, 1 + k as u64);
            let mut v: Vec<f64> = (0..d).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
            let n = norm(&v);
            // Every fourth probe sits on the sphere, where the projection acts.
            let target = if k % 4 == 0 { radius } else { radius * r.random::<f64>() };
            if n > 0.0 {
                v.iter_mut().for_each(|x| *x *= target / n);
            }
            v
        })
        .collect();
    (instance, probes)
}
