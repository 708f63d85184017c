//! Constructors for the built-in problem families.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{AtomTable, DataModel, Problem, ProblemConfig, ProblemMeta};
use crate::linalg::{dot, norm};
use crate::{Error, Result};

/// Relative cutoff below which singular values and eigenvalues count as zero.
pub(crate) const RANK_TOL: f64 = 1e-10;

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be non-negative and finite, got {v}")))
    }
}

/// `cols` orthonormal vectors in `R^dim` from the QR factor of a Gaussian matrix.
fn random_frame(dim: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let g = DMatrix::<f64>::from_fn(dim, cols, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    (0..cols).map(|j| q.column(j).iter().copied().collect()).collect()
}

/// Orthonormal basis of the span of `rows`.
pub(crate) fn row_space_basis(rows: &[&Vec<f64>], dim: usize) -> Result<Vec<Vec<f64>>> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let m = DMatrix::<f64>::from_fn(rows.len(), dim, |i, j| rows[i][j]);
    let svd = m.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not return right singular vectors".into()))?;
    let smax = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    Ok(svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax > 0.0 && s > RANK_TOL * smax)
        .map(|(k, _)| v_t.row(k).iter().copied().collect())
        .collect())
}

fn atom_table(rows: Vec<Vec<f64>>, labels: Vec<f64>, weights: Vec<f64>, dim: usize) -> Result<AtomTable> {
    let uniform = weights.windows(2).all(|w| w[0] == w[1]);
    let cumulative = if uniform {
        None
    } else {
        let mut acc = 0.0;
        Some(
            weights
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect(),
        )
    };
    let active: Vec<&Vec<f64>> = rows
        .iter()
        .zip(&weights)
        .filter(|(_, &p)| p > 0.0)
        .map(|(r, _)| r)
        .collect();
    let row_space = row_space_basis(&active, dim)?;
    Ok(AtomTable {
        rows,
        labels,
        weights,
        cumulative,
        row_space,
    })
}

/// Smallest nonzero eigenvalue of the second-moment matrix `Σ p_k x_k x_kᵀ`.
fn smallest_nonzero_eigenvalue(table: &AtomTable, dim: usize) -> f64 {
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for (x, p) in table.rows.iter().zip(&table.weights) {
        let v = DVector::from_column_slice(x);
        m += (&v * v.transpose()) * *p;
    }
    let eig = m.symmetric_eigen();
    let max = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    eig.eigenvalues
        .iter()
        .copied()
        .filter(|&e| e > RANK_TOL * max)
        .fold(f64::INFINITY, f64::min)
}

/// Interpolating least squares: `x` uniform over `n_atoms` orthonormal
/// directions scaled to `‖x‖² = H`, labels from a planted `w°` with `‖w°‖ = B`.
pub fn make_interpolation_least_squares(
    dim: usize,
    n_atoms: usize,
    smoothness: f64,
    radius: f64,
    seed: u64,
) -> Result<Problem> {
    if n_atoms == 0 {
        return Err(Error::invalid("n_atoms", "must be at least 1"));
    }
    if dim < n_atoms {
        return Err(Error::invalid(
            "dim",
            format!("need dim >= n_atoms for exact interpolation, got {dim} < {n_atoms}"),
        ));
    }
    positive("smoothness", smoothness)?;
    positive("radius", radius)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt_h = smoothness.sqrt();
    let rows: Vec<Vec<f64>> = random_frame(dim, n_atoms, &mut rng)
        .into_iter()
        .map(|q| q.into_iter().map(|v| v * sqrt_h).collect())
        .collect();

    // Plant by a min-norm solve against random targets, then rescale exactly.
    let design = DMatrix::<f64>::from_fn(n_atoms, dim, |i, j| rows[i][j]);
    let targets = DVector::<f64>::from_fn(n_atoms, |_, _| rng.sample(StandardNormal));
    let solved = design
        .svd(true, true)
        .solve(&targets, RANK_TOL)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let mut planted: Vec<f64> = solved.iter().copied().collect();
    let n = norm(&planted);
    if n == 0.0 {
        return Err(Error::Numerical("planted interpolator vanished".into()));
    }
    planted.iter_mut().for_each(|v| *v *= radius / n);
    let labels: Vec<f64> = rows.iter().map(|x| dot(&planted, x)).collect();

    let weights = vec![1.0 / n_atoms as f64; n_atoms];
    let delta = labels.iter().map(|y| 0.5 * y * y).sum::<f64>() / n_atoms as f64;
    let table = atom_table(rows, labels, weights, dim)?;
    let lambda = smallest_nonzero_eigenvalue(&table, dim);

    let meta = ProblemMeta {
        smoothness,
        radius,
        lstar: 0.0,
        sigma_star_sq: 0.0,
        lambda,
        delta,
        wstar: Some(planted),
    };
    let config = ProblemConfig::InterpolationLeastSquares {
        dim,
        n_atoms,
        smoothness,
        radius,
        seed,
    };
    Ok(Problem::new(config, dim, meta, DataModel::Atoms(table)))
}

/// Sign-vector construction: `x` uniform over `{√H e_1, …, √H e_2n}` and
/// `y = ⟨x, (B/√(2n)) σ⟩`.
pub fn make_sign_vector_problem(n: usize, smoothness: f64, radius: f64, signs: &[i8]) -> Result<Problem> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if signs.len() != 2 * n {
        return Err(Error::invalid(
            "signs",
            format!("expected {} signs, got {}", 2 * n, signs.len()),
        ));
    }
    if signs.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::invalid("signs", "entries must be +1 or -1"));
    }
    positive("smoothness", smoothness)?;
    positive("radius", radius)?;

    let dim = 2 * n;
    let sqrt_h = smoothness.sqrt();
    let coord = radius / (dim as f64).sqrt();
    let wstar: Vec<f64> = signs.iter().map(|&s| coord * f64::from(s)).collect();
    let rows: Vec<Vec<f64>> = (0..dim)
        .map(|k| {
            let mut x = vec![0.0; dim];
            x[k] = sqrt_h;
            x
        })
        .collect();
    let labels: Vec<f64> = (0..dim).map(|k| sqrt_h * wstar[k]).collect();
    let weights = vec![1.0 / dim as f64; dim];
    let table = atom_table(rows, labels, weights, dim)?;

    let meta = ProblemMeta {
        smoothness,
        radius,
        lstar: 0.0,
        sigma_star_sq: 0.0,
        lambda: smoothness / dim as f64,
        delta: smoothness * radius * radius / (4 * n) as f64,
        wstar: Some(wstar),
    };
    let config = ProblemConfig::SignVector {
        n,
        smoothness,
        radius,
        signs: signs.to_vec(),
    };
    Ok(Problem::new(config, dim, meta, DataModel::Atoms(table)))
}

/// One-dimensional spike: `(0, 0)` with probability `1 − p`, otherwise
/// `x = √H` and `y ~ N(sign·√H·B, s²)`.
pub fn make_gaussian_spike_problem(smoothness: f64, radius: f64, p: f64, s: f64, sign: i8) -> Result<Problem> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid("p", format!("must lie in (0, 1], got {p}")));
    }
    if sign != 1 && sign != -1 {
        return Err(Error::invalid("sign", "must be +1 or -1"));
    }
    non_negative("smoothness", smoothness)?;
    non_negative("radius", radius)?;
    non_negative("s", s)?;

    let sqrt_h = smoothness.sqrt();
    let sign_f = f64::from(sign);
    let meta = ProblemMeta {
        smoothness,
        radius,
        lstar: 0.5 * p * s * s,
        sigma_star_sq: p * smoothness * s * s,
        lambda: smoothness * p,
        delta: 0.5 * p * smoothness * radius * radius,
        wstar: Some(vec![sign_f * radius]),
    };
    let config = ProblemConfig::GaussianSpike {
        smoothness,
        radius,
        p,
        s,
        sign,
    };
    let model = DataModel::Spike {
        p,
        sqrt_h,
        mean: sign_f * sqrt_h * radius,
        s,
    };
    Ok(Problem::new(config, 1, meta, model))
}

/// Underdetermined least squares with a rank-`rank` second-moment matrix whose
/// nonzero eigenvalues lie in `[λ, H]`, smallest exactly `λ`, and an affine
/// solution set of dimension `dim − rank`. The planted solution is scaled so
/// `L(0) = Δ`.
pub fn make_growth_problem(
    dim: usize,
    rank: usize,
    lambda: f64,
    smoothness: f64,
    delta: f64,
    seed: u64,
) -> Result<Problem> {
    if rank == 0 || rank >= dim {
        return Err(Error::invalid("rank", format!("need 1 <= rank < dim, got rank={rank}, dim={dim}")));
    }
    positive("lambda", lambda)?;
    positive("smoothness", smoothness)?;
    positive("delta", delta)?;
    if lambda > smoothness {
        return Err(Error::invalid("lambda", "must not exceed smoothness"));
    }
    // Per-sample smoothness bounds the trace of the second moment by H.
    if rank as f64 * lambda > smoothness * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "lambda",
            format!("rank * lambda must not exceed smoothness ({} > {smoothness})", rank as f64 * lambda),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = random_frame(dim, rank, &mut rng);
    let sqrt_h = smoothness.sqrt();

    let mut eigen = vec![lambda];
    if rank > 1 {
        let rest = (smoothness - lambda) / (rank - 1) as f64;
        eigen.extend(std::iter::repeat_n(rest.max(lambda), rank - 1));
    }
    let mut weights: Vec<f64> = eigen.iter().map(|e| e / smoothness).collect();

    let mut coeffs: Vec<f64> = (0..rank).map(|_| rng.sample(StandardNormal)).collect();
    let l0: f64 = coeffs.iter().zip(&eigen).map(|(c, e)| 0.5 * e * c * c).sum();
    let scale = (delta / l0).sqrt();
    coeffs.iter_mut().for_each(|c| *c *= scale);

    let mut planted = vec![0.0; dim];
    for (c, u) in coeffs.iter().zip(&frame) {
        crate::linalg::axpy(*c, u, &mut planted);
    }

    let mut rows: Vec<Vec<f64>> = frame
        .iter()
        .map(|u| u.iter().map(|v| v * sqrt_h).collect())
        .collect();
    let mut labels: Vec<f64> = coeffs.iter().map(|c| sqrt_h * c).collect();
    let null_mass = 1.0 - weights.iter().sum::<f64>();
    if null_mass > 1e-15 {
        rows.push(vec![0.0; dim]);
        labels.push(0.0);
        weights.push(null_mass);
    }
    let table = atom_table(rows, labels, weights, dim)?;

    let meta = ProblemMeta {
        smoothness,
        radius: norm(&planted),
        lstar: 0.0,
        sigma_star_sq: 0.0,
        lambda,
        delta,
        wstar: Some(planted),
    };
    let config = ProblemConfig::Growth {
        dim,
        rank,
        lambda,
        smoothness,
        delta,
        seed,
    };
    Ok(Problem::new(config, dim, meta, DataModel::Atoms(table)))
}

/// Noiseless quadratic `ℓ(w; z) = L(w) = ½ Σ μ_i (w_i − w*_i)²` with
/// `μ_i = H·decay^{−i}` and `w*` spread evenly over coordinates, `‖w*‖ = B`.
/// A geometric spectrum makes the deterministic `1/T²` regime visible over
/// many octaves of `T`.
pub fn make_noiseless_quadratic(dim: usize, smoothness: f64, radius: f64, decay: f64) -> Result<Problem> {
    if dim == 0 {
        return Err(Error::invalid("dim", "must be at least 1"));
    }
    positive("smoothness", smoothness)?;
    positive("radius", radius)?;
    if !(decay.is_finite() && decay >= 1.0) {
        return Err(Error::invalid("decay", "must be >= 1"));
    }
    let curvature: Vec<f64> = (0..dim).map(|i| smoothness * decay.powi(-(i as i32))).collect();
    let center = vec![radius / (dim as f64).sqrt(); dim];
    let delta = curvature
        .iter()
        .zip(&center)
        .map(|(m, c)| 0.5 * m * c * c)
        .sum();
    let meta = ProblemMeta {
        smoothness,
        radius,
        lstar: 0.0,
        sigma_star_sq: 0.0,
        lambda: *curvature.last().expect("dim >= 1"),
        delta,
        wstar: Some(center.clone()),
    };
    let config = ProblemConfig::NoiselessQuadratic {
        dim,
        smoothness,
        radius,
        decay,
    };
    Ok(Problem::new(
        config,
        dim,
        meta,
        DataModel::Deterministic { curvature, center },
    ))
}
