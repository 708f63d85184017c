//! Verification suites. Each suite runs a fixed, seeded experiment and checks
//! one or more acceptance criteria, producing a JSON report whose hash covers
//! everything except wall-clock time.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use optaccel_core::analysis::{
    check_projection_lemma, critical_batch, fit_log_linear, fit_rate, mean_and_stderr, median,
    random_projection_case, stage_ends, time_to_eps, CriticalBatch, FinalPoint, SpeedupTable,
};
use optaccel_core::digest::sha256_hex;
use optaccel_core::linalg::norm_sq;
use optaccel_core::optimizers::{
    convex_bound, make_stage_plan, run_acc_mb_sgd, run_restarted, run_sgd, RunOptions, RunOutput, SgdSchedule,
};
use optaccel_core::problems::{certify_assumptions, sample_batch, Problem, ProblemConfig};
use optaccel_core::rng::{derive_seed, RngState};

use crate::error::{HarnessError, Result};
use crate::spec::default_sgd_steps;

/// Suite names accepted by `optaccel verify`.
pub const SUITES: [&str; 7] = [
    "assumptions",
    "lemma1",
    "lemma3",
    "rate_convex",
    "rate_restart",
    "speedup",
    "sigma_star",
];

/// Base seed shared by every suite; per-run seeds are derived from it.
const SUITE_SEED: u64 = 0x5eed_2024;
const SEEDS: u64 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Raw measurements behind the verdict.
    pub data: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
    /// Wall-clock seconds; not covered by `report_hash`.
    pub elapsed_secs: f64,
    /// SHA-256 of the suite name and criteria.
    pub report_hash: String,
}

impl SuiteReport {
    fn new(suite: &str, criteria: Vec<CriterionReport>, elapsed_secs: f64) -> Self {
        let report_hash = sha256_hex(&serde_json::to_vec(&(suite, &criteria)).expect("report serializes"));
        Self {
            suite: suite.to_string(),
            passed: criteria.iter().all(|c| c.passed),
            criteria,
            elapsed_secs,
            report_hash,
        }
    }

    /// One line per criterion, for terminals.
    pub fn human_summary(&self) -> String {
        let mut out = String::new();
        for c in &self.criteria {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{verdict} criterion {} ({}): {}\n", c.id, c.name, c.detail));
        }
        out.push_str(&format!("suite {} finished in {:.1}s\n", self.suite, self.elapsed_secs));
        out
    }
}

/// Criterion ids checked by a suite.
pub fn suite_criteria(name: &str) -> Option<&'static [u32]> {
    Some(match name {
        "assumptions" => &[1],
        "lemma3" => &[2],
        "lemma1" => &[3],
        "rate_convex" => &[4, 5],
        "speedup" => &[6, 7],
        "rate_restart" => &[8],
        "sigma_star" => &[9],
        _ => return None,
    })
}

/// Runs a suite on a pool of `workers` threads (all cores when `None`).
/// The report does not depend on the worker count.
pub fn run_suite(name: &str, workers: Option<usize>) -> Result<SuiteReport> {
    if suite_criteria(name).is_none() {
        return Err(HarnessError::Config(format!(
            "unknown suite `{name}`; expected one of: {}",
            SUITES.join(", ")
        )));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let start = Instant::now();
    let criteria = pool.install(|| -> Result<Vec<CriterionReport>> {
        Ok(match name {
            "assumptions" => vec![assumptions()?],
            "lemma3" => vec![lemma3()?],
            "lemma1" => vec![lemma1()?],
            "rate_convex" => vec![deterministic_rate()?, interpolation_rate()?],
            "speedup" => speedup()?,
            "rate_restart" => vec![restart_rate()?],
            "sigma_star" => vec![sigma_star()?],
            _ => unreachable!(),
        })
    })?;
    Ok(SuiteReport::new(name, criteria, start.elapsed().as_secs_f64()))
}

fn seed(i: u64) -> u64 {
    derive_seed(SUITE_SEED, i)
}

fn final_value(out: RunOutput) -> f64 {
    if out.trace.is_completed() {
        out.trace.final_subopt().unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    }
}

/// Final suboptimality of accelerated minibatch SGD for each of the `SEEDS` seeds.
fn acc_finals(problem: &Problem, b: usize, horizon: u64, opts: &RunOptions) -> Result<Vec<f64>> {
    (0..SEEDS)
        .into_par_iter()
        .map(|i| Ok(final_value(run_acc_mb_sgd(problem, b, horizon, seed(i), opts)?)))
        .collect()
}

fn sgd_finals(problem: &Problem, b: usize, horizon: u64, step: f64) -> Result<Vec<f64>> {
    let schedule = SgdSchedule::new(step);
    let opts = RunOptions::endpoints();
    (0..SEEDS)
        .into_par_iter()
        .map(|i| Ok(final_value(run_sgd(problem, b, horizon, &schedule, seed(i), &opts)?)))
        .collect()
}

fn build(config: ProblemConfig) -> Result<Problem> {
    Ok(config.build()?)
}

/// `round(2^{k/4})` for `k = 8..=55`, deduplicated: a quarter-octave grid
/// from 4 to about 13 000 iterations.
pub fn horizon_grid() -> Vec<u64> {
    let mut grid: Vec<u64> = (8..56).map(|k| 2f64.powf(k as f64 / 4.0).round() as u64).collect();
    grid.dedup();
    grid
}

fn criterion(id: u32, name: &str, passed: bool, detail: String, data: Value) -> CriterionReport {
    CriterionReport {
        id,
        name: name.to_string(),
        passed,
        detail,
        data,
    }
}

// ---------------------------------------------------------------- criterion 1

fn builtin_configs() -> Vec<ProblemConfig> {
    vec![
        ProblemConfig::InterpolationLeastSquares {
            dim: 32,
            n_atoms: 16,
            smoothness: 1.0,
            radius: 1.0,
            seed: 0,
        },
        ProblemConfig::InterpolationLeastSquares {
            dim: 12,
            n_atoms: 8,
            smoothness: 2.5,
            radius: 3.0,
            seed: 1,
        },
        ProblemConfig::SignVector {
            n: 4,
            smoothness: 1.0,
            radius: 1.0,
            signs: vec![1, -1, 1, 1, -1, -1, 1, -1],
        },
        ProblemConfig::GaussianSpike {
            smoothness: 1.0,
            radius: 1.0,
            p: 1.0 / 64.0,
            s: 8.0,
            sign: 1,
        },
        ProblemConfig::GaussianSpike {
            smoothness: 3.0,
            radius: 0.5,
            p: 0.5,
            s: 0.0,
            sign: -1,
        },
        ProblemConfig::Growth {
            dim: 6,
            rank: 3,
            lambda: 0.25,
            smoothness: 1.0,
            delta: 1.0,
            seed: 0,
        },
        ProblemConfig::Growth {
            dim: 6,
            rank: 3,
            lambda: 0.1,
            smoothness: 1.0,
            delta: 1.0,
            seed: 3,
        },
        ProblemConfig::NoiselessQuadratic {
            dim: 16,
            smoothness: 1.0,
            radius: 1.0,
            decay: 4.0,
        },
    ]
}

fn assumptions() -> Result<CriterionReport> {
    let configs = builtin_configs();
    let reports = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| -> Result<_> {
            let p = build(c.clone())?;
            Ok(certify_assumptions(&p, 1000, seed(i as u64))?)
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = reports.iter().all(|r| r.passed());
    let worst = |f: fn(&optaccel_core::problems::AssumptionReport) -> f64| {
        reports.iter().map(f).fold(0.0_f64, f64::max)
    };
    let growth_slack = reports
        .iter()
        .filter_map(|r| r.growth_slack)
        .fold(f64::INFINITY, f64::min);
    let detail = format!(
        "{} problems x 1000 probes; worst relative violations: convexity {:.1e}, gradient Lipschitz {:.1e}, quadratic upper bound {:.1e}; min growth slack {:.2e}",
        configs.len(),
        worst(|r| r.convexity_violation),
        worst(|r| r.lipschitz_violation),
        worst(|r| r.upper_bound_violation),
        growth_slack,
    );
    let data = json!(configs
        .iter()
        .zip(&reports)
        .map(|(c, r)| json!({ "family": c.family(), "problem_hash": c.hash(), "report": r }))
        .collect::<Vec<_>>());
    Ok(criterion(1, "assumption certification", passed, detail, data))
}

// ---------------------------------------------------------------- criterion 2

fn lemma3() -> Result<CriterionReport> {
    const SAMPLES: usize = 100_000;
    let mut rows = Vec::new();
    let mut passed = true;
    for (i, lstar) in [0.01, 0.1, 1.0].into_iter().enumerate() {
        // L* = p·s²/2 with p = ½.
        let problem = build(ProblemConfig::GaussianSpike {
            smoothness: 1.0,
            radius: 1.0,
            p: 0.5,
            s: (4.0_f64 * lstar).sqrt(),
            sign: 1,
        })?;
        let meta = problem.meta().clone();
        let wstar = meta.wstar.clone().expect("spike problems know their minimizer");
        let mut state = RngState::new(seed(i as u64));
        let batch = sample_batch(&problem, SAMPLES, &mut state)?;
        let sq: Vec<f64> = batch.iter().map(|z| norm_sq(&problem.gradient(&wstar, z))).collect();
        let (mean, se) = mean_and_stderr(&sq);
        let bound = 2.0 * meta.smoothness * meta.lstar;
        let ok = mean <= bound + 3.0 * se;
        passed &= ok;
        rows.push(json!({ "target_lstar": lstar, "lstar": meta.lstar, "mean": mean, "stderr": se, "bound": bound, "passed": ok }));
    }
    let detail = rows
        .iter()
        .map(|r| format!("L*={}: {:.5} <= {:.5} + 3*{:.1e}", r["target_lstar"], r["mean"].as_f64().unwrap(), r["bound"].as_f64().unwrap(), r["stderr"].as_f64().unwrap()))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(criterion(2, "second moment of gradients at the minimizer", passed, detail, json!(rows)))
}

// ---------------------------------------------------------------- criterion 3

fn lemma1() -> Result<CriterionReport> {
    const INSTANCES: u64 = 1000;
    const PROBES: usize = 100;
    let checks = (0..INSTANCES)
        .into_par_iter()
        .map(|i| {
            let (instance, probes) = random_projection_case(SUITE_SEED, i, PROBES);
            Ok(check_projection_lemma(&instance, &probes)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_violation = checks.iter().map(|c| c.max_violation).fold(0.0_f64, f64::max);
    let max_residual = checks.iter().map(|c| c.equality_residual).fold(0.0_f64, f64::max);
    let passed = max_violation <= 1e-9 && max_residual <= 1e-12;
    let detail = format!(
        "{INSTANCES} instances x {PROBES} probes: max violation {max_violation:.2e} (<= 1e-9), equality residual {max_residual:.2e} (<= 1e-12)"
    );
    Ok(criterion(
        3,
        "projection inequality",
        passed,
        detail,
        json!({ "instances": INSTANCES, "probes": PROBES, "max_violation": max_violation, "max_equality_residual": max_residual }),
    ))
}

// ---------------------------------------------------------------- criterion 4

fn deterministic_rate() -> Result<CriterionReport> {
    let problem = build(ProblemConfig::NoiselessQuadratic {
        dim: 16,
        smoothness: 1.0,
        radius: 1.0,
        decay: 4.0,
    })?;
    // With b > 2(T+1) for every T on the grid the base stepsize stays at
    // 1/(12H), so the HB²/T² term is measured without the b-dependent branch.
    let b = 8194;
    let horizons: Vec<u64> = (5..=12).map(|k| 1u64 << k).collect();
    let opts = RunOptions::endpoints();
    let values = horizons
        .par_iter()
        .map(|&t| Ok(final_value(run_acc_mb_sgd(&problem, b, t, seed(0), &opts)?)))
        .collect::<Result<Vec<f64>>>()?;
    let grid: Vec<(f64, f64)> = horizons.iter().map(|&t| t as f64).zip(values.iter().copied()).collect();
    let fit = fit_rate(&grid)?;
    let passed = fit.slope <= -1.85 && fit.r_squared >= 0.98;
    let detail = format!("slope {:.3} (<= -1.85), r^2 {:.4} (>= 0.98)", fit.slope, fit.r_squared);
    Ok(criterion(
        4,
        "deterministic accelerated rate",
        passed,
        detail,
        json!({ "b": b, "horizons": horizons, "subopt": values, "fit": fit }),
    ))
}

// ---------------------------------------------------------------- criterion 5

fn interpolation_problem() -> Result<Problem> {
    build(ProblemConfig::InterpolationLeastSquares {
        dim: 32,
        n_atoms: 16,
        smoothness: 1.0,
        radius: 1.0,
        seed: 0,
    })
}

fn interpolation_rate() -> Result<CriterionReport> {
    let problem = interpolation_problem()?;
    let horizons: Vec<u64> = (6..=12).map(|k| 1u64 << k).collect();
    let opts = RunOptions::endpoints();
    let mut passed = true;
    let mut rows = Vec::new();
    let mut parts = Vec::new();
    for (b, max_slope) in [(1usize, -0.9), (64, -1.7)] {
        let medians = horizons
            .iter()
            .map(|&t| Ok(median(&acc_finals(&problem, b, t, &opts)?)))
            .collect::<Result<Vec<f64>>>()?;
        let grid: Vec<(f64, f64)> = horizons.iter().map(|&t| t as f64).zip(medians.iter().copied()).collect();
        let fit = fit_rate(&grid)?;
        let ok = fit.slope <= max_slope;
        passed &= ok;
        parts.push(format!("b={b}: slope {:.3} (<= {max_slope})", fit.slope));
        rows.push(json!({ "b": b, "horizons": horizons, "median_subopt": medians, "fit": fit, "max_slope": max_slope }));
    }
    Ok(criterion(5, "optimistic interpolation rate", passed, parts.join("; "), json!(rows)))
}

// ------------------------------------------------------------ criteria 6 and 7

const SPEEDUP_EPS: f64 = 1e-3;

/// Scans the horizon grid upward and stops at the first `T` whose median
/// reaches `eps`; the result equals `time_to_eps` over the full grid.
fn scan<F>(b: usize, mut finals_at: F) -> Result<Vec<FinalPoint>>
where
    F: FnMut(u64) -> Result<Vec<f64>>,
{
    let mut points = Vec::new();
    for t in horizon_grid() {
        let finals = finals_at(t)?;
        let reached = median(&finals) <= SPEEDUP_EPS;
        points.extend(finals.iter().enumerate().map(|(i, &v)| FinalPoint {
            b,
            horizon: t,
            seed: seed(i as u64),
            subopt: v,
        }));
        if reached {
            break;
        }
    }
    Ok(points)
}

fn table_json(table: &SpeedupTable) -> Value {
    json!(table.rows.iter().map(|r| json!({ "b": r.b, "t_to_eps": r.t_to_eps })).collect::<Vec<_>>())
}

fn speedup() -> Result<Vec<CriterionReport>> {
    let problem = interpolation_problem()?;
    let meta = problem.meta().clone();
    let hash = problem.config_hash();
    let opts = RunOptions::endpoints();

    let batches: Vec<usize> = (0..=8).map(|k| 1usize << k).collect();
    let mut points = Vec::new();
    for &b in &batches {
        points.extend(scan(b, |t| acc_finals(&problem, b, t, &opts))?);
    }
    let acc = time_to_eps(&points, SPEEDUP_EPS, &hash);

    // Criterion 6: halving in the noise-dominated regime plus the critical batch.
    let threshold = (meta.smoothness * meta.radius * meta.radius / SPEEDUP_EPS).sqrt();
    let mut pairs = Vec::new();
    let mut pairs_ok = true;
    for w in batches.windows(2) {
        let (b, b2) = (w[0], w[1]);
        let (t, t2) = (acc.t(b), acc.t(b2));
        let in_regime = t.is_none_or(|t| t as f64 > threshold);
        if !in_regime {
            continue;
        }
        let ok = match (t, t2) {
            (Some(t), Some(t2)) => t2 as f64 <= 0.6 * t as f64,
            _ => false,
        };
        pairs_ok &= ok;
        pairs.push(json!({ "b": b, "t": t, "t_2b": t2, "passed": ok }));
    }
    let critical = critical_batch(&acc)?;
    let b_star = match critical {
        CriticalBatch::Saturated(b) => Some(b),
        CriticalBatch::Unsaturated => None,
    };
    let b_star_ok = b_star.is_some_and(|b| {
        let b = b as f64;
        b >= threshold / 4.0 && b <= 4.0 * threshold
    });
    let c6 = criterion(
        6,
        "linear minibatch speedup",
        pairs_ok && b_star_ok && !pairs.is_empty(),
        format!(
            "T_to_eps {}; {} pairs in regime (T > {threshold:.2}) all halve by <= 0.6: {pairs_ok}; b* = {} within [{:.2}, {:.2}]: {b_star_ok}",
            fmt_table(&acc),
            pairs.len(),
            b_star.map_or("none".to_string(), |b| b.to_string()),
            threshold / 4.0,
            4.0 * threshold
        ),
        json!({ "eps": SPEEDUP_EPS, "threshold": threshold, "table": table_json(&acc), "pairs": pairs, "critical_batch": b_star }),
    );

    // Criterion 7: tuned plain SGD gains nothing from larger batches.
    let steps = default_sgd_steps();
    let sgd_batches = [1usize, 4, 16];
    let mut sgd_points = Vec::new();
    let mut chosen = Vec::new();
    for &b in &sgd_batches {
        let mut best_steps = Vec::new();
        let pts = scan(b, |t| {
            let mut best: Option<(f64, usize, Vec<f64>)> = None;
            for (k, &eta) in steps.iter().enumerate() {
                let finals = sgd_finals(&problem, b, t, eta)?;
                let m = median(&finals);
                if best.as_ref().is_none_or(|(bm, _, _)| m < *bm) {
                    best = Some((m, k, finals));
                }
            }
            let (_, k, finals) = best.expect("at least one stepsize");
            best_steps.push(k);
            Ok(finals)
        })?;
        chosen.push(json!({ "b": b, "step": steps[*best_steps.last().expect("scanned")] }));
        sgd_points.extend(pts);
    }
    let sgd = time_to_eps(&sgd_points, SPEEDUP_EPS, &hash);
    let sgd_ts: Vec<Option<u64>> = sgd_batches.iter().map(|&b| sgd.t(b)).collect();
    let variation = if sgd_ts.iter().all(Option::is_some) {
        let v: Vec<f64> = sgd_ts.iter().map(|t| t.unwrap() as f64).collect();
        let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        (hi - lo) / lo
    } else {
        f64::INFINITY
    };
    // The accelerated method on the same batches must speed up as in criterion 6.
    let acc_small: Vec<Option<u64>> = sgd_batches.iter().map(|&b| acc.t(b)).collect();
    let acc_drops = pairs
        .iter()
        .filter(|p| p["b"].as_u64().is_some_and(|b| b < 16))
        .all(|p| p["passed"].as_bool() == Some(true))
        && matches!((acc_small[0], acc_small[2]), (Some(t1), Some(t16)) if t16 < t1);
    let c7 = criterion(
        7,
        "no minibatch speedup for plain SGD",
        variation < 0.25 && acc_drops,
        format!(
            "SGD T_to_eps at b=1,4,16: {}; spread (max-min)/min = {variation:.3} (< 0.25); accelerated: {} (drops: {acc_drops})",
            fmt_opts(&sgd_ts),
            fmt_opts(&acc_small)
        ),
        json!({ "eps": SPEEDUP_EPS, "sgd_table": table_json(&sgd), "chosen_steps": chosen, "variation": variation, "acc": acc_small }),
    );
    Ok(vec![c6, c7])
}

fn fmt_opts(v: &[Option<u64>]) -> String {
    v.iter()
        .map(|t| t.map_or("-".to_string(), |t| t.to_string()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_table(table: &SpeedupTable) -> String {
    table
        .rows
        .iter()
        .map(|r| format!("{}:{}", r.b, r.t_to_eps.map_or("-".to_string(), |t| t.to_string())))
        .collect::<Vec<_>>()
        .join(" ")
}

// ---------------------------------------------------------------- criterion 8

fn restart_rate() -> Result<CriterionReport> {
    let problem = build(ProblemConfig::Growth {
        dim: 6,
        rank: 3,
        lambda: 0.25,
        smoothness: 1.0,
        delta: 1.0,
        seed: 0,
    })?;
    let meta = problem.meta().clone();
    let b = 8;
    let plan = make_stage_plan(
        meta.delta,
        0.01 * meta.delta,
        std::f64::consts::E,
        meta.lambda,
        meta.smoothness,
        b,
        meta.lstar,
    )?;
    let opts = RunOptions::endpoints();
    let per_seed = (0..SEEDS)
        .into_par_iter()
        .map(|i| {
            let out = run_restarted(&problem, &plan, seed(i), &opts)?;
            if !out.trace.is_completed() {
                return Err(HarnessError::Runtime("restarted run aborted".into()));
            }
            Ok(stage_ends(&out.trace.records)
                .into_iter()
                .map(|r| (r.t, r.subopt))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let stages = plan.stages.len();
    let mut cumulative = Vec::new();
    let mut medians = Vec::new();
    for k in 0..stages {
        cumulative.push(per_seed[0][k].0);
        medians.push(median(&per_seed.iter().map(|s| s[k].1).collect::<Vec<_>>()));
    }
    let bounds: Vec<f64> = (1..=stages).map(|t| 2.0 * (-(t as f64)).exp() * meta.delta).collect();
    let stages_ok = stages >= 5 && medians.iter().zip(&bounds).take(5).all(|(m, bd)| m <= bd);

    let restart_grid: Vec<(f64, f64)> = cumulative.iter().map(|&t| t as f64).zip(medians.iter().copied()).collect();
    let restart_fit = fit_log_linear(&restart_grid)?;

    // The accelerated method without restarts, with each cumulative budget as its horizon.
    let plain = cumulative
        .iter()
        .map(|&t| Ok(median(&acc_finals(&problem, b, t, &opts)?)))
        .collect::<Result<Vec<f64>>>()?;
    let plain_grid: Vec<(f64, f64)> = cumulative.iter().map(|&t| t as f64).zip(plain.iter().copied()).collect();
    let plain_loglog = fit_rate(&plain_grid)?;
    let plain_loglin = fit_log_linear(&plain_grid)?;

    let passed = stages_ok && restart_fit.r_squared >= 0.95 && plain_loglog.r_squared > plain_loglin.r_squared;
    let detail = format!(
        "{stages} stages, medians {} vs bounds {}; restarted log-linear r^2 {:.4} (>= 0.95); plain log-log r^2 {:.4} > log-linear r^2 {:.4}",
        fmt_floats(&medians),
        fmt_floats(&bounds),
        restart_fit.r_squared,
        plain_loglog.r_squared,
        plain_loglin.r_squared
    );
    Ok(criterion(
        8,
        "restarted linear convergence",
        passed,
        detail,
        json!({
            "plan_hash": plan.hash(),
            "cumulative_iterations": cumulative,
            "stage_medians": medians,
            "stage_bounds": bounds,
            "restart_log_linear": restart_fit,
            "plain_medians": plain,
            "plain_log_log": plain_loglog,
            "plain_log_linear": plain_loglin,
        }),
    ))
}

fn fmt_floats(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

// ---------------------------------------------------------------- criterion 9

fn sigma_star() -> Result<CriterionReport> {
    let problem = build(ProblemConfig::GaussianSpike {
        smoothness: 1.0,
        radius: 1.0,
        p: 1.0 / 64.0,
        s: 8.0,
        sign: 1,
    })?;
    let meta = problem.meta().clone();
    let sigma = meta.sigma_star_sq.sqrt();
    let horizon = 1024u64;
    let opts = RunOptions {
        noise_sq: Some(meta.sigma_star_sq),
        ..RunOptions::endpoints()
    };
    let big = median(&acc_finals(&problem, 64, horizon, &opts)?);
    let bound = 3.0 * convex_bound(meta.smoothness, meta.radius * meta.radius, 64, horizon as f64, sigma);
    let small = median(&acc_finals(&problem, 1, horizon, &opts)?);
    let reference = sigma * meta.radius / (horizon as f64).sqrt();
    let ratio = small / reference;
    let passed = big <= bound && (0.1..=10.0).contains(&ratio);
    let detail = format!(
        "b=64: median {big:.3e} <= 3x bound {bound:.3e}; b=1: median / (sigma* B / sqrt T) = {ratio:.3} in [0.1, 10]"
    );
    Ok(criterion(
        9,
        "noise-level stepsize",
        passed,
        detail,
        json!({
            "sigma_star_sq": meta.sigma_star_sq,
            "horizon": horizon,
            "median_b64": big,
            "bound_b64": bound,
            "median_b1": small,
            "reference_b1": reference,
            "ratio_b1": ratio,
        }),
    ))
}
