//! Sweep orchestration: expands a spec into independent cells, runs them on a
//! worker pool, and writes traces, summaries and a content-hashed manifest.
//!
//! A cell is one `(problem, algorithm, b, T, stepsize, seed)` run. Cells never
//! share mutable state and every output file is a pure function of the spec,
//! so the artifacts do not depend on the worker count or scheduling order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use optaccel_core::analysis::{median, quantile, time_to_eps, Algorithm, FinalPoint, RunTrace, TraceStatus};
use optaccel_core::digest::sha256_hex;
use optaccel_core::optimizers::{
    make_stage_plan, run_acc_mb_sgd, run_restarted, run_sgd, RunOptions, SgdSchedule, StagePlan,
};
use optaccel_core::problems::Problem;
use optaccel_core::rng::derive_seed;

use crate::error::{HarnessError, Result};
use crate::spec::ExperimentSpec;

/// Environment variable that sets the worker count.
pub const WORKERS_ENV: &str = "OPTACCEL_WORKERS";

/// Command-line adjustments applied on top of a spec.
#[derive(Debug, Clone, Default)]
pub struct RunSettings {
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory, with `/` separators.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec_hash: String,
    /// Seconds since the Unix epoch; excluded from `content_hash`.
    pub created_unix: u64,
    pub artifacts: Vec<Artifact>,
    pub failures: Vec<CellFailure>,
    /// SHA-256 over `spec_hash`, `artifacts` and `failures`.
    pub content_hash: String,
}

impl Manifest {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// One row of `summary.csv`: final-suboptimality statistics over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem: usize,
    pub family: String,
    pub problem_hash: String,
    pub algorithm: String,
    pub b: usize,
    #[serde(rename = "T")]
    pub horizon: u64,
    /// Requested SGD stepsize; empty for the accelerated methods.
    pub step: Option<f64>,
    pub seeds: usize,
    pub completed: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
}

/// One row of `speedup.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupCsvRow {
    pub eps: f64,
    pub problem: usize,
    pub family: String,
    pub problem_hash: String,
    pub algorithm: String,
    pub b: usize,
    /// Empty when no grid horizon reached `eps`.
    pub t_to_eps: Option<u64>,
    pub seeds: usize,
}

#[derive(Debug, Clone)]
struct Cell {
    problem: usize,
    algorithm: Algorithm,
    b: usize,
    horizon: u64,
    step: Option<(usize, f64)>,
    seed_index: u32,
    seed: u64,
    plan: Option<Arc<StagePlan>>,
}

impl Cell {
    fn name(&self) -> String {
        let step = self.step.map(|(k, _)| format!("_eta{k}")).unwrap_or_default();
        format!(
            "p{}_{}_b{}_T{}{}_s{}",
            self.problem,
            self.algorithm.name(),
            self.b,
            self.horizon,
            step,
            self.seed_index
        )
    }

    fn group(&self) -> GroupKey {
        (self.problem, self.algorithm, self.b, self.horizon, self.step.map(|s| s.0))
    }
}

struct CellOutcome {
    final_subopt: f64,
    artifacts: Vec<Artifact>,
    failure: Option<String>,
}

fn expand_cells(spec: &ExperimentSpec, problems: &[Problem]) -> Result<Vec<Cell>> {
    let theta = spec.overrides.theta.unwrap_or(std::f64::consts::E);
    let mut cells = Vec::new();
    for (pi, problem) in problems.iter().enumerate() {
        for &algorithm in &spec.algorithms {
            for &b in &spec.batch_sizes {
                let plan = if algorithm == Algorithm::Restarted {
                    let meta = problem.meta();
                    let eps = spec.overrides.restart_eps.expect("validated");
                    let lstar = spec.overrides.lstar.unwrap_or(meta.lstar);
                    let plan = make_stage_plan(meta.delta, eps, theta, meta.lambda, meta.smoothness, b, lstar)
                        .map_err(|e| HarnessError::Config(format!("problems[{pi}] cannot be restarted: {e}")))?;
                    Some(Arc::new(plan))
                } else {
                    None
                };
                let horizons: Vec<u64> = match &plan {
                    Some(p) => vec![p.total_iterations()],
                    None => spec.horizons.clone(),
                };
                let steps: Vec<Option<(usize, f64)>> = if algorithm == Algorithm::Sgd {
                    spec.sgd_steps.iter().copied().enumerate().map(Some).collect()
                } else {
                    vec![None]
                };
                for &horizon in &horizons {
                    for &step in &steps {
                        for seed_index in 0..spec.seeds.count {
                            cells.push(Cell {
                                problem: pi,
                                algorithm,
                                b,
                                horizon,
                                step,
                                seed_index,
                                seed: derive_seed(spec.seeds.base, u64::from(seed_index)),
                                plan: plan.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(cells)
}

fn run_options(spec: &ExperimentSpec) -> RunOptions {
    RunOptions {
        radius: spec.overrides.radius,
        lstar: spec.overrides.lstar,
        noise_sq: spec.overrides.noise_sq,
        recording: spec.recording,
        ..RunOptions::default()
    }
}

fn write_artifact(root: &Path, rel: &str, bytes: &[u8]) -> Result<Artifact> {
    let path = root.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))?;
    Ok(Artifact {
        path: rel.to_string(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    })
}

fn execute(cell: &Cell, problem: &Problem, spec: &ExperimentSpec, root: &Path) -> Result<CellOutcome> {
    let opts = run_options(spec);
    let result = match cell.algorithm {
        Algorithm::AccMbSgd => run_acc_mb_sgd(problem, cell.b, cell.horizon, cell.seed, &opts),
        Algorithm::Sgd => {
            let schedule = SgdSchedule {
                step: cell.step.expect("sgd cells carry a step").1,
                averaging: spec.sgd_averaging,
            };
            run_sgd(problem, cell.b, cell.horizon, &schedule, cell.seed, &opts)
        }
        Algorithm::Restarted => run_restarted(problem, cell.plan.as_ref().expect("restart plan"), cell.seed, &opts),
    };
    let trace: RunTrace = match result {
        Ok(out) => out.trace,
        Err(e) => {
            return Ok(CellOutcome {
                final_subopt: f64::INFINITY,
                artifacts: Vec::new(),
                failure: Some(e.to_string()),
            })
        }
    };
    let name = cell.name();
    let artifacts = vec![
        write_artifact(root, &format!("cells/{name}.trace.csv"), &trace.csv_bytes()?)?,
        write_artifact(root, &format!("cells/{name}.header.json"), &trace.header_json()?)?,
    ];
    let failure = match &trace.status {
        TraceStatus::Completed => None,
        TraceStatus::Aborted { iteration, what } => Some(format!("non-finite {what} at iteration {iteration}")),
    };
    let final_subopt = if failure.is_some() {
        f64::INFINITY
    } else {
        trace.final_subopt().unwrap_or(f64::INFINITY)
    };
    Ok(CellOutcome {
        final_subopt,
        artifacts,
        failure,
    })
}

/// Worker count: explicit setting, then `OPTACCEL_WORKERS`, then the spec,
/// then the machine's parallelism.
pub fn resolve_workers(settings: &RunSettings, spec: &ExperimentSpec) -> Result<usize> {
    if let Some(w) = settings.workers {
        return Ok(w.max(1));
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| HarnessError::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(HarnessError::Config(format!("{WORKERS_ENV} must be at least 1")));
        }
        return Ok(n);
    }
    Ok(spec
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

fn csv_bytes<T: Serialize>(rows: &[T], columns: &[&str]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        wtr.write_record(columns).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    }
    for r in rows {
        wtr.serialize(r).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    }
    wtr.into_inner().map_err(|e| HarnessError::Runtime(e.to_string()))
}

pub const SUMMARY_COLUMNS: [&str; 14] = [
    "problem",
    "family",
    "problem_hash",
    "algorithm",
    "b",
    "T",
    "step",
    "seeds",
    "completed",
    "median",
    "q25",
    "q75",
    "min",
    "max",
];

pub const SPEEDUP_COLUMNS: [&str; 8] = [
    "eps",
    "problem",
    "family",
    "problem_hash",
    "algorithm",
    "b",
    "t_to_eps",
    "seeds",
];

type GroupKey = (usize, Algorithm, usize, u64, Option<usize>);

fn family(problem: &Problem) -> String {
    problem
        .config()
        .map_or_else(|| "custom".to_string(), |c| c.family().to_string())
}

fn summarize(cells: &[Cell], outcomes: &[CellOutcome], problems: &[Problem]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<GroupKey, Vec<(f64, bool)>> = BTreeMap::new();
    for (cell, out) in cells.iter().zip(outcomes) {
        groups
            .entry(cell.group())
            .or_default()
            .push((out.final_subopt, out.failure.is_none()));
    }
    let steps: BTreeMap<GroupKey, f64> = cells
        .iter()
        .filter_map(|c| c.step.map(|(_, s)| (c.group(), s)))
        .collect();
    groups
        .into_iter()
        .map(|(key, vals)| {
            let v: Vec<f64> = vals.iter().map(|x| x.0).collect();
            let problem = &problems[key.0];
            SummaryRow {
                problem: key.0,
                family: family(problem),
                problem_hash: problem.config_hash(),
                algorithm: key.1.name().to_string(),
                b: key.2,
                horizon: key.3,
                step: steps.get(&key).copied(),
                seeds: v.len(),
                completed: vals.iter().filter(|x| x.1).count(),
                median: median(&v),
                q25: quantile(&v, 0.25),
                q75: quantile(&v, 0.75),
                min: quantile(&v, 0.0),
                max: quantile(&v, 1.0),
            }
        })
        .collect()
}

fn speedup_rows(
    spec: &ExperimentSpec,
    cells: &[Cell],
    outcomes: &[CellOutcome],
    problems: &[Problem],
) -> Vec<SpeedupCsvRow> {
    let mut rows = Vec::new();
    for &eps in &spec.eps {
        for (pi, problem) in problems.iter().enumerate() {
            for &algorithm in &spec.algorithms {
                // (b, T) -> step index -> points
                let mut by_cell: BTreeMap<(usize, u64), BTreeMap<Option<usize>, Vec<FinalPoint>>> = BTreeMap::new();
                for (cell, out) in cells.iter().zip(outcomes) {
                    if cell.problem != pi || cell.algorithm != algorithm {
                        continue;
                    }
                    by_cell
                        .entry((cell.b, cell.horizon))
                        .or_default()
                        .entry(cell.step.map(|s| s.0))
                        .or_default()
                        .push(FinalPoint {
                            b: cell.b,
                            horizon: cell.horizon,
                            seed: cell.seed,
                            subopt: out.final_subopt,
                        });
                }
                // For SGD keep the stepsize with the best median in each (b, T) cell.
                let points: Vec<FinalPoint> = by_cell
                    .into_values()
                    .flat_map(|per_step| {
                        per_step
                            .into_values()
                            .min_by(|a, b| {
                                let ma = median(&a.iter().map(|p| p.subopt).collect::<Vec<_>>());
                                let mb = median(&b.iter().map(|p| p.subopt).collect::<Vec<_>>());
                                ma.total_cmp(&mb)
                            })
                            .unwrap_or_default()
                    })
                    .collect();
                let table = time_to_eps(&points, eps, &problem.config_hash());
                for row in table.rows {
                    rows.push(SpeedupCsvRow {
                        eps,
                        problem: pi,
                        family: family(problem),
                        problem_hash: table.problem_hash.clone(),
                        algorithm: algorithm.name().to_string(),
                        b: row.b,
                        t_to_eps: row.t_to_eps,
                        seeds: table.seeds,
                    });
                }
            }
        }
    }
    rows
}

/// Runs every cell of `spec` and writes all artifacts plus `manifest.json`.
pub fn run_experiment(spec: &ExperimentSpec, settings: &RunSettings) -> Result<Manifest> {
    spec.validate()?;
    let root = settings.output_dir.clone().unwrap_or_else(|| spec.output_dir.clone());
    fs::create_dir_all(&root).map_err(|e| HarnessError::io(&root, e))?;
    let problems: Vec<Problem> = spec
        .problems
        .iter()
        .map(|p| p.build().map_err(HarnessError::from))
        .collect::<Result<_>>()?;
    let cells = expand_cells(spec, &problems)?;

    let workers = resolve_workers(settings, spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| execute(cell, &problems[cell.problem], spec, &root))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut artifacts: Vec<Artifact> = outcomes.iter().flat_map(|o| o.artifacts.iter().cloned()).collect();
    let failures: Vec<CellFailure> = cells
        .iter()
        .zip(&outcomes)
        .filter_map(|(c, o)| {
            o.failure.as_ref().map(|e| CellFailure {
                cell: c.name(),
                error: e.clone(),
            })
        })
        .collect();

    let summary = summarize(&cells, &outcomes, &problems);
    artifacts.push(write_artifact(&root, "summary.csv", &csv_bytes(&summary, &SUMMARY_COLUMNS)?)?);
    if !spec.eps.is_empty() {
        let rows = speedup_rows(spec, &cells, &outcomes, &problems);
        artifacts.push(write_artifact(&root, "speedup.csv", &csv_bytes(&rows, &SPEEDUP_COLUMNS)?)?);
    }
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));

    let spec_hash = spec.hash();
    let content_hash = sha256_hex(&serde_json::to_vec(&(&spec_hash, &artifacts, &failures)).expect("serializes"));
    let manifest = Manifest {
        spec_hash,
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        artifacts,
        failures,
        content_hash,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    let path = root.join("manifest.json");
    fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))?;
    Ok(manifest)
}
