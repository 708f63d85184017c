//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Criteria 1–9 come from the verification suites; each must also finish
//! within its wall-clock budget. Criterion 10 reruns every suite serially and
//! two experiment specs with different worker counts and compares hashes.

use std::path::Path;
use std::process::ExitCode;
use std::time::Duration;

use optaccel::runner::{run_experiment, RunSettings};
use optaccel::spec::{load_spec, parse_spec};
use optaccel::suites::{run_suite, SuiteReport, SUITES};

/// Wall-clock budget per criterion, in seconds.
fn budget(id: u32) -> u64 {
    match id {
        1..=3 => 60,
        4 => 120,
        5 | 7 | 8 => 600,
        6 => 1200,
        9 => 300,
        _ => unreachable!(),
    }
}

const MIXED_SPEC: &str = r#"{
  "problems": [
    { "family": "growth", "dim": 6, "rank": 3, "lambda": 0.25, "smoothness": 1.0, "delta": 1.0, "seed": 0 },
    { "family": "gaussian_spike", "smoothness": 1.0, "radius": 1.0, "p": 0.25, "s": 0.5, "sign": -1 }
  ],
  "algorithms": ["acc_mb_sgd", "sgd", "restarted"],
  "batch_sizes": [2, 8],
  "horizons": [32, 64],
  "seeds": { "count": 3, "base": 11 },
  "eps": [0.01],
  "output_dir": "unused",
  "overrides": { "restart_eps": 0.05 },
  "sgd_steps": [0.25, 0.0625]
}"#;

fn line(id: u32, passed: bool, detail: &str) -> bool {
    println!("{} criterion {id}: {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

fn rerun_experiment(spec_text: Option<&str>, path: Option<&Path>) -> Result<(bool, String), String> {
    let spec = match (spec_text, path) {
        (Some(t), _) => parse_spec(t),
        (None, Some(p)) => load_spec(p),
        _ => unreachable!(),
    }
    .map_err(|e| e.to_string())?;
    let mut hashes = Vec::new();
    for workers in [1, 3] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let settings = RunSettings {
            output_dir: Some(dir.path().to_path_buf()),
            workers: Some(workers),
        };
        let m = run_experiment(&spec, &settings).map_err(|e| e.to_string())?;
        if !m.succeeded() {
            return Err(format!("{} cells failed", m.failures.len()));
        }
        hashes.push(m.content_hash);
    }
    Ok((hashes[0] == hashes[1], hashes[0].clone()))
}

fn main() -> ExitCode {
    let mut all = true;
    let mut first: Vec<SuiteReport> = Vec::new();
    for suite in SUITES {
        match run_suite(suite, None) {
            Ok(r) => first.push(r),
            Err(e) => {
                println!("FAIL suite {suite}: {e}");
                return ExitCode::FAILURE;
            }
        }
    }
    let mut criteria: Vec<_> = first
        .iter()
        .flat_map(|r| r.criteria.iter().map(move |c| (c, r.elapsed_secs)))
        .collect();
    criteria.sort_by_key(|(c, _)| c.id);
    for (c, elapsed) in criteria {
        let limit = budget(c.id);
        let in_time = Duration::from_secs_f64(elapsed) <= Duration::from_secs(limit);
        let detail = format!("{} — {} [{elapsed:.1}s of {limit}s]", c.name, c.detail);
        all &= line(c.id, c.passed && in_time, &detail);
    }

    // Criterion 10: identical inputs reproduce identical hashes, serially or in parallel.
    let mut repro = Vec::new();
    let mut ok = true;
    for r in &first {
        match run_suite(&r.suite, Some(1)) {
            Ok(again) => {
                let same = again.report_hash == r.report_hash;
                ok &= same;
                if !same {
                    repro.push(format!("suite {} hash changed", r.suite));
                }
            }
            Err(e) => {
                ok = false;
                repro.push(format!("suite {} failed on rerun: {e}", r.suite));
            }
        }
    }
    let example = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/interpolation_sweep.json");
    for (name, result) in [
        ("interpolation_sweep", rerun_experiment(None, Some(&example))),
        ("mixed", rerun_experiment(Some(MIXED_SPEC), None)),
    ] {
        match result {
            Ok((same, hash)) => {
                ok &= same;
                repro.push(format!("{name} {}", &hash[..12]));
            }
            Err(e) => {
                ok = false;
                repro.push(format!("{name} failed: {e}"));
            }
        }
    }
    let detail = format!(
        "reproducibility — {} suites rerun with 1 worker, 2 specs run with 1 and 3 workers: {}",
        first.len(),
        repro.join(", ")
    );
    all &= line(10, ok, &detail);

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
