use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use optaccel::plotdata::{emit_plotdata, PlotKind};
use optaccel::runner::{run_experiment, Manifest, RunSettings, SpeedupCsvRow};
use optaccel::spec::{load_spec, parse_spec, save_spec, spec_to_string};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_optaccel"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn example_spec() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/interpolation_sweep.json")
}

const ONE_CELL: &str = r#"{
  "problems": [
    { "family": "interpolation_least_squares", "dim": 8, "n_atoms": 4, "smoothness": 1.0, "radius": 1.0, "seed": 2 }
  ],
  "algorithms": ["acc_mb_sgd"],
  "batch_sizes": [4],
  "horizons": [64],
  "seeds": { "count": 1 },
  "output_dir": "out"
}"#;

fn settings(dir: &Path) -> RunSettings {
    RunSettings {
        output_dir: Some(dir.to_path_buf()),
        workers: Some(2),
    }
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    for sub in [None, Some("run"), Some("verify"), Some("plotdata"), Some("schedule")] {
        let mut args: Vec<&str> = sub.into_iter().collect();
        args.push("--help");
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = run(&["verify", "no_such_suite"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_prints_json_report() {
    let out = run(&["verify", "lemma1", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["suite"], "lemma1");
    assert_eq!(report["passed"], true);
    assert!(report["criteria"][0]["data"]["max_violation"].as_f64().unwrap() <= 1e-9);
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS criterion 3"));
}

#[test]
fn schedule_prints_gamma_and_table() {
    let out = run(&["schedule", "--H", "1", "--b", "1", "--T", "3", "--B", "1", "--lstar", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    // γ = min{1/12, 1/(24·4)} = 1/96.
    assert!(text.starts_with(&format!("# gamma = {:e}\n", 1.0 / 96.0)));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "t,beta_t,gamma_t");
    assert_eq!(rows.len(), 4);
    assert!(rows[3].starts_with("2,1.3333333333333333,"));
}

#[test]
fn schedule_rejects_nonpositive_smoothness() {
    let out = run(&["schedule", "--H", "0", "--b", "1", "--T", "3", "--B", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn one_cell_spec_writes_three_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = parse_spec(ONE_CELL).unwrap();
    let m = run_experiment(&spec, &settings(dir.path())).unwrap();
    let paths: Vec<&str> = m.artifacts.iter().map(|a| a.path.as_str()).collect();
    assert_eq!(
        paths,
        [
            "cells/p0_acc_mb_sgd_b4_T64_s0.header.json",
            "cells/p0_acc_mb_sgd_b4_T64_s0.trace.csv",
            "summary.csv"
        ]
    );
    assert!(dir.path().join("manifest.json").exists());
    assert!(!dir.path().join("speedup.csv").exists());
    for a in &m.artifacts {
        let bytes = fs::read(dir.path().join(&a.path)).unwrap();
        assert_eq!(bytes.len() as u64, a.bytes);
        assert_eq!(optaccel_core::digest::sha256_hex(&bytes), a.sha256);
    }
    let on_disk: Manifest = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk, m);
}

#[test]
fn rerun_reproduces_manifest_hashes() {
    let spec = parse_spec(ONE_CELL).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let m1 = run_experiment(&spec, &settings(a.path())).unwrap();
    let m2 = run_experiment(&spec, &RunSettings {
        output_dir: Some(b.path().to_path_buf()),
        workers: Some(1),
    })
    .unwrap();
    assert_eq!(m1.content_hash, m2.content_hash);
    assert_eq!(m1.artifacts, m2.artifacts);
}

#[test]
fn empty_batch_grid_is_rejected() {
    let text = ONE_CELL.replace("\"batch_sizes\": [4]", "\"batch_sizes\": []");
    let err = parse_spec(&text).unwrap_err();
    assert!(err.to_string().contains("empty grid"), "{err}");
    assert!(err.to_string().contains("batch_sizes"));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn unknown_keys_and_syntax_errors_are_reported() {
    let text = ONE_CELL.replace("\"output_dir\"", "\"colour\": 1, \"output_dir\"");
    assert!(parse_spec(&text).unwrap_err().to_string().contains("colour"));
    let err = parse_spec("{\n  \"problems\": [,]\n}").unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn restarted_requires_a_target() {
    let text = ONE_CELL.replace("[\"acc_mb_sgd\"]", "[\"restarted\"]");
    let err = parse_spec(&text).unwrap_err().to_string();
    assert!(err.contains("restart_eps"), "{err}");
}

#[test]
fn spec_roundtrips_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let spec = parse_spec(ONE_CELL).unwrap();
    let p1 = dir.path().join("a.json");
    let p2 = dir.path().join("b.json");
    save_spec(&spec, &p1).unwrap();
    let loaded = load_spec(&p1).unwrap();
    assert_eq!(loaded, spec);
    save_spec(&loaded, &p2).unwrap();
    assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    assert_eq!(spec_to_string(&loaded), fs::read_to_string(&p1).unwrap());
}

#[test]
fn shipped_example_matches_golden_hash() {
    let spec = load_spec(&example_spec()).unwrap();
    let golden = fs::read_to_string(example_spec().with_extension("json.sha256")).unwrap();
    assert_eq!(spec.hash(), golden.trim());
}

#[test]
fn example_sweep_yields_monotone_speedup_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", example_spec().to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .env("OPTACCEL_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("speedup.csv")).unwrap();
    let rows: Vec<SpeedupCsvRow> = rdr.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2 * 2 * 3);
    for chunk in rows.chunks(3) {
        let ts: Vec<f64> = chunk.iter().map(|r| r.t_to_eps.map_or(f64::INFINITY, |t| t as f64)).collect();
        assert!(ts.windows(2).all(|w| w[1] <= w[0]), "{ts:?}");
        assert!(ts[2].is_finite());
    }
}

#[test]
fn failed_cells_are_recorded_without_stopping_others() {
    // A radius override of zero makes every cell fail at setup.
    let text = ONE_CELL
        .replace("\"horizons\": [64]", "\"horizons\": [16, 32]")
        .replace("\"output_dir\": \"out\"", "\"output_dir\": \"out\", \"overrides\": { \"radius\": 0.0 }");
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    fs::write(&spec_path, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["run", spec_path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let m: Manifest = serde_json::from_slice(&fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.failures.len(), 2);
    assert!(m.failures[0].error.contains("radius"));
    // The summary is still written, with nothing completed.
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.lines().nth(1).unwrap().contains(",1,0,inf,"));
}

#[test]
fn plotdata_rate_curve_has_one_row_per_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let text = ONE_CELL.replace("\"horizons\": [64]", "\"horizons\": [16, 32, 64]");
    run_experiment(&parse_spec(&text).unwrap(), &settings(dir.path())).unwrap();
    let bytes = emit_plotdata(PlotKind::RateCurve, &[dir.path().join("summary.csv")]).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "source,problem,family,algorithm,b,T,step,median,q25,q75,seeds");
    assert_eq!(lines.len(), 4);
    let ts: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(5).unwrap()).collect();
    assert_eq!(ts, ["16", "32", "64"]);
}

#[test]
fn plotdata_speedup_curve_preserves_b_order() {
    let dir = tempfile::tempdir().unwrap();
    let text = ONE_CELL
        .replace("\"batch_sizes\": [4]", "\"batch_sizes\": [16, 1, 4]")
        .replace("\"horizons\": [64]", "\"horizons\": [64, 256]")
        .replace("\"output_dir\"", "\"eps\": [0.05], \"output_dir\"");
    run_experiment(&parse_spec(&text).unwrap(), &settings(dir.path())).unwrap();
    let bytes = emit_plotdata(PlotKind::SpeedupCurve, &[dir.path().join("speedup.csv")]).unwrap();
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let bs: Vec<usize> = rdr
        .records()
        .map(|r| r.unwrap()[4].parse().unwrap())
        .collect();
    let mut src = csv::Reader::from_path(dir.path().join("speedup.csv")).unwrap();
    let expected: Vec<usize> = src.deserialize::<SpeedupCsvRow>().map(|r| r.unwrap().b).collect();
    assert_eq!(bs, expected);
    assert_eq!(bs, [1, 4, 16]);
}

#[test]
fn plotdata_stage_decay_matches_trace_stage_markers() {
    let text = r#"{
      "problems": [ { "family": "growth", "dim": 6, "rank": 3, "lambda": 0.25, "smoothness": 1.0, "delta": 1.0, "seed": 0 } ],
      "algorithms": ["restarted"],
      "batch_sizes": [8],
      "horizons": [],
      "seeds": { "count": 1 },
      "output_dir": "out",
      "overrides": { "restart_eps": 0.01 }
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&parse_spec(text).unwrap(), &settings(dir.path())).unwrap();
    let trace = m.artifacts.iter().find(|a| a.path.ends_with(".trace.csv")).unwrap();
    let trace_path = dir.path().join(&trace.path);
    let records = optaccel_core::analysis::read_records(fs::File::open(&trace_path).unwrap()).unwrap();
    let ends = optaccel_core::analysis::stage_ends(&records);
    assert_eq!(ends.len(), 5);

    let out_path = dir.path().join("decay.csv");
    let out = run(&[
        "plotdata",
        "stage_decay",
        trace_path.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(&out_path).unwrap();
    let marked: Vec<(u64, u32, f64)> = rdr
        .records()
        .map(|r| r.unwrap())
        .filter(|r| &r[4] == "1")
        .map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap()))
        .collect();
    let expected: Vec<(u64, u32, f64)> = ends.iter().map(|r| (r.t, r.stage, r.subopt)).collect();
    assert_eq!(marked, expected);
}

#[test]
fn plotdata_names_missing_inputs() {
    let out = run(&["plotdata", "rate_curve", "/nonexistent/summary.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/summary.csv"));
    let out = run(&["plotdata", "bogus", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
}
