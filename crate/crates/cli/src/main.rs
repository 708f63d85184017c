use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use optaccel::plotdata::{emit_plotdata, PlotKind};
use optaccel::runner::{run_experiment, RunSettings};
use optaccel::spec::load_spec;
use optaccel::suites::{run_suite, SUITES};
use optaccel::{schedule_table, HarnessError};

/// Benchmarks for accelerated minibatch SGD.
///
/// Exit codes: 0 success, 1 a verified criterion failed, 2 usage or
/// configuration error, 3 runtime failure (including failed cells).
#[derive(Parser)]
#[command(name = "optaccel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment spec and write traces, summaries and a manifest.
    Run {
        /// Path to the JSON spec.
        spec: PathBuf,
        /// Output directory; overrides the spec's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; overrides OPTACCEL_WORKERS and the spec.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run an acceptance suite and print its JSON report.
    Verify {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: String,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Convert summaries, speedup tables or traces into tidy plot-ready CSV.
    Plotdata {
        /// rate_curve, speedup_curve or stage_decay.
        kind: PlotKind,
        /// summary.csv (rate_curve), speedup.csv (speedup_curve) or trace CSVs (stage_decay).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the stepsize γ and the β_t, γ_t schedule for given constants.
    Schedule {
        /// Smoothness H.
        #[arg(long = "H")]
        smoothness: f64,
        /// Minibatch size.
        #[arg(long)]
        b: usize,
        /// Horizon.
        #[arg(long = "T")]
        horizon: u64,
        /// Projection radius.
        #[arg(long = "B")]
        radius: f64,
        /// Bound on the minimum loss; the noise level is 2·H·L*.
        #[arg(long, default_value_t = 0.0)]
        lstar: f64,
        /// Noise level σ*² used instead of 2·H·L*.
        #[arg(long)]
        noise_sq: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn write_or_print(out: Option<&PathBuf>, bytes: &[u8]) -> Result<(), HarnessError> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| HarnessError::io(path, e)),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| HarnessError::Runtime(e.to_string()))
        }
    }
}

fn dispatch(command: Command) -> Result<u8, HarnessError> {
    match command {
        Command::Run { spec, out, workers } => {
            let spec = load_spec(&spec)?;
            let manifest = run_experiment(&spec, &RunSettings { output_dir: out, workers })?;
            println!(
                "{} artifacts, {} failed cells, content hash {}",
                manifest.artifacts.len(),
                manifest.failures.len(),
                manifest.content_hash
            );
            for f in &manifest.failures {
                eprintln!("cell {} failed: {}", f.cell, f.error);
            }
            Ok(if manifest.succeeded() { 0 } else { 3 })
        }
        Command::Verify { suite, out, workers } => {
            let report = run_suite(&suite, workers)?;
            let mut json = serde_json::to_vec_pretty(&report).expect("report serializes");
            json.push(b'\n');
            if let Some(path) = &out {
                fs::write(path, &json).map_err(|e| HarnessError::io(path, e))?;
            }
            write_or_print(None, &json)?;
            eprint!("{}", report.human_summary());
            Ok(if report.passed { 0 } else { 1 })
        }
        Command::Plotdata { kind, inputs, out } => {
            let bytes = emit_plotdata(kind, &inputs)?;
            write_or_print(out.as_ref(), &bytes)?;
            Ok(0)
        }
        Command::Schedule {
            smoothness,
            b,
            horizon,
            radius,
            lstar,
            noise_sq,
        } => {
            let noise = noise_sq.unwrap_or(2.0 * smoothness * lstar);
            let table = schedule_table(smoothness, b, horizon, radius, noise)?;
            write_or_print(None, table.as_bytes())?;
            Ok(0)
        }
    }
}
