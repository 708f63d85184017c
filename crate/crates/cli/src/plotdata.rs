//! Tidy CSV extracts for plotting. Column meanings are documented in
//! `docs/plotdata.md`; every output has one observation per row and a
//! leading `source` column naming the input file.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use optaccel_core::analysis::read_records;

use crate::error::{HarnessError, Result};
use crate::runner::{SpeedupCsvRow, SummaryRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Median final suboptimality against `T`, from `summary.csv` files.
    RateCurve,
    /// `T_to_eps` against `b`, from `speedup.csv` files.
    SpeedupCurve,
    /// Suboptimality at every recorded iteration of restarted traces.
    StageDecay,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [PlotKind::RateCurve, PlotKind::SpeedupCurve, PlotKind::StageDecay];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::RateCurve => "rate_curve",
            PlotKind::SpeedupCurve => "speedup_curve",
            PlotKind::StageDecay => "stage_decay",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown plot kind `{s}`; expected rate_curve, speedup_curve or stage_decay"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub source: String,
    pub problem: usize,
    pub family: String,
    pub algorithm: String,
    pub b: usize,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub step: Option<f64>,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupPoint {
    pub source: String,
    pub eps: f64,
    pub problem: usize,
    pub algorithm: String,
    pub b: usize,
    pub t_to_eps: Option<u64>,
    /// `T_to_eps` at the first listed `b` divided by `T_to_eps` at this `b`.
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePoint {
    pub source: String,
    pub t: u64,
    pub stage: u32,
    pub subopt: f64,
    /// 1 on the last record of each stage.
    pub stage_end: u8,
}

fn open(path: &Path) -> Result<File> {
    if !path.exists() {
        return Err(HarnessError::Config(format!("missing input: {}", path.display())));
    }
    File::open(path).map_err(|e| HarnessError::io(path, e))
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    rdr.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display())))
}

pub fn rate_curve(inputs: &[PathBuf]) -> Result<Vec<RatePoint>> {
    let mut out = Vec::new();
    for path in inputs {
        for r in read_csv::<SummaryRow>(path)? {
            out.push(RatePoint {
                source: path.display().to_string(),
                problem: r.problem,
                family: r.family,
                algorithm: r.algorithm,
                b: r.b,
                horizon: r.horizon,
                step: r.step,
                median: r.median,
                q25: r.q25,
                q75: r.q75,
                seeds: r.seeds,
            });
        }
    }
    Ok(out)
}

/// Rows keep the order of the input files, so `b` stays in table order.
pub fn speedup_curve(inputs: &[PathBuf]) -> Result<Vec<SpeedupPoint>> {
    let mut out = Vec::new();
    for path in inputs {
        let rows = read_csv::<SpeedupCsvRow>(path)?;
        for r in &rows {
            let base = rows
                .iter()
                .find(|o| o.eps == r.eps && o.problem == r.problem && o.algorithm == r.algorithm)
                .and_then(|o| o.t_to_eps);
            out.push(SpeedupPoint {
                source: path.display().to_string(),
                eps: r.eps,
                problem: r.problem,
                algorithm: r.algorithm.clone(),
                b: r.b,
                t_to_eps: r.t_to_eps,
                speedup: match (base, r.t_to_eps) {
                    (Some(b0), Some(t)) => Some(b0 as f64 / t as f64),
                    _ => None,
                },
            });
        }
    }
    Ok(out)
}

pub fn stage_decay(inputs: &[PathBuf]) -> Result<Vec<StagePoint>> {
    let mut out = Vec::new();
    for path in inputs {
        let records = read_records(open(path)?).map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display())))?;
        for (i, r) in records.iter().enumerate() {
            let next = records.get(i + 1).map(|n| n.stage);
            out.push(StagePoint {
                source: path.display().to_string(),
                t: r.t,
                stage: r.stage,
                subopt: r.subopt,
                stage_end: u8::from(r.stage > 0 && next != Some(r.stage)),
            });
        }
    }
    Ok(out)
}

fn to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        wtr.write_record(header).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    }
    for r in rows {
        wtr.serialize(r).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    }
    wtr.into_inner().map_err(|e| HarnessError::Runtime(e.to_string()))
}

/// Builds the CSV for `kind` from `inputs`.
pub fn emit_plotdata(kind: PlotKind, inputs: &[PathBuf]) -> Result<Vec<u8>> {
    if inputs.is_empty() {
        return Err(HarnessError::Config("no input files given".into()));
    }
    match kind {
        PlotKind::RateCurve => to_csv(
            &rate_curve(inputs)?,
            &["source", "problem", "family", "algorithm", "b", "T", "step", "median", "q25", "q75", "seeds"],
        ),
        PlotKind::SpeedupCurve => to_csv(
            &speedup_curve(inputs)?,
            &["source", "eps", "problem", "algorithm", "b", "t_to_eps", "speedup"],
        ),
        PlotKind::StageDecay => to_csv(&stage_decay(inputs)?, &["source", "t", "stage", "subopt", "stage_end"]),
    }
}
