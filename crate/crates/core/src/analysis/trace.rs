//! Per-run traces and their on-disk format.
//!
//! A trace is a CSV body with columns
//! `t,norm_w,norm_wag,subopt,subopt_stderr,grad_noise_sq,stage` plus a JSON
//! sidecar holding the [`TraceHeader`]. Empty `grad_noise_sq` cells mean the
//! diagnostic was unavailable.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::problems::ProblemConfig;
use crate::{Error, Result};

/// Column order of the CSV body.
pub const TRACE_COLUMNS: [&str; 7] = [
    "t",
    "norm_w",
    "norm_wag",
    "subopt",
    "subopt_stderr",
    "grad_noise_sq",
    "stage",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    AccMbSgd,
    Sgd,
    Restarted,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::AccMbSgd => "acc_mb_sgd",
            Algorithm::Sgd => "sgd",
            Algorithm::Restarted => "restarted",
        }
    }
}

/// Identifies the run that produced a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub algorithm: Algorithm,
    /// Hash of the problem config, or `"custom"`.
    pub problem_hash: String,
    pub problem: Option<ProblemConfig>,
    pub batch: usize,
    /// Total iteration budget.
    pub horizon: u64,
    pub seed: u64,
    /// Base stepsize `γ` (accelerated runs), effective `η` (SGD), or absent for
    /// restarted runs whose stages each carry their own.
    pub gamma: Option<f64>,
    pub radius: f64,
    pub noise_sq: f64,
    /// SHA-256 of the schedule or stage plan that drove the run.
    pub schedule_hash: String,
}

/// One row of a trace. `t` counts completed iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    pub norm_w: f64,
    pub norm_wag: f64,
    /// `L(w^ag_t) − L*`, exact or Monte Carlo.
    pub subopt: f64,
    /// Standard error of `subopt`; zero when exact.
    pub subopt_stderr: f64,
    /// `‖g_t − ∇L(w^md_t)‖²` for the step that produced this record.
    pub grad_noise_sq: Option<f64>,
    /// Restart stage (0 for the initial point and for single-stage runs' start).
    pub stage: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceStatus {
    Completed,
    /// The run hit a non-finite value and stopped; records end before it.
    Aborted { iteration: u64, what: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
    pub status: TraceStatus,
}

impl RunTrace {
    pub fn new(header: TraceHeader) -> Self {
        Self {
            header,
            records: Vec::new(),
            status: TraceStatus::Completed,
        }
    }

    pub fn is_completed(&self) -> bool {
        self.status == TraceStatus::Completed
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Suboptimality of the last record.
    pub fn final_subopt(&self) -> Option<f64> {
        self.last().map(|r| r.subopt)
    }

    /// Last record of every stage, in stage order.
    pub fn stage_ends(&self) -> Vec<&TraceRecord> {
        stage_ends(&self.records)
    }

    /// Checks the record ordering invariant and the header/problem link.
    pub fn validate(&self, problem_hash: &str) -> Result<()> {
        if self.header.problem_hash != problem_hash {
            return Err(Error::invalid("header", "problem hash does not match"));
        }
        if self.records.windows(2).any(|w| w[0].t >= w[1].t) {
            return Err(Error::invalid("records", "t must be strictly increasing"));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        if self.records.is_empty() {
            wtr.write_record(TRACE_COLUMNS).map_err(io_err)?;
        }
        for r in &self.records {
            wtr.serialize(r).map_err(io_err)?;
        }
        wtr.flush().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn csv_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }

    pub fn header_json(&self) -> Result<Vec<u8>> {
        let sidecar = Sidecar {
            header: self.header.clone(),
            status: self.status.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&sidecar).map_err(|e| Error::Io(e.to_string()))?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    /// Reassembles a trace from its CSV body and JSON sidecar.
    pub fn read<R1: Read, R2: Read>(csv_body: R1, header_json: R2) -> Result<Self> {
        let sidecar: Sidecar = serde_json::from_reader(header_json).map_err(|e| Error::Io(e.to_string()))?;
        let records = read_records(csv_body)?;
        Ok(Self {
            header: sidecar.header,
            records,
            status: sidecar.status,
        })
    }
}

/// Parses the CSV body of a trace.
pub fn read_records<R: Read>(csv_body: R) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::Reader::from_reader(csv_body);
    let headers = rdr.headers().map_err(io_err)?.clone();
    if headers.iter().ne(TRACE_COLUMNS) {
        return Err(Error::Io(format!("unexpected trace columns: {headers:?}")));
    }
    rdr.deserialize()
        .collect::<std::result::Result<Vec<TraceRecord>, _>>()
        .map_err(io_err)
}

/// Last record of every restart stage (stage index > 0), in order.
pub fn stage_ends(records: &[TraceRecord]) -> Vec<&TraceRecord> {
    let mut out: Vec<&TraceRecord> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let next_stage = records.get(i + 1).map(|n| n.stage);
        if r.stage > 0 && next_stage != Some(r.stage) {
            out.push(r);
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    #[serde(flatten)]
    header: TraceHeader,
    status: TraceStatus,
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
