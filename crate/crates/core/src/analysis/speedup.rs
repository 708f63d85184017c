use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::median;
use super::trace::RunTrace;
use crate::{Error, Result};

/// Final suboptimality of one `(b, T, seed)` run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalPoint {
    pub b: usize,
    pub horizon: u64,
    pub seed: u64,
    pub subopt: f64,
}

impl FinalPoint {
    /// Aborted or empty traces count as never reaching any target.
    pub fn from_trace(trace: &RunTrace) -> Self {
        let subopt = match (trace.is_completed(), trace.final_subopt()) {
            (true, Some(v)) => v,
            _ => f64::INFINITY,
        };
        Self {
            b: trace.header.batch,
            horizon: trace.header.horizon,
            seed: trace.header.seed,
            subopt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub b: usize,
    /// Smallest grid `T` whose median final suboptimality is at most `eps`.
    pub t_to_eps: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupTable {
    pub eps: f64,
    pub problem_hash: String,
    /// Largest number of seeds in any `(b, T)` cell.
    pub seeds: usize,
    pub rows: Vec<SpeedupRow>,
}

impl SpeedupTable {
    pub fn row(&self, b: usize) -> Option<&SpeedupRow> {
        self.rows.iter().find(|r| r.b == b)
    }

    pub fn t(&self, b: usize) -> Option<u64> {
        self.row(b).and_then(|r| r.t_to_eps)
    }
}

/// Per minibatch size, the smallest horizon whose median over seeds reaches `eps`.
pub fn time_to_eps(points: &[FinalPoint], eps: f64, problem_hash: &str) -> SpeedupTable {
    let mut cells: BTreeMap<(usize, u64), Vec<f64>> = BTreeMap::new();
    for p in points {
        cells.entry((p.b, p.horizon)).or_default().push(p.subopt);
    }
    let seeds = cells.values().map(Vec::len).max().unwrap_or(0);
    let mut rows: BTreeMap<usize, Option<u64>> = BTreeMap::new();
    // BTreeMap iterates T in increasing order within each b.
    for (&(b, horizon), values) in &cells {
        let entry = rows.entry(b).or_insert(None);
        if entry.is_none() && median(values) <= eps {
            *entry = Some(horizon);
        }
    }
    SpeedupTable {
        eps,
        problem_hash: problem_hash.to_string(),
        seeds,
        rows: rows
            .into_iter()
            .map(|(b, t_to_eps)| SpeedupRow { b, t_to_eps })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalBatch {
    Saturated(usize),
    Unsaturated,
}

/// Plateau ratio: larger batches within this factor of `T(b)` count as no improvement.
pub const PLATEAU_RATIO: f64 = 0.8;

/// Smallest `b` such that every larger `b'` in the table has
/// `T(b') ≥ 0.8·T(b)`. The largest `b` cannot qualify on its own: a plateau
/// needs at least one larger batch to witness it.
pub fn critical_batch(table: &SpeedupTable) -> Result<CriticalBatch> {
    let distinct: BTreeSet<usize> = table.rows.iter().map(|r| r.b).collect();
    if distinct.len() < 4 {
        return Err(Error::invalid(
            "table",
            format!("need at least 4 distinct b values, got {}", distinct.len()),
        ));
    }
    let mut rows = table.rows.clone();
    rows.sort_by_key(|r| r.b);
    let as_f = |t: Option<u64>| t.map_or(f64::INFINITY, |v| v as f64);
    for (i, row) in rows.iter().enumerate() {
        let Some(t) = row.t_to_eps else { continue };
        let larger = &rows[i + 1..];
        if larger.is_empty() {
            break;
        }
        if larger.iter().all(|r| as_f(r.t_to_eps) >= PLATEAU_RATIO * t as f64) {
            return Ok(CriticalBatch::Saturated(row.b));
        }
    }
    Ok(CriticalBatch::Unsaturated)
}
