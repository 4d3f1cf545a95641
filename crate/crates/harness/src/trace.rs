//! CSV trace rows: `task, sampler, seed, data_pass, iteration, metric, value`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub task: String,
    pub sampler: String,
    pub seed: u64,
    /// Gradient evaluations so far divided by `n`.
    pub data_pass: f64,
    pub iteration: usize,
    pub metric: String,
    pub value: f64,
}

/// Writes a header row and the records.
pub fn write_trace<W: Write>(writer: W, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(["task", "sampler", "seed", "data_pass", "iteration", "metric", "value"])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_trace<R: Read>(reader: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
