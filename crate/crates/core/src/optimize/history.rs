//! Per-update records and their CSV form.
//!
//! The history holds only values that are a pure function of config and
//! seed, so two runs produce byte-identical files. Wall-clock timings go to
//! a separate table.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    /// Vertex updates completed; 0 is the input shape.
    pub iteration: usize,
    pub stage: String,
    pub e_refl: f64,
    pub std_error: f64,
    pub mean_vertex_disp: f64,
    /// Radians.
    pub mean_adj_normal_diff: f64,
    pub cell_area_diff: f64,
    pub face_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub iteration: usize,
    pub face_count: usize,
    pub grad_single_ms: f64,
    pub grad_total_ms: f64,
    pub denoise_ms: f64,
    pub vertex_ms: f64,
    /// Evaluation pass for the history; not part of `total_ms`.
    pub eval_ms: f64,
    /// Gradient steps, filtering and vertex solve.
    pub total_ms: f64,
    /// Since the optimizer was created.
    pub wall_ms: f64,
}

pub fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("csv output", e))?;
    Ok(())
}

pub fn save_rows<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_rows(std::io::BufWriter::new(file), rows)
}

pub fn read_history(path: impl AsRef<Path>) -> Result<Vec<HistoryRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
