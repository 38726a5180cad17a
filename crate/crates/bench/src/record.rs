//! One result row per (instance, method, Γ) and its CSV form.
//!
//! The file opens with a `#` metadata line naming the schema version, then
//! a header row. Unsolved runs are recorded with the time limit as their
//! time, so means over `seconds` count them at the limit.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use robust_mrcpsp::milp::SolveStatus;
use serde::{Deserialize, Serialize};

use crate::config::Method;

pub const SCHEMA: &str = "# rmrcpsp results v1; seconds of runs not solved to optimality are recorded at the time limit";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub set: String,
    pub method: Method,
    pub gamma: u32,
    pub status: SolveStatus,
    pub objective: Option<i64>,
    pub bound: Option<i64>,
    /// Percent; 0 when optimal, empty without an incumbent.
    pub gap: Option<f64>,
    pub seconds: f64,
    /// Benders only: completed iterations.
    pub iterations: Option<usize>,
    /// Benders only: mean seconds per completed iteration.
    pub iteration_seconds: Option<f64>,
    pub backend: String,
}

impl RunRecord {
    pub fn key(&self) -> (String, Method, u32) {
        (self.instance.clone(), self.method, self.gamma)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn has_incumbent(&self) -> bool {
        self.objective.is_some()
    }
}

/// `100·(objective − bound)/objective`, 0 when optimal.
pub fn gap_percent(status: &SolveStatus, objective: Option<i64>, bound: Option<i64>) -> Option<f64> {
    let obj = objective?;
    if *status == SolveStatus::Optimal {
        return Some(0.0);
    }
    let bound = bound?;
    if obj == 0 {
        return Some(0.0);
    }
    Some(100.0 * (obj - bound).max(0) as f64 / obj as f64)
}

/// Reads every complete row; an unterminated last line is ignored.
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, csv::Error> {
    let text = std::fs::read_to_string(path)?;
    let complete = &text[..text.rfind('\n').map_or(0, |i| i + 1)];
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(complete.as_bytes());
    reader.deserialize().collect()
}

/// Appends rows to a results file, writing the metadata and header lines
/// when the file is new or empty.
pub struct RecordWriter {
    inner: csv::Writer<File>,
}

impl RecordWriter {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        if path.exists() {
            drop_partial_line(path)?;
        }
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            writeln!(file, "{SCHEMA}")?;
        }
        let inner = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
        Ok(Self { inner })
    }

    pub fn append(&mut self, record: &RunRecord) -> Result<(), csv::Error> {
        self.inner.serialize(record)?;
        self.inner.flush()?;
        Ok(())
    }
}

/// A crash mid-write can leave a partial last line; drop it so the next
/// row starts clean.
fn drop_partial_line(path: &Path) -> std::io::Result<()> {
    let text = std::fs::read_to_string(path)?;
    if !text.is_empty() && !text.ends_with('\n') {
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        std::fs::write(path, &text[..keep])?;
    }
    Ok(())
}
