//! Result tables, CSV files and run manifests.
//!
//! CSV schema (after `#` comment lines stating the experiment and the
//! significance rule):
//!
//! | column     | meaning                                                   |
//! |------------|-----------------------------------------------------------|
//! | experiment | experiment kind                                           |
//! | shape      | shape label from the config                               |
//! | h          | cell size; `0` marks extrapolated values                  |
//! | quantity   | e.g. `lambda1`, `schatten_3`, `trace_mc`, `measure_actual` |
//! | value      | the value                                                 |
//! | error      | error estimate (empty when not applicable)                |
//! | seed       | RNG seed for Monte Carlo rows, empty otherwise            |

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::tolerances::{SIGNIFICANCE_FACTOR, SIGNIFICANCE_RULE};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: ExperimentKind,
    pub shape: String,
    pub h: f64,
    pub quantity: String,
    pub value: f64,
    pub error: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    /// The expected inequality holds with margin above `3 × error`.
    Confirmed,
    /// The difference is within `3 × error` of zero.
    Inconclusive,
    /// The opposite inequality holds with margin above `3 × error`.
    Violated,
}

/// A significance verdict on `gap`, where a positive gap is the expected
/// direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub shape: String,
    pub h: f64,
    pub quantity: String,
    pub gap: f64,
    pub error: f64,
    pub status: VerdictStatus,
}

impl Verdict {
    pub fn new(shape: &str, h: f64, quantity: &str, gap: f64, error: f64) -> Self {
        let margin = SIGNIFICANCE_FACTOR * error;
        let status = if gap > margin {
            VerdictStatus::Confirmed
        } else if gap < -margin {
            VerdictStatus::Violated
        } else {
            VerdictStatus::Inconclusive
        };
        Self {
            shape: shape.to_string(),
            h,
            quantity: quantity.to_string(),
            gap,
            error,
            status,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == VerdictStatus::Confirmed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub kind: ExperimentKind,
    /// Extra `#` header lines.
    pub notes: Vec<String>,
    pub rows: Vec<ResultRow>,
    pub verdicts: Vec<Verdict>,
}

impl ResultTable {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            notes: Vec::new(),
            rows: Vec::new(),
            verdicts: Vec::new(),
        }
    }

    pub fn push(&mut self, shape: &str, h: f64, quantity: &str, value: f64, error: Option<f64>) {
        self.rows.push(ResultRow {
            experiment: self.kind,
            shape: shape.to_string(),
            h,
            quantity: quantity.to_string(),
            value,
            error,
            seed: None,
        });
    }

    pub fn push_seeded(&mut self, shape: &str, h: f64, quantity: &str, value: f64, error: f64, seed: u64) {
        self.rows.push(ResultRow {
            experiment: self.kind,
            shape: shape.to_string(),
            h,
            quantity: quantity.to_string(),
            value,
            error: Some(error),
            seed: Some(seed),
        });
    }

    pub fn row(&self, shape: &str, h: f64, quantity: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.shape == shape && r.h == h && r.quantity == quantity)
    }

    pub fn value(&self, shape: &str, h: f64, quantity: &str) -> Option<f64> {
        self.row(shape, h, quantity).map(|r| r.value)
    }

    pub fn verdict(&self, shape: &str, h: f64, quantity: &str) -> Option<&Verdict> {
        self.verdicts
            .iter()
            .find(|v| v.shape == shape && v.h == h && v.quantity == quantity)
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(Verdict::passed)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# experiment: {}", self.kind)?;
        writeln!(out, "# significance rule: {SIGNIFICANCE_RULE}")?;
        for note in &self.notes {
            writeln!(out, "# {note}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["experiment", "shape", "h", "quantity", "value", "error", "seed"])?;
        for r in &self.rows {
            w.write_record([
                r.experiment.to_string(),
                r.shape.clone(),
                r.h.to_string(),
                r.quantity.clone(),
                r.value.to_string(),
                r.error.map(|e| e.to_string()).unwrap_or_default(),
                r.seed.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }
}

/// Machine-readable record of one run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub kind: ExperimentKind,
    pub library_version: &'static str,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub significance_rule: &'static str,
    pub config: &'a ExperimentConfig,
    pub outputs: Vec<PathBuf>,
    pub verdicts: Vec<Verdict>,
    pub all_passed: bool,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_thresholds() {
        assert_eq!(Verdict::new("a", 0.1, "q", 1.0, 0.3).status, VerdictStatus::Confirmed);
        assert_eq!(Verdict::new("a", 0.1, "q", 0.85, 0.3).status, VerdictStatus::Inconclusive);
        assert_eq!(Verdict::new("a", 0.1, "q", -1.0, 0.3).status, VerdictStatus::Violated);
    }

    #[test]
    fn csv_layout() {
        let mut t = ResultTable::new(ExperimentKind::Rfk);
        t.push("disk", 0.5, "lambda1", 0.25, Some(1e-3));
        t.push_seeded("disk", 0.5, "trace_mc", 2.0, 0.1, 42);
        let text = t.to_csv_string().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# experiment: rfk"));
        assert!(lines[1].contains("3x"));
        assert_eq!(lines[2], "experiment,shape,h,quantity,value,error,seed");
        assert_eq!(lines[3], "rfk,disk,0.5,lambda1,0.25,0.001,");
        assert_eq!(lines[4], "rfk,disk,0.5,trace_mc,2,0.1,42");
    }
}
