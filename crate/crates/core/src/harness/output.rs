use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::intervals::Method;

/// One coverage/length cell: a (distribution, ρ, n, estimator, method) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResultRow {
    pub distribution: String,
    pub params: String,
    pub rho_true: f64,
    pub n: usize,
    pub estimator: EstimatorKind,
    pub method: Method,
    pub coverage: f64,
    pub mean_length: f64,
    /// Datasets on which the method could not form an interval. For Fisher,
    /// the number of datasets where `|r|` had to be clamped away from 1.
    pub degenerate_count: usize,
    pub exceeds_range_count: usize,
    pub n_sims: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    /// Mean length after clipping endpoints into `[−1, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_clipped_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasResultRow {
    pub distribution: String,
    pub rho_true: f64,
    pub estimator: EstimatorKind,
    pub mean_estimate: f64,
    pub variance: f64,
    pub bias: f64,
    pub pairs_per_rep: usize,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseResultRow {
    pub distribution: String,
    pub rho_true: f64,
    pub n: usize,
    pub estimator: EstimatorKind,
    pub mse: f64,
    pub reps: usize,
    pub seed: u64,
    /// Variance (divisor `reps − 1`) of the estimates behind `mse`.
    #[serde(skip)]
    pub variance: f64,
    #[serde(skip)]
    pub bias: f64,
}

pub const COVERAGE_HEADER: [&str; 13] = [
    "distribution",
    "params",
    "rho_true",
    "n",
    "estimator",
    "method",
    "coverage",
    "mean_length",
    "degenerate_count",
    "exceeds_range_count",
    "n_sims",
    "B",
    "seed",
];

pub fn sort_coverage_rows(rows: &mut [StudyResultRow]) {
    rows.sort_by(|a, b| {
        (&a.distribution, &a.params)
            .cmp(&(&b.distribution, &b.params))
            .then(a.rho_true.total_cmp(&b.rho_true))
            .then(a.n.cmp(&b.n))
            .then(a.estimator.cmp(&b.estimator))
            .then(a.method.cmp(&b.method))
    });
}

pub(crate) fn sort_bias_rows(rows: &mut [BiasResultRow]) {
    rows.sort_by(|a, b| {
        a.distribution
            .cmp(&b.distribution)
            .then(a.rho_true.total_cmp(&b.rho_true))
            .then(a.estimator.cmp(&b.estimator))
    });
}

pub(crate) fn sort_mse_rows(rows: &mut [MseResultRow]) {
    rows.sort_by(|a, b| {
        a.distribution
            .cmp(&b.distribution)
            .then(a.rho_true.total_cmp(&b.rho_true))
            .then(a.n.cmp(&b.n))
            .then(a.estimator.cmp(&b.estimator))
    });
}

/// Writes coverage rows with the fixed header. With `clipped`, a trailing
/// `mean_clipped_length` column is appended.
pub fn write_coverage_csv<W: Write>(out: W, rows: &[StudyResultRow], clipped: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = COVERAGE_HEADER.to_vec();
    if clipped {
        header.push("mean_clipped_length");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut record = vec![
            r.distribution.clone(),
            r.params.clone(),
            r.rho_true.to_string(),
            r.n.to_string(),
            r.estimator.label().to_string(),
            r.method.label().to_string(),
            r.coverage.to_string(),
            r.mean_length.to_string(),
            r.degenerate_count.to_string(),
            r.exceeds_range_count.to_string(),
            r.n_sims.to_string(),
            r.b.to_string(),
            r.seed.to_string(),
        ];
        if clipped {
            record.push(r.mean_clipped_length.map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bias_csv<W: Write>(out: W, rows: &[BiasResultRow]) -> Result<()> {
    write_serialized(out, rows)
}

pub fn write_mse_csv<W: Write>(out: W, rows: &[MseResultRow]) -> Result<()> {
    write_serialized(out, rows)
}

fn write_serialized<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Receives the rows of each finished combination, in completion order.
pub trait RowSink: Send {
    fn accept(&mut self, key: &str, rows: &[StudyResultRow]) -> Result<()>;
}

impl RowSink for Vec<StudyResultRow> {
    fn accept(&mut self, _key: &str, rows: &[StudyResultRow]) -> Result<()> {
        self.extend_from_slice(rows);
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl RowSink for NullSink {
    fn accept(&mut self, _key: &str, _rows: &[StudyResultRow]) -> Result<()> {
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointRecord {
    key: String,
    rows: Vec<StudyResultRow>,
}

/// Appends one JSON object per finished combination and flushes it at once,
/// so an interrupted run loses at most the combinations in flight.
pub struct CheckpointSink {
    out: BufWriter<File>,
}

impl CheckpointSink {
    pub fn append(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { out: BufWriter::new(file) })
    }
}

impl RowSink for CheckpointSink {
    fn accept(&mut self, key: &str, rows: &[StudyResultRow]) -> Result<()> {
        let record = CheckpointRecord { key: key.to_string(), rows: rows.to_vec() };
        serde_json::to_writer(&mut self.out, &record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

/// Combinations already completed by an earlier run, keyed by combination key.
#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    completed: HashMap<String, Vec<StudyResultRow>>,
}

impl Checkpoint {
    /// Reads a checkpoint file. A truncated final line (from an interrupted
    /// write) is ignored; malformed lines elsewhere are errors.
    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        let mut completed = HashMap::new();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CheckpointRecord>(line) {
                Ok(rec) => {
                    completed.insert(rec.key, rec.rows);
                }
                Err(_) if i + 1 == lines.len() => {}
                Err(e) => return Err(Error::Parse { line: i + 1, message: e.to_string() }),
            }
        }
        Ok(Self { completed })
    }

    pub fn len(&self) -> usize {
        self.completed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.completed.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[StudyResultRow]> {
        self.completed.get(key).map(Vec::as_slice)
    }
}
