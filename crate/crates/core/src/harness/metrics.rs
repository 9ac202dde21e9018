//! Per-round metrics (JSON lines), the one-row run summary (CSV), and the
//! long-format table used for plotting.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u64,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub mean_power: f64,
    /// Fraction of coordinates where the applied vote equals the exact
    /// majority of the device signs. `None` for round 0.
    pub vote_agreement: Option<f64>,
    /// Fraction of coordinates where the applied vote differs from the sign
    /// of the full training gradient. `None` for round 0.
    pub empirical_perr: Option<f64>,
    pub wall_time_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub final_accuracy: f64,
    pub mean_power: f64,
    pub total_bits: u64,
    pub rounds: u64,
    pub seed: u64,
}

/// `runs/a.jsonl` -> `runs/a.summary.csv`.
pub fn summary_path(metrics: &Path) -> PathBuf {
    let stem = metrics
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "metrics".into());
    metrics.with_file_name(format!("{stem}.summary.csv"))
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map_err(|e| Error::io(path, e))
}

/// Line-buffered JSONL sink. Opening it creates missing parent directories.
pub struct MetricsWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(MetricsWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(create(path)?),
        })
    }

    pub fn write(&mut self, m: &RoundMetrics) -> Result<()> {
        serde_json::to_writer(&mut self.out, m)?;
        self.out.write_all(b"\n").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_summary(path: &Path, row: &SummaryRow) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.serialize(row)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<SummaryRow> {
    let mut r = csv::Reader::from_path(path)?;
    match r.deserialize().next() {
        Some(row) => Ok(row?),
        None => Err(Error::Format {
            path: path.into(),
            reason: "summary has no data row".into(),
        }),
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<RoundMetrics>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.into(),
            reason: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}

/// Label for a metrics file: the scheme in its summary if one sits next to
/// it, else the file stem.
pub fn scheme_label(metrics: &Path) -> String {
    read_summary(&summary_path(metrics))
        .map(|s| s.scheme)
        .unwrap_or_else(|_| {
            metrics
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
}

#[derive(Debug, Serialize)]
struct PlotRow<'a> {
    round: u64,
    scheme: &'a str,
    accuracy: f64,
}

/// Writes `round,scheme,accuracy` rows for every `(metrics file, label)`.
pub fn write_plot_data<W: Write>(inputs: &[(PathBuf, String)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (path, scheme) in inputs {
        for m in read_metrics(path)? {
            w.serialize(PlotRow {
                round: m.round,
                scheme,
                accuracy: m.test_accuracy,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io("<plot output>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(round: u64) -> RoundMetrics {
        RoundMetrics {
            round,
            test_accuracy: 0.5,
            test_loss: 1.25,
            mean_power: 1.0,
            vote_agreement: (round > 0).then_some(0.9),
            empirical_perr: None,
            wall_time_ms: None,
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep/dir/m.jsonl");
        let mut w = MetricsWriter::create(&path).unwrap();
        for r in 0..3 {
            w.write(&sample(r)).unwrap();
        }
        w.finish().unwrap();
        let back = read_metrics(&path).unwrap();
        assert_eq!(back, (0..3).map(sample).collect::<Vec<_>>());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().contains("\"vote_agreement\":null"));
    }

    #[test]
    fn summary_round_trip_and_label() {
        let dir = tempfile::tempdir().unwrap();
        let metrics = dir.path().join("run.jsonl");
        assert_eq!(summary_path(&metrics), dir.path().join("run.summary.csv"));
        assert_eq!(scheme_label(&metrics), "run");
        let row = SummaryRow {
            scheme: "fsk_mv".into(),
            final_accuracy: 0.8,
            mean_power: 1.0,
            total_bits: 620_000,
            rounds: 100,
            seed: 3,
        };
        write_summary(&summary_path(&metrics), &row).unwrap();
        let text = std::fs::read_to_string(summary_path(&metrics)).unwrap();
        assert!(text.starts_with("scheme,final_accuracy,mean_power,total_bits,rounds,seed\n"));
        assert_eq!(read_summary(&summary_path(&metrics)).unwrap(), row);
        assert_eq!(scheme_label(&metrics), "fsk_mv");
    }

    #[test]
    fn malformed_line_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{not json}\n").unwrap();
        assert!(matches!(read_metrics(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn plot_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let mut w = MetricsWriter::create(&path).unwrap();
        w.write(&sample(0)).unwrap();
        w.write(&sample(10)).unwrap();
        w.finish().unwrap();
        let mut out = Vec::new();
        write_plot_data(&[(path, "x".into())], &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "round,scheme,accuracy\n0,x,0.5\n10,x,0.5\n"
        );
    }
}
