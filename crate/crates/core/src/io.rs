//! Signal ingestion from numeric CSV and atomic result emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{BenchmarkOutcome, BenchmarkSummary};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One sample per row, cut into sections.
    #[default]
    SingleColumn,
    /// The whole table is one matrix (an image).
    MultiColumnMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ingested {
    /// Unit-L2-norm sections of a 1-D signal.
    Sections(Vec<DVector<f64>>),
    /// A matrix scaled so its largest absolute entry is 1.
    Matrix(DMatrix<f64>),
}

/// Read a comma-separated numeric table. A first row that does not parse is taken
/// as a header.
pub fn read_numeric_csv(path: &Path) -> Result<DMatrix<f64>> {
    let input_error = |message: String| Error::Input {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|cell| cell.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|cell| cell.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                    return Err(input_error(format!(
                        "row {}: non-finite value {bad}",
                        line + 1
                    )));
                }
                if let Some(first) = rows.first() {
                    if first.len() != values.len() {
                        return Err(input_error(format!(
                            "row {} has {} columns, expected {}",
                            line + 1,
                            values.len(),
                            first.len()
                        )));
                    }
                }
                rows.push(values);
            }
            Err(_) if line == 0 => {}
            Err(_) => {
                return Err(input_error(format!("row {}: non-numeric cell", line + 1)));
            }
        }
    }
    if rows.is_empty() {
        return Err(input_error("no numeric data".into()));
    }
    let cols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

/// Load a signal for recovery.
///
/// In single-column layout the samples are cut into sections of `section_length`
/// (the whole column when absent); a trailing remainder is dropped with a warning.
/// Each section is scaled to unit L2 norm. In matrix layout the table is scaled by
/// its largest absolute entry.
pub fn ingest_signal(
    path: &Path,
    layout: Layout,
    section_length: Option<usize>,
) -> Result<Ingested> {
    let table = read_numeric_csv(path)?;
    let input_error = |message: String| Error::Input {
        path: path.to_path_buf(),
        message,
    };
    match layout {
        Layout::SingleColumn => {
            if table.ncols() != 1 {
                return Err(input_error(format!(
                    "single-column layout but the file has {} columns",
                    table.ncols()
                )));
            }
            let samples = table.as_slice();
            let n = section_length.unwrap_or(samples.len());
            if n == 0 || n > samples.len() {
                return Err(input_error(format!(
                    "section length {n} does not fit {} samples",
                    samples.len()
                )));
            }
            let remainder = samples.len() % n;
            if remainder != 0 {
                log::warn!(
                    "{}: dropping {remainder} trailing samples that do not fill a section of {n}",
                    path.display()
                );
            }
            let sections = samples
                .chunks_exact(n)
                .map(|chunk| {
                    let v = DVector::from_column_slice(chunk);
                    let norm = v.norm();
                    if norm > 0.0 {
                        v / norm
                    } else {
                        v
                    }
                })
                .collect();
            Ok(Ingested::Sections(sections))
        }
        Layout::MultiColumnMatrix => {
            let peak = table.amax();
            Ok(Ingested::Matrix(if peak > 0.0 {
                table / peak
            } else {
                table
            }))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidParameter(format!(
                "unknown output format `{other}`"
            ))),
        }
    }
}

pub const SUMMARY_CSV: &str = "summary.csv";
pub const TRIALS_CSV: &str = "trials.csv";
pub const CONFIG_JSON: &str = "config.json";
pub const RESULTS_JSON: &str = "results.json";

/// Summary table with 17 significant digits per number.
pub fn summary_csv(summary: &BenchmarkSummary) -> String {
    let mut out = String::from("method,m,mean_l1,mean_l2,std_l1,std_l2,C\n");
    for r in &summary.rows {
        out.push_str(&format!(
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            csv_field(&r.method),
            r.m,
            r.mean_l1,
            r.mean_l2,
            r.std_l1,
            r.std_l2,
            r.trials
        ));
    }
    out
}

fn trials_csv(outcome: &BenchmarkOutcome) -> String {
    let timed = outcome.trials.iter().any(|t| t.wall_time.is_some());
    let mut out = String::from("method,m,trial_index,l1_error,l2_error,converged,iterations");
    out.push_str(if timed { ",wall_time\n" } else { "\n" });
    for t in &outcome.trials {
        out.push_str(&format!(
            "{},{},{},{:.16e},{:.16e},{},{}",
            csv_field(&t.method),
            t.m,
            t.trial_index,
            t.l1_error,
            t.l2_error,
            t.converged,
            t.iterations
        ));
        if timed {
            out.push_str(&format!(",{:.16e}", t.wall_time.unwrap_or(f64::NAN)));
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize)]
struct ResultsDocument<'a, C: Serialize> {
    config: &'a C,
    summary: &'a BenchmarkSummary,
    trials: &'a [crate::eval::TrialReport],
}

/// Write the benchmark artifacts into `dir`.
///
/// CSV output is `summary.csv` and `trials.csv` plus the resolved config as
/// `config.json`; JSON output is a single `results.json` holding all three.
pub fn emit_results<C: Serialize>(
    dir: &Path,
    outcome: &BenchmarkOutcome,
    config: &C,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    match format {
        OutputFormat::Csv => {
            let files = [
                (SUMMARY_CSV, summary_csv(&outcome.summary)),
                (TRIALS_CSV, trials_csv(outcome)),
                (CONFIG_JSON, to_json(config)?),
            ];
            files
                .into_iter()
                .map(|(name, body)| {
                    let path = dir.join(name);
                    write_atomic(&path, body.as_bytes())?;
                    Ok(path)
                })
                .collect()
        }
        OutputFormat::Json => {
            let doc = ResultsDocument {
                config,
                summary: &outcome.summary,
                trials: &outcome.trials,
            };
            let path = dir.join(RESULTS_JSON);
            write_atomic(&path, to_json(&doc)?.as_bytes())?;
            Ok(vec![path])
        }
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Write through a temporary sibling and rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Input {
            path: path.to_path_buf(),
            message: "not a file path".into(),
        })?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::SummaryRow;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn sections_are_unit_norm() {
        let dir = tempfile::tempdir().unwrap();
        let body: String = (0..1024)
            .map(|i| format!("{}\n", (i as f64 * 0.1).sin()))
            .collect();
        let p = write(dir.path(), "s.csv", &body);
        let Ingested::Sections(s) = ingest_signal(&p, Layout::SingleColumn, Some(512)).unwrap()
        else {
            panic!("expected sections")
        };
        assert_eq!(s.len(), 2);
        for v in &s {
            assert_eq!(v.len(), 512);
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn remainder_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let body: String = (0..1000).map(|i| format!("{}\n", i % 7)).collect();
        let p = write(dir.path(), "s.csv", &body);
        let Ingested::Sections(s) = ingest_signal(&p, Layout::SingleColumn, Some(512)).unwrap()
        else {
            panic!("expected sections")
        };
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn header_is_skipped_and_matrix_is_max_normalized() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "a,b\n1,-4\n2,3\n");
        let Ingested::Matrix(m) = ingest_signal(&p, Layout::MultiColumnMatrix, None).unwrap()
        else {
            panic!("expected matrix")
        };
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[0.25, -1.0, 0.5, 0.75]));
    }

    #[test]
    fn bad_input_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "bad.csv", "1\nx\n");
        assert!(ingest_signal(&p, Layout::SingleColumn, None).is_err());
        let p = write(dir.path(), "empty.csv", "");
        assert!(ingest_signal(&p, Layout::SingleColumn, None).is_err());
        let p = write(dir.path(), "ragged.csv", "1,2\n3\n");
        assert!(read_numeric_csv(&p).is_err());
    }

    #[test]
    fn csv_numbers_round_trip() {
        let summary = BenchmarkSummary {
            rows: vec![SummaryRow {
                method: "BP".into(),
                m: 20,
                mean_l1: 0.1 + 0.2,
                mean_l2: std::f64::consts::PI,
                std_l1: 1e-300,
                std_l2: 0.0,
                trials: 3,
                converged: 3,
            }],
        };
        let text = summary_csv(&summary);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "method,m,mean_l1,mean_l2,std_l1,std_l2,C");
        let cells: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cells[2].parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(cells[3].parse::<f64>().unwrap(), std::f64::consts::PI);
        assert_eq!(cells[4].parse::<f64>().unwrap(), 1e-300);
    }
}
