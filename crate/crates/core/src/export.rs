//! CSV outputs of a batch and the report that rebuilds the summary from
//! `results.csv` alone.
//!
//! All reals are written with six decimals so reruns diff cleanly.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::experiment::{
    ResultRow, RunResult, Summary, TraceRecord, HISTOGRAM_BINS, HISTOGRAM_BIN_WIDTH,
};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const RESULTS_FILE: &str = "results.csv";
pub const DETECTION_STATS_FILE: &str = "detection_stats.csv";
pub const DETECTION_HISTOGRAM_FILE: &str = "detection_histogram.csv";
pub const TRACES_DIR: &str = "traces";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}:{line}: {message}", path.display())]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExportError + '_ {
    move |source| ExportError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

fn opt6(x: Option<f64>) -> String {
    x.map(fmt6).unwrap_or_default()
}

fn write_table(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// File name of a run's trace: config index, label, run index.
pub fn trace_file_name(config_index: usize, label: &str, run_index: usize) -> String {
    let safe: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("{config_index:02}_{safe}_{run_index:04}.csv")
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<(), ExportError> {
    write_table(
        path,
        &[
            "time",
            "ego_speed",
            "pedestrian_distance",
            "pedestrian_detected",
            "braking",
        ],
        trace.iter().map(|t| {
            vec![
                fmt6(t.time),
                fmt6(t.ego_speed),
                fmt6(t.pedestrian_distance),
                u8::from(t.pedestrian_detected).to_string(),
                u8::from(t.braking).to_string(),
            ]
        }),
    )
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), ExportError> {
    write_table(
        path,
        &[
            "config_index",
            "run_index",
            "label",
            "seed",
            "outcome",
            "min_distance",
            "detection_distance",
            "steps",
        ],
        rows.iter().map(|r| {
            vec![
                r.config_index.to_string(),
                r.run_index.to_string(),
                r.label.clone(),
                r.seed.to_string(),
                r.outcome.to_string(),
                fmt6(r.min_distance),
                opt6(r.detection_distance),
                r.steps.to_string(),
            ]
        }),
    )
}

/// Writes the summary, detection statistics and histogram tables.
pub fn write_summary(dir: &Path, summary: &Summary) -> Result<(), ExportError> {
    write_table(
        &dir.join(SUMMARY_FILE),
        &["label", "runs", "successes", "rate"],
        summary.configs.iter().map(|c| {
            vec![
                c.label.clone(),
                c.runs.to_string(),
                c.successes.to_string(),
                fmt6(c.success_rate()),
            ]
        }),
    )?;
    write_table(
        &dir.join(DETECTION_STATS_FILE),
        &["label", "detections", "mean", "std"],
        summary.configs.iter().map(|c| {
            vec![
                c.label.clone(),
                c.detections.to_string(),
                opt6(c.detection_mean),
                opt6(c.detection_std),
            ]
        }),
    )?;
    write_table(
        &dir.join(DETECTION_HISTOGRAM_FILE),
        &["label", "bin_start", "bin_end", "count"],
        summary.configs.iter().flat_map(|c| {
            (0..HISTOGRAM_BINS).map(move |i| {
                vec![
                    c.label.clone(),
                    fmt6(i as f64 * HISTOGRAM_BIN_WIDTH),
                    fmt6((i + 1) as f64 * HISTOGRAM_BIN_WIDTH),
                    c.histogram[i].to_string(),
                ]
            })
        }),
    )
}

/// Writes every output of a batch into `dir`, creating it if needed.
/// Runs whose trace was dropped get no trace file.
pub fn export_batch(
    dir: &Path,
    results: &[RunResult],
    summary: &Summary,
) -> Result<(), ExportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let rows: Vec<ResultRow> = results.iter().map(ResultRow::from).collect();
    write_results(&dir.join(RESULTS_FILE), &rows)?;
    write_summary(dir, summary)?;
    let traces = dir.join(TRACES_DIR);
    if results.iter().any(|r| !r.trace.is_empty()) {
        fs::create_dir_all(&traces).map_err(io_err(&traces))?;
    }
    for r in results.iter().filter(|r| !r.trace.is_empty()) {
        write_trace(
            &traces.join(trace_file_name(r.config_index, &r.label, r.run_index)),
            &r.trace,
        )?;
    }
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, ExportError> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let expected = [
        "config_index",
        "run_index",
        "label",
        "seed",
        "outcome",
        "min_distance",
        "detection_distance",
        "steps",
    ];
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(expected) {
        return Err(ExportError::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unexpected header, want {}", expected.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |field: &str| ExportError::Malformed {
            path: path.to_path_buf(),
            line,
            message: format!("invalid {field}"),
        };
        macro_rules! field {
            ($i:expr, $name:expr) => {
                rec[$i].parse().map_err(|_| bad($name))?
            };
        }
        rows.push(ResultRow {
            config_index: field!(0, "config_index"),
            run_index: field!(1, "run_index"),
            label: rec[2].to_string(),
            seed: field!(3, "seed"),
            outcome: field!(4, "outcome"),
            min_distance: field!(5, "min_distance"),
            detection_distance: match &rec[6] {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("detection_distance"))?),
            },
            steps: field!(7, "steps"),
        });
    }
    Ok(rows)
}

/// Rebuilds the summary tables of `results_dir` into `out_dir` without
/// re-simulating.
pub fn report(results_dir: &Path, out_dir: &Path) -> Result<Summary, ExportError> {
    let path = results_dir.join(RESULTS_FILE);
    if !path.is_file() {
        return Err(ExportError::Io {
            path,
            source: io::Error::new(io::ErrorKind::NotFound, "no batch results found"),
        });
    }
    let rows = read_results(&path)?;
    let summary = Summary::from_rows(&rows);
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_summary(out_dir, &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::Outcome;

    #[test]
    fn trace_names_are_filesystem_safe() {
        assert_eq!(
            trace_file_name(3, "coPEM:0.5s", 7),
            "03_coPEM_0_5s_0007.csv"
        );
    }

    #[test]
    fn results_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            ResultRow {
                config_index: 0,
                run_index: 0,
                label: "GT".into(),
                seed: u64::MAX,
                outcome: Outcome::Pass,
                min_distance: 1.25,
                detection_distance: Some(19.5),
                steps: 141,
            },
            ResultRow {
                config_index: 1,
                run_index: 0,
                label: "coPEM:1.5s".into(),
                seed: 3,
                outcome: Outcome::FailCollision,
                min_distance: 0.0,
                detection_distance: None,
                steps: 80,
            },
        ];
        let p = dir.path().join(RESULTS_FILE);
        write_results(&p, &rows).unwrap();
        assert_eq!(read_results(&p).unwrap(), rows);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains("0,0,GT,18446744073709551615,pass,1.250000,19.500000,141"));
        assert!(text.contains("fail_collision,0.000000,,80"));
    }

    #[test]
    fn summary_row_shape() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<ResultRow> = (0..4)
            .map(|r| ResultRow {
                config_index: 0,
                run_index: r,
                label: "GT".into(),
                seed: r as u64,
                outcome: Outcome::Pass,
                min_distance: 2.0,
                detection_distance: Some(19.5),
                steps: 10,
            })
            .collect();
        write_summary(dir.path(), &Summary::from_rows(&rows)).unwrap();
        let s = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
        assert_eq!(s, "label,runs,successes,rate\nGT,4,4,1.000000\n");
        let h = fs::read_to_string(dir.path().join(DETECTION_HISTOGRAM_FILE)).unwrap();
        assert_eq!(h.lines().count(), 1 + HISTOGRAM_BINS);
        assert!(h.contains("GT,19.000000,20.000000,4"));
    }

    #[test]
    fn report_without_results_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = report(dir.path(), dir.path()).unwrap_err();
        assert!(err.to_string().contains("results.csv"), "{err}");
    }
}
