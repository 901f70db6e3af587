//! Evaluation reports: a JSON summary plus a CSV with one row per trial tick.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sedro_core::eval::HabituationReport;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: row for unknown trial {phase} #{trial}", path.display())]
    UnknownTrial { path: PathBuf, phase: Phase, trial: usize },
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Habituation,
    Test,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Habituation => "habituation",
            Phase::Test => "test",
        })
    }
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
struct GazeRow {
    phase: Phase,
    trial: usize,
    stimulus_id: String,
    tick: u64,
    gaze: u8,
}

/// The CSV written next to a JSON report.
pub fn csv_path(json: &Path) -> PathBuf {
    json.with_extension("csv")
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.to_path_buf(), source }
}

/// Writes `report` as JSON to `path` and its tick-level gaze to
/// [`csv_path`]`(path)`.
pub fn write_report(report: &HabituationReport, path: &Path) -> Result<(), ReportError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let mut out = BufWriter::new(File::create(path).map_err(io(path))?);
    serde_json::to_writer_pretty(&mut out, report).map_err(|source| ReportError::Json { path: path.into(), source })?;
    out.write_all(b"\n").and_then(|_| out.flush()).map_err(io(path))?;

    let cpath = csv_path(path);
    let csv_err = |source| ReportError::Csv { path: cpath.clone(), source };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&cpath).map_err(csv_err)?;
    w.write_record(["phase", "trial", "stimulus_id", "tick", "gaze"]).map_err(csv_err)?;
    let phases = [(Phase::Habituation, &report.habituation_trials), (Phase::Test, &report.test_trials)];
    for (phase, trials) in phases {
        for t in trials {
            for (i, g) in t.gaze.iter().enumerate() {
                let row = GazeRow {
                    phase,
                    trial: t.index,
                    stimulus_id: t.stimulus_id.clone(),
                    tick: t.start_tick + i as u64,
                    gaze: *g as u8,
                };
                w.serialize(row).map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(io(&cpath))
}

/// Reads a report written by [`write_report`], gaze included.
pub fn read_report(path: &Path) -> Result<HabituationReport, ReportError> {
    let file = File::open(path).map_err(io(path))?;
    let mut report: HabituationReport =
        serde_json::from_reader(BufReader::new(file)).map_err(|source| ReportError::Json { path: path.into(), source })?;
    let cpath = csv_path(path);
    let csv_err = |source| ReportError::Csv { path: cpath.clone(), source };
    let mut r = csv::Reader::from_path(&cpath).map_err(csv_err)?;
    for row in r.deserialize() {
        let row: GazeRow = row.map_err(csv_err)?;
        let trials = match row.phase {
            Phase::Habituation => &mut report.habituation_trials,
            Phase::Test => &mut report.test_trials,
        };
        let trial = trials.iter_mut().find(|t| t.index == row.trial).ok_or(ReportError::UnknownTrial {
            path: cpath.clone(),
            phase: row.phase,
            trial: row.trial,
        })?;
        trial.gaze.push(row.gaze != 0);
    }
    Ok(report)
}
