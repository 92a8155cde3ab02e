//! Output directory handling: tables, JSON reports and the manifest.
//!
//! Time series hold full expectation values ⟨σ⟩; the halved ⟨σ⟩/2 convention
//! of the plots is left to the plotting side.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use heom_core::control::BlochSample;

use crate::config::Format;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const ERROR_RECORD: &str = "error.json";

/// Column set of every time-series table.
pub const TIME_SERIES_COLUMNS: [&str; 7] =
    ["t", "sigma_x_lab", "sigma_y_lab", "sigma_z_lab", "sigma_x_rot", "sigma_y_rot", "sigma_z_rot"];

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub sigma_x_lab: f64,
    pub sigma_y_lab: f64,
    pub sigma_z_lab: f64,
    pub sigma_x_rot: f64,
    pub sigma_y_rot: f64,
    pub sigma_z_rot: f64,
}

impl From<&BlochSample> for TimeSeriesRow {
    fn from(s: &BlochSample) -> Self {
        Self {
            t: s.t,
            sigma_x_lab: s.lab[0],
            sigma_y_lab: s.lab[1],
            sigma_z_lab: s.lab[2],
            sigma_x_rot: s.rotating[0],
            sigma_y_rot: s.rotating[1],
            sigma_z_rot: s.rotating[2],
        }
    }
}

pub fn time_series(samples: &[BlochSample]) -> Vec<TimeSeriesRow> {
    samples.iter().map(TimeSeriesRow::from).collect()
}

/// Writes files into one output directory and remembers their names.
pub struct OutputDir {
    pub dir: PathBuf,
    pub format: Format,
    pub written: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn out_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output { path: path.to_path_buf(), message: e.to_string() }
}

impl OutputDir {
    /// Creates the directory and clears a manifest or error record left by an earlier run.
    pub fn create(dir: &Path, format: Format) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for stale in [MANIFEST, ERROR_RECORD] {
            let p = dir.join(stale);
            if p.exists() {
                fs::remove_file(&p).map_err(io_err(&p))?;
            }
        }
        Ok(Self { dir: dir.to_path_buf(), format, written: Vec::new() })
    }

    /// A table named `stem`, as CSV or as a JSON array of records.
    pub fn table<R: Serialize>(&mut self, stem: &str, rows: &[R]) -> Result<(), CliError> {
        match self.format {
            Format::Csv => {
                let name = format!("{stem}.csv");
                let path = self.dir.join(&name);
                let mut w = csv::Writer::from_path(&path).map_err(|e| out_err(&path, e))?;
                for r in rows {
                    w.serialize(r).map_err(|e| out_err(&path, e))?;
                }
                w.flush().map_err(io_err(&path))?;
                self.written.push(name);
                Ok(())
            }
            Format::Json => self.json(stem, &rows),
        }
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, stem: &str, value: &T) -> Result<(), CliError> {
        let name = format!("{stem}.json");
        let path = self.dir.join(&name);
        write_json(&path, value)?;
        self.written.push(name);
        Ok(())
    }

    /// Records a file written by other means, e.g. a snapshot placed in this directory.
    pub fn note(&mut self, name: impl Into<String>) {
        self.written.push(name.into());
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| out_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
