//! Diagnostic time series and their CSV form.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One sample of a run. Columns that do not apply to a model are NaN.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub l2_norm: f64,
    pub hsigma_norm: f64,
    #[serde(rename = "div_B")]
    pub div_b: f64,
    pub gauss_charge: f64,
    pub energy: f64,
    pub gol_residual: f64,
}

pub const CSV_COLUMNS: [&str; 7] = ["t", "l2_norm", "hsigma_norm", "div_B", "gauss_charge", "energy", "gol_residual"];

/// A finished run: its label, config hash, diagnostics and snapshot files.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Trajectory {
    pub label: String,
    pub config_hash: String,
    pub epsilon: Option<f64>,
    pub rows: Vec<DiagnosticRow>,
    pub snapshots: Vec<PathBuf>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    /// Times must be strictly increasing.
    pub fn check_monotone(&self) -> Result<()> {
        for w in self.rows.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::InvalidParameter(format!("non-monotone time stamps {} then {}", w[0].t, w[1].t)));
            }
        }
        Ok(())
    }

    pub fn max_of(&self, f: impl Fn(&DiagnosticRow) -> f64) -> f64 {
        self.rows.iter().map(f).filter(|x| !x.is_nan()).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

pub fn write_csv(path: &Path, rows: &[DiagnosticRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_COLUMNS {
        return Err(Error::InvalidParameter(format!("unexpected CSV columns in {}", path.display())));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}
