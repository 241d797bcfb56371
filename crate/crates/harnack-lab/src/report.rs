//! Rate fitting and CSV emission for experiment runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Least-squares fit of ln(y) against x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub residual_norm: f64,
    pub samples: usize,
}

/// Fits y = exp(intercept + slope x); exact on noiseless exponential
/// data. Errors on nonpositive y.
pub fn fit_log_linear(pairs: &[(f64, f64)]) -> Result<FitResult> {
    if pairs.len() < 2 {
        return Err(Error::domain("log-linear fit needs at least 2 points"));
    }
    let mut xs = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    for &(x, y) in pairs {
        if !(y > 0.0) {
            return Err(Error::domain(format!("fit_log_linear needs y > 0, got {y}")));
        }
        xs.push(x);
        ys.push(y.ln());
    }
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit_log_linear needs distinct x values"));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residual_norm = ys
        .iter()
        .zip(&xs)
        .map(|(y, x)| {
            let d = y - (intercept + slope * x);
            d * d
        })
        .sum::<f64>()
        .sqrt();
    Ok(FitResult {
        slope,
        intercept,
        residual_norm,
        samples: pairs.len(),
    })
}

/// One CSV table: a mandatory header naming columns (with units where
/// applicable) and formatted rows. Reruns with identical inputs emit
/// byte-identical files.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// Deterministic cell formatting: shortest round-trip representation.
pub fn cell(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

impl CsvTable {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.name));
        fs::write(&path, self.to_csv_string())?;
        Ok(path)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Everything a run produces: measured tables, human-readable summary
/// lines and the count of inequality-violation findings.
#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub kind: String,
    pub tables: Vec<CsvTable>,
    pub summary: Vec<String>,
    pub violations: usize,
    pub csv_paths: Vec<PathBuf>,
}

impl ExperimentReport {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            ..Self::default()
        }
    }

    pub fn write_csvs(&mut self, dir: &Path) -> Result<()> {
        for t in &self.tables {
            self.csv_paths.push(t.write_to(dir)?);
        }
        Ok(())
    }
}
