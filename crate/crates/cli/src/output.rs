//! Artifact writers: CSV with 12 significant digits, pretty JSON, and the
//! scenario file format `asset_1..asset_n,bond`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use shortfall_core::baseline::ScenarioSet;

use crate::CliError;

/// `%.12g`-style formatting.
pub fn sig12(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mant.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn prepare_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

pub fn write_scenarios(path: &Path, sc: &ScenarioSet) -> Result<(), CliError> {
    let mut header: Vec<String> = (1..=sc.n_assets).map(|i| format!("asset_{i}")).collect();
    header.push("bond".into());
    let mut t = Table::new(&header);
    for k in 0..sc.n_scenarios() {
        // full precision so a re-read reproduces the LP exactly
        t.push(sc.row(k).iter().map(|v| format!("{v:e}")).collect());
    }
    t.write(path)
}

pub fn read_scenarios(path: &Path, seed: u64) -> Result<ScenarioSet, CliError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let width = r
        .headers()
        .map_err(|e| CliError::Config(e.to_string()))?
        .len();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Config(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if row.len() != width {
            return Err(CliError::Config(format!("{}: ragged row", path.display())));
        }
        rows.push(row);
    }
    Ok(ScenarioSet::from_rows(&rows, seed)?)
}
