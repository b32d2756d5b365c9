use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nelson_core::C64;
use serde::Serialize;

use crate::{HarnessError, Outcome, RunConfig};

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV table with a header row; numbers are written with 17 significant digits.
#[derive(Clone, Debug, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn fmt_c(z: C64) -> [String; 2] {
    [fmt(z.re), fmt(z.im)]
}

pub fn csv_path(out: &Path, name: &str) -> PathBuf {
    out.join(format!("{name}.csv"))
}

#[derive(Serialize)]
struct Entry<'a> {
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a nelson_core::observables::ExperimentResult>,
}

#[derive(Serialize)]
struct Summary<'a> {
    config_hash: String,
    passed: bool,
    experiments: BTreeMap<&'a str, Entry<'a>>,
}

/// Writes `summary.json` keyed by experiment name. Returns its path.
pub fn emit_report(outcomes: &[Outcome], config: &RunConfig, out: &Path) -> Result<PathBuf, HarnessError> {
    if outcomes.is_empty() {
        return Err(HarnessError::Config("nothing to report".into()));
    }
    let experiments = outcomes
        .iter()
        .map(|o| {
            let entry = match &o.result {
                Ok(r) => Entry { passed: r.passed(), error: None, result: Some(r) },
                Err(e) => Entry { passed: false, error: Some(e), result: None },
            };
            (o.name, entry)
        })
        .collect();
    let summary = Summary { config_hash: config.hash(), passed: outcomes.iter().all(Outcome::passed), experiments };
    fs::create_dir_all(out)?;
    let path = out.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}
