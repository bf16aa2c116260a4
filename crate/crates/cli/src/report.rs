//! Report assembly and deterministic emission.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::config::Scenario;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: Option<Scenario>,
    pub checks: Vec<Check>,
    pub quantities: BTreeMap<String, f64>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub tables: BTreeMap<String, String>,
    pub figures: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub quantities: BTreeMap<String, f64>,
    pub scenario: Option<Scenario>,
}

impl Report {
    pub fn new(scenario: &Scenario) -> Self {
        Self {
            scenario: Some(scenario.clone()),
            ..Default::default()
        }
    }

    pub fn table(&mut self, name: &str, csv: String) {
        self.tables.insert(name.to_string(), csv);
    }

    /// Adds a figure; callers also write the plotted data as a table.
    pub fn figure(&mut self, name: &str, svg: String) {
        self.figures.insert(name.to_string(), svg);
    }

    pub fn quantity(&mut self, name: &str, v: f64) {
        self.quantities.insert(name.to_string(), v);
    }

    /// Records `value <= threshold`.
    pub fn check_le(&mut self, name: &str, value: f64, threshold: f64, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            pass: value <= threshold,
            value,
            threshold,
            detail: detail.into(),
        });
    }

    /// Records `value >= threshold`.
    pub fn check_ge(&mut self, name: &str, value: f64, threshold: f64, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            pass: value >= threshold,
            value,
            threshold,
            detail: detail.into(),
        });
    }

    pub fn check_bool(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            value: if pass { 1.0 } else { 0.0 },
            threshold: 1.0,
            detail: detail.into(),
        });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary(&self) -> Summary {
        Summary {
            scenario: self.scenario.clone(),
            checks: self.checks.clone(),
            quantities: self.quantities.clone(),
            all_pass: self.all_pass(),
        }
    }
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Writes `*.csv`, `*.svg` and `summary.json` into `dir`, creating it if needed.
pub fn emit_report(r: &Report, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    for (name, body) in &r.tables {
        write(dir, &format!("{name}.csv"), body)?;
    }
    for (name, body) in &r.figures {
        write(dir, &format!("{name}.svg"), body)?;
    }
    let mut json = serde_json::to_string_pretty(&r.summary()).map_err(|e| CliError::Config(e.to_string()))?;
    json.push('\n');
    write(dir, "summary.json", &json)
}
