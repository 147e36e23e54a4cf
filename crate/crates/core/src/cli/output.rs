//! CSV and manifest writing with fixed formatting.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::OdeStats;

/// 17 significant digits, so values round-trip exactly.
pub fn csv_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_bool(b: bool) -> String {
    b.to_string()
}

pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: format!("{}\n", header.join(",")), columns: header.len() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns);
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratorSummary {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
}

impl From<&OdeStats> for IntegratorSummary {
    fn from(s: &OdeStats) -> Self {
        Self { accepted_steps: s.accepted, rejected_steps: s.rejected, rhs_evaluations: s.rhs_evals }
    }
}

/// Record of one command run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub scenario_name: String,
    /// SHA-256 of the canonicalized scenario text.
    pub scenario_hash: String,
    pub outputs: Vec<String>,
    pub wall_clock_s: f64,
    pub integrator: IntegratorSummary,
    pub diagnostics: BTreeMap<String, toml::Value>,
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn manifest_text(m: &RunManifest) -> Result<String> {
    toml::to_string(m).map_err(|e| Error::Io(format!("manifest: {e}")))
}
