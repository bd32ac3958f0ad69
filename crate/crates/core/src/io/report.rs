use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::curves::CurveSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// Structured description of a failed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    /// `domain`, `solver`, `precondition`, `validation`, `io` or `parse`.
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residual_history: Vec<f64>,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        let kind = match e {
            Error::Domain(_) => "domain",
            Error::Solver { .. } => "solver",
            Error::Precondition(_) => "precondition",
            Error::Validation { .. } => "validation",
            Error::Io { .. } => "io",
            Error::Parse(_) => "parse",
        };
        let parameter = match e {
            Error::Validation { parameter, .. } => Some(parameter.clone()),
            _ => None,
        };
        Self {
            kind: kind.to_string(),
            message: e.to_string(),
            parameter,
            residual_history: e.residual_history().to_vec(),
        }
    }
}

/// Machine-readable summary of one run, written as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub problem: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
    /// Final residual of each profile solve.
    pub residual_norms: Vec<f64>,
    pub iterations: Vec<usize>,
    /// Scalar summaries of the flux sets (max norms, fitted scales).
    pub flux_summaries: BTreeMap<String, f64>,
    /// Relative drift of conserved quantities over a simulation.
    pub conservation: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub wall_clock_seconds: f64,
    /// Files written next to the report.
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<CurveSet>,
}

impl RunReport {
    pub fn new(problem: &str, label: &str) -> Self {
        Self {
            status: RunStatus::Ok,
            problem: problem.to_string(),
            label: label.to_string(),
            config: None,
            error: None,
            residual_norms: Vec::new(),
            iterations: Vec::new(),
            flux_summaries: BTreeMap::new(),
            conservation: BTreeMap::new(),
            metrics: BTreeMap::new(),
            warnings: Vec::new(),
            wall_clock_seconds: 0.0,
            artifacts: Vec::new(),
            curves: Vec::new(),
        }
    }

    pub fn failed(mut self, e: &Error) -> Self {
        self.status = RunStatus::Failed;
        self.error = Some(ErrorRecord::from(e));
        self
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(format!("report: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failure_record_keeps_the_history() {
        let e = Error::solver("no convergence", vec![1.0, 0.5, 0.4]);
        let r = RunReport::new("rds_profile", "x").failed(&e);
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["status"], "failed");
        assert_eq!(v["error"]["kind"], "solver");
        assert_eq!(v["error"]["residual_history"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = RunReport::new("pme_barenblatt", "b");
        r.metric("mass", 1.5);
        r.residual_norms.push(1e-12);
        let path = dir.path().join("report.json");
        r.write(&path).unwrap();
        assert_eq!(RunReport::read(&path).unwrap(), r);
    }
}
