use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::scenario::Scenario;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// The verifier itself failed (solver error, coverage, ...).
    Error,
    /// Skipped because a hypothesis of the theorem does not hold.
    NotApplicable,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Error => "error",
            Status::NotApplicable => "not-applicable",
        }
    }
}

/// One verifier summary: `slack` is positive when `worst` respects `bound`.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub bound: Option<f64>,
    pub worst: Option<f64>,
    pub slack: Option<f64>,
    pub samples: usize,
    pub pass: bool,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Check {
    /// Passes when `slack ≥ −tolerance`.
    pub fn slack(name: &str, bound: f64, worst: f64, slack: f64, samples: usize, tolerance: f64) -> Check {
        let pass = slack >= -tolerance;
        Check {
            name: name.into(),
            bound: Some(bound),
            worst: Some(worst),
            slack: Some(slack),
            samples,
            pass,
            status: if pass { Status::Pass } else { Status::Fail },
            message: None,
        }
    }

    /// Passes when `worst < bound` strictly.
    pub fn below(name: &str, bound: f64, worst: f64, samples: usize) -> Check {
        let pass = worst < bound;
        Check {
            pass,
            status: if pass { Status::Pass } else { Status::Fail },
            ..Check::slack(name, bound, worst, bound - worst, samples, 0.0)
        }
    }

    /// Passes when `worst > bound` strictly.
    pub fn above(name: &str, bound: f64, worst: f64, samples: usize) -> Check {
        let pass = worst > bound;
        Check {
            pass,
            status: if pass { Status::Pass } else { Status::Fail },
            ..Check::slack(name, bound, worst, worst - bound, samples, 0.0)
        }
    }

    pub fn error(name: &str, err: &Error) -> Check {
        Check {
            name: name.into(),
            bound: None,
            worst: None,
            slack: None,
            samples: 0,
            pass: false,
            status: Status::Error,
            message: Some(err.to_string()),
        }
    }

    pub fn not_applicable(name: &str, reason: &str) -> Check {
        Check {
            status: Status::NotApplicable,
            message: Some(reason.into()),
            ..Check::error(name, &Error::Precondition(String::new()))
        }
    }

    pub fn with_message(mut self, message: impl Into<String>) -> Check {
        self.message = Some(message.into());
        self
    }
}

/// Per-sample rows for plotting.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Artifact {
    pub fn new(name: &str, header: &[&str]) -> Artifact {
        Artifact {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Header with coordinate columns `prefix0, prefix1, …` expanded.
    pub fn with_vectors(name: &str, columns: &[(&str, usize)]) -> Artifact {
        let header = columns
            .iter()
            .flat_map(|(c, k)| match k {
                0 | 1 => vec![c.to_string()],
                k => (0..*k).map(|i| format!("{c}{i}")).collect(),
            })
            .collect();
        Artifact { name: name.into(), header, rows: Vec::new() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub scenario: Scenario,
    pub subcommand: String,
    pub checks: Vec<Check>,
    /// Set when the isometry audit fails, so the theorem does not apply.
    pub hypothesis_violated: bool,
    pub details: BTreeMap<String, serde_json::Value>,
    pub wall_ms: u64,
    #[serde(skip)]
    pub artifacts: Vec<Artifact>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::numeric(format!("cannot serialize report: {e}")))
    }

    /// Writes `<scenario>_<subcommand>.json` and one CSV per artifact.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let json = dir.join(format!("{}_{}.json", self.scenario.name, self.subcommand));
        std::fs::write(&json, self.to_json()? + "\n")?;
        written.push(json);
        for a in &self.artifacts {
            let path = dir.join(format!("{}_{}.csv", self.scenario.name, a.name));
            let mut w = csv::Writer::from_path(&path).map_err(csv_error)?;
            w.write_record(&a.header).map_err(csv_error)?;
            for row in &a.rows {
                w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
            }
            w.flush()?;
            written.push(path);
        }
        Ok(written)
    }

    /// One line per check, for terminal output.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6e}"));
            out.push_str(&format!(
                "{:<28} {:<15} bound {:>14} worst {:>14} slack {:>14} n={}{}\n",
                c.name,
                c.status.as_str(),
                fmt(c.bound),
                fmt(c.worst),
                fmt(c.slack),
                c.samples,
                c.message.as_ref().map_or(String::new(), |m| format!("  ({m})")),
            ));
        }
        out
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
