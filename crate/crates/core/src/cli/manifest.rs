//! Run manifest: configuration echo, versions, timing and the list of outputs.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{CliError, CliResult, RunConfig};
use crate::propagator::SolverOptions;

/// Resolved versions of the direct dependencies, read from the lock file at build time.
const LOCK_FILE: &str = include_str!("../../../../Cargo.lock");
const DEPENDENCIES: &[&str] = &[
    "clap",
    "num-complex",
    "rayon",
    "rustfft",
    "serde",
    "serde_json",
    "thiserror",
];

/// One artifact written by a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    /// The figure or quantity the file reproduces; repeated in its tag column.
    pub tag: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub solver: SolverOptions,
    pub dependencies: Vec<(String, String)>,
    pub started_unix: f64,
    pub wall_time_seconds: f64,
    pub outputs: Vec<OutputFile>,
}

/// (name, version) of each direct dependency found in the lock file.
pub fn dependency_versions() -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut name: Option<&str> = None;
    for line in LOCK_FILE.lines() {
        let line = line.trim();
        if line == "[[package]]" {
            name = None;
        } else if let Some(v) = line.strip_prefix("name = ") {
            name = Some(v.trim_matches('"'));
        } else if let Some(v) = line.strip_prefix("version = ") {
            if let Some(n) = name.filter(|n| DEPENDENCIES.contains(n)) {
                if !out.iter().any(|(m, _): &(String, String)| m == n) {
                    out.push((n.to_string(), v.trim_matches('"').to_string()));
                }
            }
        }
    }
    out.sort();
    out
}

pub fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl Manifest {
    pub fn new(config: &RunConfig, solver: SolverOptions, started: f64) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: config.command.name().to_string(),
            config: config.clone(),
            solver,
            dependencies: dependency_versions(),
            started_unix: started,
            wall_time_seconds: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), text)
            .map_err(|e| CliError::Config(format!("cannot write manifest: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_file_lists_direct_dependencies() {
        let deps = dependency_versions();
        for d in DEPENDENCIES {
            assert!(deps.iter().any(|(n, v)| n == d && !v.is_empty()), "{d}");
        }
    }
}
