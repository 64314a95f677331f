//! Experiment harness: JSON-configured runs of the lifting pipeline, the
//! solver and the non-degeneracy decider, reported as JSON, CSV and SVG.

pub mod config;
pub mod experiment;
pub mod report;

use std::path::Path;

use thiserror::Error;

pub use config::{ExperimentConfig, Kind};
pub use experiment::run_experiment;
pub use report::{render_svg, write_csv, RunReport, Series, Table};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("refused: {0}")]
    Validation(String),
    #[error("threshold failed: {0}")]
    Threshold(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Validation(_) => 3,
            HarnessError::Threshold(_) => 4,
            HarnessError::Io(_) => 1,
        }
    }
}

/// Runs `cfg` and writes `<kind>.json`, one CSV per table and, with `plot`,
/// one SVG per plot into `out`. Threshold failures are reported after all
/// outputs are written.
pub fn execute(cfg: &ExperimentConfig, out: &Path, plot: bool) -> Result<RunReport, HarnessError> {
    let report = run_experiment(cfg)?;
    std::fs::create_dir_all(out)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", out.display())))?;
    report::write_json(&report, &out.join(format!("{}.json", report.kind)))?;
    for t in &report.tables {
        write_csv(t, &out.join(format!("{}.csv", t.name)))?;
    }
    if plot {
        for p in &report.plots {
            render_svg(&p.series, &out.join(format!("{}.svg", p.name)), p.log_y)?;
        }
    }
    if !report.passed {
        return Err(HarnessError::Threshold(report.failures.join("; ")));
    }
    Ok(report)
}
