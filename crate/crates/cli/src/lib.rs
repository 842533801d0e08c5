//! Experiment runner for the phase-space diffusion model.

pub mod config;
pub mod scenarios;
pub mod table;

use crate::config::ExperimentConfig;
use crate::scenarios::{Scenario, ScenarioOutput};
use crate::table::ResultTable;
use rayon::prelude::*;
use std::path::Path;
use std::time::{Duration, Instant};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown scenario '{0}' (see `phasediff list`)")]
    UnknownScenario(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] phasediff::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub output: ScenarioOutput,
    pub runtime: Duration,
}

pub fn run_scenario(cfg: &ExperimentConfig) -> Result<ScenarioRun, CliError> {
    cfg.validate()?;
    let scenario = Scenario::from_name(&cfg.scenario)?;
    let start = Instant::now();
    let output = scenario.run(cfg)?;
    let runtime = start.elapsed();
    log::info!("{scenario}: {} rows in {:.2?}", output.table.rows.len(), runtime);
    Ok(ScenarioRun { scenario, output, runtime })
}

/// Runs each config; with `parallel` the scenarios execute concurrently,
/// results keep the input order either way.
pub fn run_many(cfgs: &[ExperimentConfig], parallel: bool) -> Vec<Result<ScenarioRun, CliError>> {
    if parallel {
        cfgs.par_iter().map(run_scenario).collect()
    } else {
        cfgs.iter().map(run_scenario).collect()
    }
}

/// <out>/<scenario>/results.csv, summary.txt and the data series. Runtimes
/// are kept out of these files so reruns compare byte for byte.
pub fn write_outputs(out: &Path, run: &ScenarioRun) -> Result<(), CliError> {
    let dir = out.join(run.scenario.name());
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("results.csv"), run.output.table.to_csv()?)?;
    std::fs::write(dir.join("summary.txt"), run.output.table.summary())?;
    for d in &run.output.data {
        d.write(&dir)?;
    }
    Ok(())
}

/// Combined results.csv and runtimes.csv across runs.
pub fn write_combined(out: &Path, runs: &[&ScenarioRun]) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    let mut all = ResultTable::default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["experiment", "runtime_s"])?;
    for r in runs {
        all.extend(r.output.table.clone());
        w.write_record([r.scenario.name().to_string(), format!("{:.3}", r.runtime.as_secs_f64())])?;
    }
    std::fs::write(out.join("results.csv"), all.to_csv()?)?;
    let body = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    std::fs::write(out.join("runtimes.csv"), body)?;
    Ok(())
}

pub fn list_scenarios() -> String {
    Scenario::ALL.iter().map(|s| format!("{:<22} {}\n", s.name(), s.description())).collect()
}

pub fn emit_default_config(name: &str) -> Result<String, CliError> {
    Ok(ExperimentConfig::default_for(Scenario::from_name(name)?).emit())
}
