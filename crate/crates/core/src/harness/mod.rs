//! Seeded experiments: runs every seed of an (agent, scenario) pair, accounts
//! regret against the closed-form oracle, aggregates across runs and writes
//! JSON/CSV artifacts.

mod config;
mod report;
mod run;
mod stats;

use rayon::prelude::*;

pub use config::{AgentKind, AgentSpec, ExperimentConfig, Hyper, PresetRef, ScenarioRef};
pub use report::{
    load_records, report, write_aggregate_csv, write_boxstats_csv, write_experiment,
    write_optimal_rate_csv, write_trajectory_csv,
};
pub use run::{regret_step, simulate, simulate_trace, Metric, OracleReference, RunRecord};
pub use stats::{quantile_sorted, AggregateStats, BoxStats, CheckpointStats, OptimalRate, Summary};

use crate::env::Scenario;
use crate::error::{Error, Result};

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "RBENCH_WORKERS";

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub scenario: Scenario,
    pub agent: String,
    pub records: Vec<RunRecord>,
    pub stats: AggregateStats,
}

/// Worker cap from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(raw) => raw
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| {
                Error::Config(format!(
                    "{WORKERS_ENV} must be a positive integer, got '{raw}'"
                ))
            }),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Config(format!("{WORKERS_ENV}: {e}"))),
    }
}

/// Runs the experiment with the worker cap taken from the environment and
/// writes artifacts when `cfg.output` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with_workers(cfg, workers_from_env()?)
}

/// Like [`run_experiment`] with an explicit worker cap (`None` lets the pool
/// pick). Results do not depend on the number of workers.
pub fn run_experiment_with_workers(
    cfg: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let scn = cfg.resolve_scenario()?;
    let spec = cfg.agent_spec();
    let label = spec.label();
    let oracle = OracleReference::for_scenario(&scn);
    let stride = cfg.stride_for(scn.horizon());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let seeds = cfg.base_seed..cfg.base_seed + cfg.n_sims as u64;
    let records = pool.install(|| {
        seeds
            .into_par_iter()
            .map(|seed| {
                simulate(
                    &scn,
                    &spec,
                    seed,
                    oracle.as_ref(),
                    stride,
                    cfg.record_rounds,
                )
                .map_err(|e| Error::Run {
                    seed,
                    agent: label.clone(),
                    scenario: scn.name().to_owned(),
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let stats = AggregateStats::from_records(&records)?;
    let result = ExperimentResult {
        scenario: scn,
        agent: label,
        records,
        stats,
    };
    if let Some(dir) = &cfg.output {
        write_experiment(dir, &result)?;
    }
    Ok(result)
}
