use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::run::RunRecord;
use super::stats::AggregateStats;
use super::ExperimentResult;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path.display().to_string(), e))
}

fn write_rows(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let ctx = || path.display().to_string();
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| Error::csv(ctx(), e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::csv(ctx(), e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `round,median,p5,p95,mean` for one experiment.
pub fn write_aggregate_csv(path: &Path, stats: &AggregateStats) -> Result<()> {
    let rows = stats
        .checkpoints
        .iter()
        .map(|c| {
            let s = &c.summary;
            vec![
                c.round.to_string(),
                s.median.to_string(),
                s.p5.to_string(),
                s.p95.to_string(),
                s.mean.to_string(),
            ]
        })
        .collect();
    write_rows(path, &["round", "median", "p5", "p95", "mean"], rows)
}

/// Median and band per checkpoint, one series per (scenario, agent).
pub fn write_trajectory_csv(path: &Path, all: &[AggregateStats]) -> Result<()> {
    let mut rows = Vec::new();
    for stats in all {
        for c in &stats.checkpoints {
            let s = &c.summary;
            rows.push(vec![
                stats.scenario.clone(),
                stats.agent.clone(),
                stats.metric.as_str().to_owned(),
                c.round.to_string(),
                s.median.to_string(),
                s.p5.to_string(),
                s.p95.to_string(),
                s.mean.to_string(),
            ]);
        }
    }
    write_rows(
        path,
        &[
            "scenario", "agent", "metric", "round", "median", "p5", "p95", "mean",
        ],
        rows,
    )
}

/// Final-round box statistics; outliers are `;`-separated.
pub fn write_boxstats_csv(path: &Path, all: &[AggregateStats]) -> Result<()> {
    let rows = all
        .iter()
        .map(|stats| {
            let b = &stats.final_box;
            vec![
                stats.scenario.clone(),
                stats.agent.clone(),
                stats.metric.as_str().to_owned(),
                b.n.to_string(),
                b.mean.to_string(),
                b.q1.to_string(),
                b.median.to_string(),
                b.q3.to_string(),
                b.whisker_low.to_string(),
                b.whisker_high.to_string(),
                b.outliers
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(";"),
            ]
        })
        .collect();
    write_rows(
        path,
        &[
            "scenario",
            "agent",
            "metric",
            "n",
            "mean",
            "q1",
            "median",
            "q3",
            "whisker_low",
            "whisker_high",
            "outliers",
        ],
        rows,
    )
}

/// Rate of optimal policy; the last two columns are empty without an oracle.
pub fn write_optimal_rate_csv(path: &Path, all: &[AggregateStats]) -> Result<()> {
    let rows = all
        .iter()
        .map(|stats| {
            let (n_optimal, rate) = match stats.optimal {
                Some(o) => (o.n_optimal.to_string(), o.rate.to_string()),
                None => (String::new(), String::new()),
            };
            vec![
                stats.scenario.clone(),
                stats.agent.clone(),
                stats.n_runs.to_string(),
                n_optimal,
                rate,
            ]
        })
        .collect();
    write_rows(
        path,
        &["scenario", "agent", "n_runs", "n_optimal", "rate"],
        rows,
    )
}

/// Writes `runs/<agent>/<seed>.json` plus the three CSV summaries into `dir`.
pub fn write_experiment(dir: &Path, result: &ExperimentResult) -> Result<()> {
    let runs = dir.join("runs").join(&result.agent);
    create_dir(&runs)?;
    for rec in &result.records {
        let path = runs.join(format!("{}.json", rec.seed));
        fs::write(&path, rec.to_json()?).map_err(|e| Error::io(&path, e))?;
    }
    let all = std::slice::from_ref(&result.stats);
    write_aggregate_csv(&dir.join("aggregate.csv"), &result.stats)?;
    write_boxstats_csv(&dir.join("boxstats.csv"), all)?;
    write_optimal_rate_csv(&dir.join("optimal_rate.csv"), all)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

fn collect_run_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for path in sorted_entries(dir)? {
        if !path.is_dir() {
            continue;
        }
        if path.file_name().is_some_and(|n| n == "runs") {
            for agent_dir in sorted_entries(&path)? {
                if !agent_dir.is_dir() {
                    continue;
                }
                for file in sorted_entries(&agent_dir)? {
                    if file.extension().is_some_and(|e| e == "json") {
                        out.push(file);
                    }
                }
            }
        } else {
            collect_run_files(&path, out)?;
        }
    }
    Ok(())
}

fn read_record(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rec: RunRecord =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    rec.validate()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(rec)
}

/// Every run record under `dir` (searched recursively for `runs/` folders),
/// grouped by (scenario, agent) and sorted by seed.
pub fn load_records(dir: &Path) -> Result<BTreeMap<(String, String), Vec<RunRecord>>> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input directory not found"),
        ));
    }
    let mut files = Vec::new();
    if dir.file_name().is_some_and(|n| n == "runs") {
        collect_run_files(dir.parent().unwrap_or(dir), &mut files)?;
    } else {
        collect_run_files(dir, &mut files)?;
    }
    let mut groups: BTreeMap<(String, String), Vec<RunRecord>> = BTreeMap::new();
    for file in files {
        let rec = read_record(&file)?;
        groups
            .entry((rec.scenario.clone(), rec.agent.clone()))
            .or_default()
            .push(rec);
    }
    if groups.is_empty() {
        return Err(Error::Config(format!(
            "no run records under {}",
            dir.display()
        )));
    }
    for ((scenario, agent), recs) in groups.iter_mut() {
        recs.sort_by_key(|r| r.seed);
        if let Some(w) = recs.windows(2).find(|w| w[0].seed == w[1].seed) {
            return Err(Error::Config(format!(
                "duplicate seed {} for {agent} on {scenario}",
                w[0].seed
            )));
        }
    }
    Ok(groups)
}

/// Recomputes statistics from raw run records under `in_dir` and writes
/// `trajectory.csv`, `boxstats.csv` and `optimal_rate.csv` into `out_dir`.
pub fn report(in_dir: &Path, out_dir: &Path) -> Result<Vec<AggregateStats>> {
    let groups = load_records(in_dir)?;
    let all = groups
        .values()
        .map(|recs| AggregateStats::from_records(recs))
        .collect::<Result<Vec<_>>>()?;
    create_dir(out_dir)?;
    write_trajectory_csv(&out_dir.join("trajectory.csv"), &all)?;
    write_boxstats_csv(&out_dir.join("boxstats.csv"), &all)?;
    write_optimal_rate_csv(&out_dir.join("optimal_rate.csv"), &all)?;
    Ok(all)
}
