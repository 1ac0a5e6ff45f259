use serde::Serialize;

use crate::error::{Error, Result};

use super::run::{Metric, RunRecord};

/// Linear-interpolation quantile of sorted data (`(n - 1) p` positioning).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Mean of already sorted data, so the result does not depend on input order.
fn mean_sorted(sorted: &[f64]) -> f64 {
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub p5: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p95: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let s = sorted(values);
        Summary {
            mean: mean_sorted(&s),
            p5: quantile_sorted(&s, 0.05),
            p25: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            p75: quantile_sorted(&s, 0.75),
            p95: quantile_sorted(&s, 0.95),
        }
    }
}

/// Box-plot statistics with whiskers at the most extreme points inside
/// `[q1 - 1.5 IQR, q3 + 1.5 IQR]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxStats {
    pub n: usize,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

impl BoxStats {
    pub fn of(values: &[f64]) -> BoxStats {
        let s = sorted(values);
        let q1 = quantile_sorted(&s, 0.25);
        let q3 = quantile_sorted(&s, 0.75);
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside = |x: &&f64| **x >= lo_fence && **x <= hi_fence;
        let whisker_low = s.iter().find(inside).copied().unwrap_or(q1);
        let whisker_high = s.iter().rev().find(inside).copied().unwrap_or(q3);
        BoxStats {
            n: s.len(),
            mean: mean_sorted(&s),
            q1,
            median: quantile_sorted(&s, 0.5),
            q3,
            whisker_low,
            whisker_high,
            outliers: s.iter().copied().filter(|x| !inside(&x)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OptimalRate {
    pub n_optimal: usize,
    pub n_runs: usize,
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheckpointStats {
    pub round: u64,
    #[serde(flatten)]
    pub summary: Summary,
}

/// Cross-run statistics for one (scenario, agent) pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateStats {
    pub scenario: String,
    pub agent: String,
    pub metric: Metric,
    pub n_runs: usize,
    pub checkpoints: Vec<CheckpointStats>,
    pub final_box: BoxStats,
    /// Share of runs optimal over the tail window; absent without an oracle.
    pub optimal: Option<OptimalRate>,
}

impl AggregateStats {
    pub fn from_records(records: &[RunRecord]) -> Result<AggregateStats> {
        let first = records
            .first()
            .ok_or_else(|| Error::Config("no run records to aggregate".into()))?;
        for r in records {
            if r.scenario != first.scenario || r.agent != first.agent {
                return Err(Error::Config(format!(
                    "cannot aggregate {}/{} with {}/{}",
                    r.scenario, r.agent, first.scenario, first.agent
                )));
            }
            if r.checkpoints != first.checkpoints || r.metric() != first.metric() {
                return Err(Error::Config(format!(
                    "run {} has different checkpoints or metric than run {}",
                    r.seed, first.seed
                )));
            }
        }
        let checkpoints = first
            .checkpoints
            .iter()
            .enumerate()
            .map(|(i, &round)| {
                let column: Vec<f64> = records.iter().map(|r| r.metric_series()[i]).collect();
                CheckpointStats {
                    round,
                    summary: Summary::of(&column),
                }
            })
            .collect();
        let finals: Vec<f64> = records.iter().map(RunRecord::final_metric).collect();
        let optimal = match first.metric() {
            Metric::Regret => {
                let n_optimal = records
                    .iter()
                    .filter(|r| r.optimal_in_tail == Some(true))
                    .count();
                Some(OptimalRate {
                    n_optimal,
                    n_runs: records.len(),
                    rate: n_optimal as f64 / records.len() as f64,
                })
            }
            Metric::Reward => None,
        };
        Ok(AggregateStats {
            scenario: first.scenario.clone(),
            agent: first.agent.clone(),
            metric: first.metric(),
            n_runs: records.len(),
            checkpoints,
            final_box: BoxStats::of(&finals),
            optimal,
        })
    }

    /// Median at the first checkpoint at or after `round`.
    pub fn median_at(&self, round: u64) -> Option<f64> {
        self.checkpoints
            .iter()
            .find(|c| c.round >= round)
            .map(|c| c.summary.median)
    }

    pub fn optimal_rate(&self) -> Option<f64> {
        self.optimal.map(|o| o.rate)
    }
}
