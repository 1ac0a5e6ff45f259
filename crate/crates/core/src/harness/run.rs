use num_rational::Rational64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::env::{EpisodeTrace, Scenario};
use crate::error::{Error, Result};
use crate::oracle::OraclePolicy;
use crate::rgpts::run_episode_rgpts;
use crate::rng::{agent_rng, env_rng};
use crate::sssarsa;
use crate::tabular::{run_episode_baseline, TabularKind};

use super::config::{AgentKind, AgentSpec};

/// Discounted regret of round `t` (0-based): `gamma^t * (oracle - agent)`.
#[inline]
pub fn regret_step(oracle: f64, agent: f64, gamma: f64, t: u64) -> f64 {
    discount(gamma, t) * (oracle - agent)
}

#[inline]
fn discount(gamma: f64, t: u64) -> f64 {
    if gamma == 1.0 {
        1.0
    } else {
        gamma.powf(t as f64)
    }
}

/// Per-round expected reward of the closed-form optimal policy, when one
/// exists for the scenario.
#[derive(Clone, Debug)]
pub struct OracleReference {
    pub policy: OraclePolicy,
    pub exact: Vec<Rational64>,
    pub values: Vec<f64>,
}

impl OracleReference {
    pub fn for_scenario(scn: &Scenario) -> Option<OracleReference> {
        let policy = OraclePolicy::for_scenario(scn)?;
        let exact = policy.rollout_exact(scn, scn.horizon() as usize);
        let values = exact.iter().map(crate::env::ratio_to_f64).collect();
        Some(OracleReference {
            policy,
            exact,
            values,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Regret,
    Reward,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Regret => "regret",
            Metric::Reward => "reward",
        }
    }
}

/// Summary of one simulation run, sampled at checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub seed: u64,
    pub scenario: String,
    pub agent: String,
    pub horizon: u64,
    pub gamma: f64,
    /// Rounds at which the cumulative series are sampled; the last is `horizon`.
    pub checkpoints: Vec<u64>,
    /// Cumulative discounted expected reward of the agent.
    pub reward: Vec<f64>,
    /// Cumulative discounted regret; absent when no oracle is defined.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regret: Option<Vec<f64>>,
    /// Cumulative discounted expected reward of the oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_reward: Option<Vec<f64>>,
    /// Length of the window checked for optimality (`3 * s_max`, capped at T).
    pub tail_rounds: u64,
    /// Whether the agent lost nothing to the oracle over the tail window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimal_in_tail: Option<bool>,
    /// Expected reward of every pull, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_rewards: Option<Vec<f64>>,
}

impl RunRecord {
    /// Accounts a finished episode against the oracle.
    ///
    /// The tail check sums `oracle - agent` in exact rational arithmetic over
    /// the last `3 * s_max` rounds without discounting.
    pub fn from_trace(
        scn: &Scenario,
        agent: &str,
        seed: u64,
        trace: &EpisodeTrace,
        oracle: Option<&OracleReference>,
        stride: u64,
        keep_rounds: bool,
    ) -> Result<RunRecord> {
        let horizon = scn.horizon();
        if trace.len() as u64 != horizon {
            return Err(Error::Domain(format!(
                "trace has {} rounds, horizon is {horizon}",
                trace.len()
            )));
        }
        if stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if let Some(o) = oracle {
            if o.values.len() as u64 != horizon {
                return Err(Error::Domain(
                    "oracle rollout length differs from horizon".into(),
                ));
            }
        }
        let gamma = scn.gamma();
        let mut checkpoints = Vec::new();
        let mut reward = Vec::new();
        let mut regret = oracle.map(|_| Vec::new());
        let mut oracle_reward = oracle.map(|_| Vec::new());
        let (mut cum_reward, mut cum_regret, mut cum_oracle) = (0.0, 0.0, 0.0);

        for (t, step) in trace.steps.iter().enumerate() {
            let d = discount(gamma, t as u64);
            cum_reward += d * step.expected;
            if let Some(o) = oracle {
                cum_oracle += d * o.values[t];
                cum_regret += d * (o.values[t] - step.expected);
            }
            let round = t as u64 + 1;
            if round.is_multiple_of(stride) || round == horizon {
                checkpoints.push(round);
                reward.push(cum_reward);
                if let (Some(r), Some(o)) = (regret.as_mut(), oracle_reward.as_mut()) {
                    r.push(cum_regret);
                    o.push(cum_oracle);
                }
            }
        }

        let tail_rounds = (3 * scn.s_max() as u64).min(horizon);
        let optimal_in_tail = oracle.map(|o| {
            let start = (horizon - tail_rounds) as usize;
            let gap = trace.steps[start..].iter().zip(&o.exact[start..]).fold(
                Rational64::zero(),
                |acc, (step, best)| {
                    acc + best - scn.mean_exact(step.arm as usize, step.state as usize)
                },
            );
            gap.is_zero()
        });

        Ok(RunRecord {
            seed,
            scenario: scn.name().to_owned(),
            agent: agent.to_owned(),
            horizon,
            gamma,
            checkpoints,
            reward,
            regret,
            oracle_reward,
            tail_rounds,
            optimal_in_tail,
            expected_rewards: keep_rounds.then(|| trace.expected_rewards().collect()),
        })
    }

    pub fn metric(&self) -> Metric {
        if self.regret.is_some() {
            Metric::Regret
        } else {
            Metric::Reward
        }
    }

    /// Regret when an oracle exists, reward otherwise.
    pub fn metric_series(&self) -> &[f64] {
        self.regret.as_deref().unwrap_or(&self.reward)
    }

    pub fn final_metric(&self) -> f64 {
        *self
            .metric_series()
            .last()
            .expect("validated records are non-empty")
    }

    /// Largest `|reward + regret - oracle|` over the checkpoints.
    pub fn duality_gap(&self) -> Option<f64> {
        let regret = self.regret.as_ref()?;
        let oracle = self.oracle_reward.as_ref()?;
        Some(
            self.reward
                .iter()
                .zip(regret)
                .zip(oracle)
                .map(|((r, g), o)| (r + g - o).abs())
                .fold(0.0, f64::max),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::json("run record", e))
    }

    pub fn from_json_str(text: &str) -> Result<RunRecord> {
        let rec: RunRecord =
            serde_json::from_str(text).map_err(|e| Error::json("run record", e))?;
        rec.validate()?;
        Ok(rec)
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<RunRecord> {
        let rec: RunRecord =
            serde_json::from_slice(bytes).map_err(|e| Error::json("run record", e))?;
        rec.validate()?;
        Ok(rec)
    }

    /// Structural checks for records read back from disk.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("run record: {msg}")));
        let n = self.checkpoints.len();
        if n == 0 {
            return bad("no checkpoints");
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) || self.checkpoints[0] == 0 {
            return bad("checkpoints must be positive and strictly increasing");
        }
        if self.checkpoints[n - 1] != self.horizon {
            return bad("last checkpoint must equal the horizon");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma outside (0, 1]");
        }
        if self.tail_rounds > self.horizon {
            return bad("tail window longer than the horizon");
        }
        if self.regret.is_some() != self.oracle_reward.is_some()
            || self.regret.is_some() != self.optimal_in_tail.is_some()
        {
            return bad("regret, oracle_reward and optimal_in_tail must appear together");
        }
        let series = [
            Some(&self.reward),
            self.regret.as_ref(),
            self.oracle_reward.as_ref(),
        ];
        for s in series.into_iter().flatten() {
            if s.len() != n {
                return bad("series length differs from checkpoints");
            }
            if s.iter().any(|x| !x.is_finite()) {
                return bad("non-finite value");
            }
        }
        if let Some(rounds) = &self.expected_rewards {
            if rounds.len() as u64 != self.horizon || rounds.iter().any(|x| !x.is_finite()) {
                return bad("per-round rewards must be finite and cover the horizon");
            }
        }
        Ok(())
    }
}

/// Runs one seeded episode of `spec` on `scn`.
pub fn simulate_trace(scn: &Scenario, spec: &AgentSpec, seed: u64) -> Result<EpisodeTrace> {
    let mut env = env_rng(seed);
    let mut agent = agent_rng(seed);
    let hyper = &spec.hyper;
    match spec.kind {
        AgentKind::SsSarsa => {
            let cfg = hyper.td_config(scn)?;
            Ok(sssarsa::run_episode(scn, &cfg, &mut env, &mut agent).trace)
        }
        AgentKind::QLearning | AgentKind::Sarsa => {
            let kind = if spec.kind == AgentKind::Sarsa {
                TabularKind::Sarsa
            } else {
                TabularKind::QLearning
            };
            let cfg = hyper.td_config(scn)?;
            run_episode_baseline(scn, kind, &cfg, hyper.max_joint_keys, &mut env, &mut agent)
                .map(|run| run.trace)
        }
        AgentKind::Rgpts => {
            run_episode_rgpts(scn, hyper.rgpts_params(), &mut env, &mut agent).map(|run| run.trace)
        }
    }
}

pub fn simulate(
    scn: &Scenario,
    spec: &AgentSpec,
    seed: u64,
    oracle: Option<&OracleReference>,
    stride: u64,
    keep_rounds: bool,
) -> Result<RunRecord> {
    let trace = simulate_trace(scn, spec, seed)?;
    RunRecord::from_trace(
        scn,
        &spec.label(),
        seed,
        &trace,
        oracle,
        stride,
        keep_rounds,
    )
}
