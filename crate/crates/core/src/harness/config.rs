use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{GammaMode, Preset, RewardDistribution, RewardShape, Scenario};
use crate::error::{Error, Result};
use crate::rgpts::{RgptsParams, DEFAULT_LENGTHSCALE, DEFAULT_SIGMA};
use crate::sssarsa::{Exploration, ExplorationPlan, LearningSchedule, TdConfig};
use crate::tabular::DEFAULT_MAX_JOINT_KEYS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    QLearning,
    Sarsa,
    SsSarsa,
    Rgpts,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::QLearning,
        AgentKind::Sarsa,
        AgentKind::SsSarsa,
        AgentKind::Rgpts,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::QLearning => "q-learning",
            AgentKind::Sarsa => "sarsa",
            AgentKind::SsSarsa => "ss-sarsa",
            AgentKind::Rgpts => "rgpts",
        }
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown agent '{s}'")))
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Agent hyperparameters. Each agent reads only the fields it uses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    /// Offset in `alpha_t = 1 / (t + t0)`.
    pub t0: u64,
    /// Share of the horizon spent exploring uniformly.
    pub explore_fraction: f64,
    /// Discount in the TD target; the scenario's discount when absent.
    pub gamma: Option<f64>,
    /// Lookahead for Thompson sampling.
    pub d: usize,
    pub sigma: f64,
    pub lengthscale: f64,
    pub max_joint_keys: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            t0: LearningSchedule::default().t0,
            explore_fraction: 0.1,
            gamma: None,
            d: 1,
            sigma: DEFAULT_SIGMA,
            lengthscale: DEFAULT_LENGTHSCALE,
            max_joint_keys: DEFAULT_MAX_JOINT_KEYS,
        }
    }
}

impl Hyper {
    pub fn td_config(&self, scn: &Scenario) -> Result<TdConfig> {
        let gamma = self.gamma.unwrap_or(scn.gamma());
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma {gamma} outside [0, 1]")));
        }
        Ok(TdConfig {
            schedule: LearningSchedule::new(self.t0),
            exploration: Exploration::UniformFirst(ExplorationPlan::from_fraction(
                self.explore_fraction,
                scn.horizon(),
            )?),
            gamma,
        })
    }

    pub fn rgpts_params(&self) -> RgptsParams {
        RgptsParams {
            d: self.d,
            sigma: self.sigma,
            lengthscale: self.lengthscale,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub kind: AgentKind,
    pub hyper: Hyper,
}

impl AgentSpec {
    pub fn new(kind: AgentKind) -> Self {
        AgentSpec {
            kind,
            hyper: Hyper::default(),
        }
    }

    pub fn rgpts(d: usize) -> Self {
        let mut spec = AgentSpec::new(AgentKind::Rgpts);
        spec.hyper.d = d;
        spec
    }

    /// Name used for output directories and CSV keys, e.g. `ss-sarsa` or
    /// `rgpts-d2`.
    pub fn label(&self) -> String {
        match self.kind {
            AgentKind::Rgpts => format!("rgpts-d{}", self.hyper.d),
            kind => kind.as_str().to_owned(),
        }
    }
}

/// A preset by name with optional overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetRef {
    pub preset: Preset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<RewardShape>,
    #[serde(default = "default_distribution")]
    pub distribution: RewardDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
}

fn default_distribution() -> RewardDistribution {
    RewardDistribution::Bernoulli
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Preset(PresetRef),
    Inline(Scenario),
}

fn default_n_sims() -> usize {
    100
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioRef,
    pub agent: AgentKind,
    #[serde(default)]
    pub hyper: Hyper,
    #[serde(default = "default_n_sims")]
    pub n_sims: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Rounds between checkpoints; `T / 500` (at least 1) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<u64>,
    /// Applies to presets only; inline scenarios carry their own discount.
    #[serde(default)]
    pub gamma_mode: GammaMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Keep every round's expected reward in the run records.
    #[serde(default)]
    pub record_rounds: bool,
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioRef, agent: AgentSpec, n_sims: usize) -> Self {
        ExperimentConfig {
            scenario,
            agent: agent.kind,
            hyper: agent.hyper,
            n_sims,
            base_seed: 0,
            stride: None,
            gamma_mode: GammaMode::default(),
            output: None,
            record_rounds: false,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::json("experiment config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_slice(bytes).map_err(|e| Error::json("experiment config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("experiment config", e))
    }

    pub fn agent_spec(&self) -> AgentSpec {
        AgentSpec {
            kind: self.agent,
            hyper: self.hyper,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sims == 0 {
            return Err(Error::Config("n_sims must be at least 1".into()));
        }
        if self.stride == Some(0) {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if self.base_seed.checked_add(self.n_sims as u64).is_none() {
            return Err(Error::Config("seed range overflows u64".into()));
        }
        if self.agent == AgentKind::Rgpts && self.hyper.d == 0 {
            return Err(Error::Config("lookahead d must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolve_scenario(&self) -> Result<Scenario> {
        match &self.scenario {
            ScenarioRef::Preset(p) => {
                p.preset
                    .scenario(p.shape, p.distribution, p.horizon, self.gamma_mode)
            }
            ScenarioRef::Inline(s) => Ok(s.clone()),
        }
    }

    pub fn stride_for(&self, horizon: u64) -> u64 {
        self.stride.unwrap_or((horizon / 500).max(1))
    }
}
