//! The recovering-bandit environment.
//!
//! Each arm carries an elapsed-round counter capped at `s_max`. Pulling an arm
//! resets its counter to 1 and every other counter advances by one (saturating
//! at `s_max`). Rewards depend only on the pulled arm and its own counter.
//!
//! Arms are 0-based; states are 1-based (`1..=s_max`).

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance of the Gaussian reward model.
pub const NORMAL_VARIANCE: f64 = 0.5;

/// Upper bound on `K * s_max`, keeping per-arm tables allocatable.
pub const MAX_TABLE_CELLS: usize = 1 << 20;

/// Elapsed rounds since each arm was last pulled, capped at `s_max`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(Vec<usize>);

impl StateVector {
    pub fn new(states: Vec<usize>, s_max: usize) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Domain(
                "state vector must cover at least one arm".into(),
            ));
        }
        if let Some((k, &s)) = states
            .iter()
            .enumerate()
            .find(|(_, &s)| s == 0 || s > s_max)
        {
            return Err(Error::Domain(format!(
                "state of arm {k} is {s}, outside [1, {s_max}]"
            )));
        }
        Ok(StateVector(states))
    }

    /// Every arm at the same state, e.g. the usual `s_max`-everywhere start.
    pub fn uniform(arms: usize, state: usize) -> Self {
        StateVector(vec![state; arms])
    }

    pub fn arms(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn get(&self, arm: usize) -> usize {
        self.0[arm]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Successor state after pulling `arm`. The receiver is left untouched.
    pub fn transition(&self, arm: usize, s_max: usize) -> Result<StateVector> {
        if arm >= self.arms() {
            return Err(Error::Domain(format!(
                "arm {arm} out of range for {} arms",
                self.arms()
            )));
        }
        let mut next = self.clone();
        next.advance(arm, s_max);
        Ok(next)
    }

    /// In-place transition for hot loops; `arm` must be in range.
    #[inline]
    pub fn advance(&mut self, arm: usize, s_max: usize) {
        for (k, s) in self.0.iter_mut().enumerate() {
            *s = if k == arm { 1 } else { (*s + 1).min(s_max) };
        }
    }

    /// Mixed-radix index in `[0, s_max^K)`, used as a compact map key.
    #[inline]
    pub fn encode(&self, s_max: usize) -> u128 {
        self.0
            .iter()
            .rev()
            .fold(0u128, |acc, &s| acc * s_max as u128 + (s - 1) as u128)
    }

    pub fn decode(mut code: u128, arms: usize, s_max: usize) -> StateVector {
        let mut states = Vec::with_capacity(arms);
        for _ in 0..arms {
            states.push((code % s_max as u128) as usize + 1);
            code /= s_max as u128;
        }
        StateVector(states)
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str(")")
    }
}

/// Free-function form of [`StateVector::transition`].
pub fn transition(s: &StateVector, arm: usize, s_max: usize) -> Result<StateVector> {
    s.transition(arm, s_max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardDistribution {
    Bernoulli,
    /// Gaussian noise with variance [`NORMAL_VARIANCE`] around the mean.
    Normal,
}

impl RewardDistribution {
    pub fn as_str(self) -> &'static str {
        match self {
            RewardDistribution::Bernoulli => "bernoulli",
            RewardDistribution::Normal => "normal",
        }
    }
}

impl FromStr for RewardDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(RewardDistribution::Bernoulli),
            "normal" => Ok(RewardDistribution::Normal),
            other => Err(Error::Config(format!(
                "unknown reward distribution '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardShape {
    /// Arm 0 pays 0.1 below `s_max` and 0.3 at `s_max`; all others pay 0.2.
    SmallScale,
    MonotoneIncreasing,
    IncreasingThenDecreasing,
}

impl RewardShape {
    pub fn as_str(self) -> &'static str {
        match self {
            RewardShape::SmallScale => "small-scale",
            RewardShape::MonotoneIncreasing => "monotone-increasing",
            RewardShape::IncreasingThenDecreasing => "increasing-then-decreasing",
        }
    }

    fn short(self) -> &'static str {
        match self {
            RewardShape::SmallScale => "small",
            RewardShape::MonotoneIncreasing => "inc",
            RewardShape::IncreasingThenDecreasing => "incdec",
        }
    }
}

impl FromStr for RewardShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small-scale" | "small" => Ok(RewardShape::SmallScale),
            "monotone-increasing" | "monotone" | "inc" => Ok(RewardShape::MonotoneIncreasing),
            "increasing-then-decreasing" | "incdec" => Ok(RewardShape::IncreasingThenDecreasing),
            other => Err(Error::Config(format!("unknown reward shape '{other}'"))),
        }
    }
}

/// A realised reward together with the mean it was drawn around.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardSample {
    pub value: f64,
    pub expected: f64,
}

/// Serialized form of [`Scenario`]; rationals are written as `"p/q"` strings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDef {
    name: String,
    arms: usize,
    s_max: usize,
    horizon: u64,
    gamma: f64,
    distribution: RewardDistribution,
    shape: RewardShape,
    #[serde(default)]
    best_arms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_best: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_sub_best: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_state: Option<Vec<usize>>,
}

/// A complete, validated environment definition.
///
/// Arms `0..best_arms` are the best arms; the rest are sub-best. Mean rewards
/// are held as exact rationals and mirrored in an `f64` table for sampling.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ScenarioDef", into = "ScenarioDef")]
pub struct Scenario {
    name: String,
    arms: usize,
    s_max: usize,
    horizon: u64,
    gamma: f64,
    distribution: RewardDistribution,
    shape: RewardShape,
    best_arms: usize,
    v_best: Option<Rational64>,
    v_sub_best: Option<Rational64>,
    initial_state: StateVector,
    exact_means: Vec<Rational64>,
    means: Vec<f64>,
}

fn parse_ratio(field: &str, raw: &str) -> Result<Rational64> {
    Rational64::from_str(raw.trim())
        .map_err(|_| Error::Config(format!("{field}: '{raw}' is not a rational like \"1/4\"")))
}

impl TryFrom<ScenarioDef> for Scenario {
    type Error = Error;

    fn try_from(def: ScenarioDef) -> Result<Self> {
        let v_best = def
            .v_best
            .as_deref()
            .map(|r| parse_ratio("v_best", r))
            .transpose()?;
        let v_sub_best = def
            .v_sub_best
            .as_deref()
            .map(|r| parse_ratio("v_sub_best", r))
            .transpose()?;
        let best_arms = def.best_arms.unwrap_or(def.arms);
        let initial_state = match def.initial_state {
            Some(states) => Some(StateVector::new(states, def.s_max)?),
            None => None,
        };
        ScenarioBuilder {
            name: def.name,
            arms: def.arms,
            s_max: def.s_max,
            horizon: def.horizon,
            gamma: def.gamma,
            distribution: def.distribution,
            shape: def.shape,
            best_arms,
            v_best,
            v_sub_best,
            initial_state,
        }
        .build()
    }
}

impl From<Scenario> for ScenarioDef {
    fn from(s: Scenario) -> Self {
        ScenarioDef {
            name: s.name,
            arms: s.arms,
            s_max: s.s_max,
            horizon: s.horizon,
            gamma: s.gamma,
            distribution: s.distribution,
            shape: s.shape,
            best_arms: Some(s.best_arms),
            v_best: s.v_best.map(|r| r.to_string()),
            v_sub_best: s.v_sub_best.map(|r| r.to_string()),
            initial_state: Some(s.initial_state.0),
        }
    }
}

/// Field-by-field constructor for custom scenarios.
#[derive(Clone, Debug)]
pub struct ScenarioBuilder {
    pub name: String,
    pub arms: usize,
    pub s_max: usize,
    pub horizon: u64,
    pub gamma: f64,
    pub distribution: RewardDistribution,
    pub shape: RewardShape,
    pub best_arms: usize,
    pub v_best: Option<Rational64>,
    pub v_sub_best: Option<Rational64>,
    /// Defaults to `s_max` for every arm.
    pub initial_state: Option<StateVector>,
}

impl ScenarioBuilder {
    /// Small-scale shape with the given size; other fields take common defaults.
    pub fn small_scale(name: impl Into<String>, arms: usize, s_max: usize, horizon: u64) -> Self {
        ScenarioBuilder {
            name: name.into(),
            arms,
            s_max,
            horizon,
            gamma: 1.0,
            distribution: RewardDistribution::Bernoulli,
            shape: RewardShape::SmallScale,
            best_arms: arms,
            v_best: None,
            v_sub_best: None,
            initial_state: None,
        }
    }

    pub fn build(self) -> Result<Scenario> {
        let ScenarioBuilder {
            name,
            arms,
            s_max,
            horizon,
            gamma,
            distribution,
            shape,
            best_arms,
            v_best,
            v_sub_best,
            initial_state,
        } = self;

        if arms == 0 {
            return Err(Error::Config("a scenario needs at least one arm".into()));
        }
        if s_max == 0 {
            return Err(Error::Config("s_max must be at least 1".into()));
        }
        // Joint states are keyed by a u128 mixed-radix code.
        if (arms as f64) * (s_max as f64).log2() > 127.0 {
            return Err(Error::Config(format!(
                "{s_max}^{arms} joint states cannot be indexed"
            )));
        }
        if arms.saturating_mul(s_max) > MAX_TABLE_CELLS {
            return Err(Error::Config(format!(
                "{arms} arms x {s_max} states exceeds {MAX_TABLE_CELLS} reward cells"
            )));
        }
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least one round".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Config(format!("gamma {gamma} outside (0, 1]")));
        }
        if best_arms > arms {
            return Err(Error::Config(format!(
                "best_arms {best_arms} exceeds the arm count {arms}"
            )));
        }
        match shape {
            RewardShape::SmallScale => {}
            RewardShape::MonotoneIncreasing | RewardShape::IncreasingThenDecreasing => {
                if v_best.is_none() {
                    return Err(Error::Config(format!("{} requires v_best", shape.as_str())));
                }
                if best_arms < arms && v_sub_best.is_none() {
                    return Err(Error::Config(
                        "sub-best arms present but v_sub_best is missing".into(),
                    ));
                }
                if shape == RewardShape::IncreasingThenDecreasing && s_max < 2 {
                    return Err(Error::Config(
                        "increasing-then-decreasing rewards need s_max >= 2".into(),
                    ));
                }
            }
        }
        let initial_state = match initial_state {
            Some(s) => {
                if s.arms() != arms {
                    return Err(Error::Config(format!(
                        "initial state has {} entries for {arms} arms",
                        s.arms()
                    )));
                }
                StateVector::new(s.0, s_max)?
            }
            None => StateVector::uniform(arms, s_max),
        };

        let mut exact_means = Vec::with_capacity(arms * s_max);
        for arm in 0..arms {
            for s in 1..=s_max {
                let v = if arm < best_arms { v_best } else { v_sub_best };
                let mean = mean_for(shape, arm, s, s_max, v).ok_or_else(|| {
                    Error::Config(format!("mean reward of arm {arm} at state {s} overflows"))
                })?;
                exact_means.push(mean);
            }
        }
        let means: Vec<f64> = exact_means.iter().map(ratio_to_f64).collect();
        if distribution == RewardDistribution::Bernoulli {
            if let Some(pos) = exact_means
                .iter()
                .position(|m| *m < Rational64::from_integer(0) || *m > Rational64::from_integer(1))
            {
                return Err(Error::Config(format!(
                    "Bernoulli mean {} for arm {} at state {} lies outside [0, 1]",
                    exact_means[pos],
                    pos / s_max,
                    pos % s_max + 1
                )));
            }
        }

        Ok(Scenario {
            name,
            arms,
            s_max,
            horizon,
            gamma,
            distribution,
            shape,
            best_arms,
            v_best,
            v_sub_best,
            initial_state,
            exact_means,
            means,
        })
    }
}

fn mean_for(
    shape: RewardShape,
    arm: usize,
    s: usize,
    s_max: usize,
    increment: Option<Rational64>,
) -> Option<Rational64> {
    let base = Rational64::new(1, 10);
    let steps = |n: usize| -> Option<Rational64> {
        increment
            .unwrap_or_default()
            .checked_mul(&Rational64::from_integer(i64::try_from(n).ok()?))
    };
    match shape {
        RewardShape::SmallScale => Some(if arm != 0 {
            Rational64::new(2, 10)
        } else if s == s_max {
            Rational64::new(3, 10)
        } else {
            base
        }),
        RewardShape::MonotoneIncreasing => base.checked_add(&steps(s - 1)?),
        RewardShape::IncreasingThenDecreasing => {
            if s < s_max {
                base.checked_add(&steps(s - 1)?)
            } else {
                // One step down from the peak at s_max - 1.
                base.checked_add(&steps(s_max - 2)?)?
                    .checked_sub(&increment.unwrap_or_default())
            }
        }
    }
}

pub(crate) fn ratio_to_f64(r: &Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn arms(&self) -> usize {
        self.arms
    }
    pub fn s_max(&self) -> usize {
        self.s_max
    }
    pub fn horizon(&self) -> u64 {
        self.horizon
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn distribution(&self) -> RewardDistribution {
        self.distribution
    }
    pub fn shape(&self) -> RewardShape {
        self.shape
    }
    pub fn best_arms(&self) -> usize {
        self.best_arms
    }
    pub fn v_best(&self) -> Option<Rational64> {
        self.v_best
    }
    pub fn v_sub_best(&self) -> Option<Rational64> {
        self.v_sub_best
    }
    pub fn initial_state(&self) -> &StateVector {
        &self.initial_state
    }

    /// Number of joint `(state, arm)` pairs, `s_max^K * K`, as a float so it
    /// never overflows.
    pub fn joint_cardinality(&self) -> f64 {
        (self.s_max as f64).powi(self.arms as i32) * self.arms as f64
    }

    pub fn with_horizon(mut self, horizon: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least one round".into()));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Config(format!("gamma {gamma} outside (0, 1]")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    fn check(&self, arm: usize, s: usize) -> Result<()> {
        if arm >= self.arms {
            return Err(Error::Domain(format!(
                "arm {arm} out of range for {} arms",
                self.arms
            )));
        }
        if s == 0 || s > self.s_max {
            return Err(Error::Domain(format!(
                "state {s} outside [1, {}]",
                self.s_max
            )));
        }
        Ok(())
    }

    pub fn expected_reward_exact(&self, arm: usize, s: usize) -> Result<Rational64> {
        self.check(arm, s)?;
        Ok(self.exact_means[arm * self.s_max + s - 1])
    }

    pub fn expected_reward(&self, arm: usize, s: usize) -> Result<f64> {
        self.check(arm, s)?;
        Ok(self.mean(arm, s))
    }

    /// Unchecked lookup for simulation loops.
    #[inline]
    pub fn mean(&self, arm: usize, s: usize) -> f64 {
        self.means[arm * self.s_max + s - 1]
    }

    #[inline]
    pub fn mean_exact(&self, arm: usize, s: usize) -> Rational64 {
        self.exact_means[arm * self.s_max + s - 1]
    }

    /// Draws a reward for pulling `arm` at state `s`.
    ///
    /// Consumes exactly one value from `rng`: a uniform `f64` for Bernoulli
    /// rewards or a standard-normal deviate for Gaussian ones.
    pub fn sample_reward<R: Rng + ?Sized>(
        &self,
        arm: usize,
        s: usize,
        rng: &mut R,
    ) -> Result<RewardSample> {
        self.check(arm, s)?;
        Ok(self.draw(arm, s, rng))
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, arm: usize, s: usize, rng: &mut R) -> RewardSample {
        let expected = self.mean(arm, s);
        let value = match self.distribution {
            RewardDistribution::Bernoulli => {
                if rng.random::<f64>() < expected {
                    1.0
                } else {
                    0.0
                }
            }
            RewardDistribution::Normal => {
                let z: f64 = rng.sample(StandardNormal);
                expected + NORMAL_VARIANCE.sqrt() * z
            }
        };
        RewardSample { value, expected }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("serialize scenario", e))
    }

    /// Parses and validates a JSON scenario document.
    pub fn from_json_str(text: &str) -> Result<Scenario> {
        serde_json::from_str(text).map_err(|e| Error::json("scenario JSON", e))
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Scenario> {
        serde_json::from_slice(bytes).map_err(|e| Error::json("scenario JSON", e))
    }
}

/// Named scenarios from the benchmark table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "small3")]
    Small3,
    #[serde(rename = "6-hetero")]
    SixHetero,
    #[serde(rename = "6-homo")]
    SixHomo,
    #[serde(rename = "10-hetero")]
    TenHetero,
    #[serde(rename = "10-homo")]
    TenHomo,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Small3,
        Preset::SixHetero,
        Preset::SixHomo,
        Preset::TenHetero,
        Preset::TenHomo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Small3 => "small3",
            Preset::SixHetero => "6-hetero",
            Preset::SixHomo => "6-homo",
            Preset::TenHetero => "10-hetero",
            Preset::TenHomo => "10-homo",
        }
    }

    /// `(K, s_max, K_best)`.
    pub fn dimensions(self) -> (usize, usize, usize) {
        match self {
            Preset::Small3 => (3, 3, 3),
            Preset::SixHetero => (6, 3, 3),
            Preset::SixHomo => (6, 6, 6),
            Preset::TenHetero => (10, 5, 5),
            Preset::TenHomo => (10, 10, 10),
        }
    }

    pub fn default_horizon(self) -> u64 {
        match self {
            Preset::Small3 | Preset::SixHetero | Preset::SixHomo => 100_000,
            Preset::TenHetero | Preset::TenHomo => 1_000_000,
        }
    }

    pub fn default_shape(self) -> RewardShape {
        match self {
            Preset::Small3 => RewardShape::SmallScale,
            _ => RewardShape::MonotoneIncreasing,
        }
    }

    /// `(V_best, V_sub_best)` for the given shape.
    pub fn increments(self, shape: RewardShape) -> (Option<Rational64>, Option<Rational64>) {
        let r = |n, d| Some(Rational64::new(n, d));
        let incdec = shape == RewardShape::IncreasingThenDecreasing;
        match (self, incdec) {
            (Preset::Small3, _) => (None, None),
            (Preset::SixHetero, false) => (r(1, 4), r(1, 5)),
            (Preset::SixHetero, true) => (r(1, 2), r(2, 5)),
            (Preset::SixHomo, false) => (r(1, 10), None),
            (Preset::SixHomo, true) => (r(1, 8), None),
            (Preset::TenHetero, false) => (r(1, 8), r(1, 10)),
            (Preset::TenHetero, true) => (r(1, 6), r(2, 15)),
            (Preset::TenHomo, false) => (r(1, 18), None),
            (Preset::TenHomo, true) => (r(1, 16), None),
        }
    }

    /// Builds the scenario. `horizon` overrides the table's `T`; the discount
    /// is `1 - 1/T` when discounted and exactly 1 otherwise.
    pub fn scenario(
        self,
        shape: Option<RewardShape>,
        distribution: RewardDistribution,
        horizon: Option<u64>,
        gamma_mode: GammaMode,
    ) -> Result<Scenario> {
        let shape = shape.unwrap_or(self.default_shape());
        let small = self == Preset::Small3;
        if small != (shape == RewardShape::SmallScale) {
            return Err(Error::Config(format!(
                "preset {} does not support the {} shape",
                self.as_str(),
                shape.as_str()
            )));
        }
        let (arms, s_max, best_arms) = self.dimensions();
        let (v_best, v_sub_best) = self.increments(shape);
        let horizon = horizon.unwrap_or(self.default_horizon());
        let name = if small {
            format!("{}-{}", self.as_str(), distribution.as_str())
        } else {
            format!(
                "{}-{}-{}",
                self.as_str(),
                shape.short(),
                distribution.as_str()
            )
        };
        ScenarioBuilder {
            name,
            arms,
            s_max,
            horizon,
            gamma: gamma_mode.gamma_for(horizon),
            distribution,
            shape,
            best_arms,
            v_best,
            v_sub_best,
            initial_state: None,
        }
        .build()
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario preset '{s}'")))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaMode {
    /// `gamma = 1 - 1/T`.
    #[default]
    Discounted,
    /// `gamma = 1`.
    Undiscounted,
}

impl GammaMode {
    pub fn gamma_for(self, horizon: u64) -> f64 {
        match self {
            GammaMode::Discounted if horizon > 1 => 1.0 - 1.0 / horizon as f64,
            // T = 1 would give gamma = 0; the discount is irrelevant then.
            GammaMode::Discounted => 1.0,
            GammaMode::Undiscounted => 1.0,
        }
    }
}

impl FromStr for GammaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discounted" => Ok(GammaMode::Discounted),
            "undiscounted" => Ok(GammaMode::Undiscounted),
            other => Err(Error::Config(format!("unknown gamma mode '{other}'"))),
        }
    }
}

/// One round of an episode: the pulled arm, its state when pulled, and the
/// mean reward of that pull.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub arm: u32,
    pub state: u32,
    pub expected: f64,
}

/// Per-round record of an episode, shared by every agent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeTrace {
    pub steps: Vec<Step>,
}

impl EpisodeTrace {
    pub fn with_capacity(rounds: usize) -> Self {
        EpisodeTrace {
            steps: Vec::with_capacity(rounds),
        }
    }

    #[inline]
    pub fn push(&mut self, arm: usize, state: usize, expected: f64) {
        self.steps.push(Step {
            arm: arm as u32,
            state: state as u32,
            expected,
        });
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn arms(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.arm as usize)
    }

    pub fn expected_rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.expected)
    }
}
