//! State-separated SARSA.
//!
//! For every arm `k` the agent keeps a table `Q_k(s_k, s_a, a)` that only looks
//! at arm `k`'s own counter and the pulled arm's counter. The joint action
//! value is recovered as the mean over `k`:
//!
//! ```text
//! Q(s, a) = (1/K) * sum_k Q_k(s_k, s_a, a)
//! ```
//!
//! Each round applies the SARSA update to all `K` separated tables with a
//! learning rate that depends on the round only. Because that rate is shared,
//! the mean of the `K` updates is exactly a SARSA update of the aggregated
//! `Q(s, a)`, while storage stays at `s_max^2 * K^2` cells instead of
//! `s_max^K * K`.
//!
//! The loop, exploration policy, learning-rate schedule and visit counter in
//! this module are shared with the tabular baselines.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EpisodeTrace, Scenario, StateVector, Step};
use crate::error::{Error, Result};

/// The `K x K x s_max x s_max` separated action-value tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsqTable {
    arms: usize,
    s_max: usize,
    /// Row-major over `(k, a, s_k, s_a)`.
    values: Vec<f64>,
}

impl SsqTable {
    pub fn new(arms: usize, s_max: usize) -> Self {
        SsqTable {
            arms,
            s_max,
            values: vec![0.0; arms * arms * s_max * s_max],
        }
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    /// Number of stored cells, always `s_max^2 * K^2`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    fn index(&self, k: usize, a: usize, s_k: usize, s_a: usize) -> usize {
        ((k * self.arms + a) * self.s_max + (s_k - 1)) * self.s_max + (s_a - 1)
    }

    #[inline]
    pub fn get(&self, k: usize, a: usize, s_k: usize, s_a: usize) -> f64 {
        self.values[self.index(k, a, s_k, s_a)]
    }

    pub fn set(&mut self, k: usize, a: usize, s_k: usize, s_a: usize, value: f64) {
        let i = self.index(k, a, s_k, s_a);
        self.values[i] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Mean over `k` of `Q_k(s_k, s_a, a)`.
    #[inline]
    pub fn aggregate_q(&self, s: &StateVector, a: usize) -> f64 {
        let s_a = s.get(a);
        let sum: f64 = (0..self.arms).map(|k| self.get(k, a, s.get(k), s_a)).sum();
        sum / self.arms as f64
    }

    /// Applies the SARSA update to all `K` separated tables.
    ///
    /// `next` is the successor state and the arm the policy picked there; `None`
    /// at the end of a finite episode, where the bootstrap target is 0. Each
    /// table's target is read before that table's cell is written, so a target
    /// that coincides with the updated cell contributes its old value.
    #[inline]
    pub fn ss_update(
        &mut self,
        s: &StateVector,
        a: usize,
        reward: f64,
        next: Option<(&StateVector, usize)>,
        alpha: f64,
        gamma: f64,
    ) {
        let s_a = s.get(a);
        for k in 0..self.arms {
            let target = match next {
                Some((s_next, a_next)) => {
                    self.values[self.index(k, a_next, s_next.get(k), s_next.get(a_next))]
                }
                None => 0.0,
            };
            let i = self.index(k, a, s.get(k), s_a);
            let old = self.values[i];
            self.values[i] = old + alpha * (reward + gamma * target - old);
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::json("serialize SS-Q table", e))
    }
}

/// Anything that can be trained by the shared on-policy TD loop.
pub trait TdLearner {
    fn arms(&self) -> usize;

    /// Current estimate of the joint action value.
    fn value(&self, s: &StateVector, arm: usize) -> f64;

    /// One temporal-difference update for the transition `(s, a, r, next)`.
    fn learn(
        &mut self,
        s: &StateVector,
        a: usize,
        reward: f64,
        next: Option<(&StateVector, usize)>,
        alpha: f64,
        gamma: f64,
    );

    /// Arm with the largest estimate; ties go to the lowest index.
    fn greedy(&self, s: &StateVector) -> usize {
        argmax((0..self.arms()).map(|a| self.value(s, a)))
    }
}

impl TdLearner for SsqTable {
    fn arms(&self) -> usize {
        self.arms
    }

    fn value(&self, s: &StateVector, arm: usize) -> f64 {
        self.aggregate_q(s, arm)
    }

    fn learn(
        &mut self,
        s: &StateVector,
        a: usize,
        reward: f64,
        next: Option<(&StateVector, usize)>,
        alpha: f64,
        gamma: f64,
    ) {
        self.ss_update(s, a, reward, next, alpha, gamma);
    }
}

/// Index of the first maximum.
pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

/// Robbins-Monro learning rate `alpha_t = 1 / (t + t0)` over the global round
/// index `t >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningSchedule {
    pub t0: u64,
}

impl LearningSchedule {
    pub fn new(t0: u64) -> Self {
        LearningSchedule { t0 }
    }

    #[inline]
    pub fn alpha(&self, t: u64) -> f64 {
        1.0 / (t + self.t0) as f64
    }
}

impl Default for LearningSchedule {
    fn default() -> Self {
        LearningSchedule { t0: 5000 }
    }
}

/// Length of the uniform exploration phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationPlan {
    pub rounds: u64,
}

impl ExplorationPlan {
    /// `E = floor(fraction * T)`.
    pub fn from_fraction(fraction: f64, horizon: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Config(format!(
                "exploration fraction {fraction} outside [0, 1]"
            )));
        }
        Ok(ExplorationPlan {
            rounds: (fraction * horizon as f64).floor() as u64,
        })
    }
}

/// How the behaviour policy explores.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exploration {
    /// Least-visited arm for the current joint state during the first
    /// `plan.rounds` rounds, greedy afterwards.
    UniformFirst(ExplorationPlan),
    /// Epsilon-greedy with `epsilon_t = min(1, scale / t)`, which is greedy in
    /// the limit while still trying every arm infinitely often.
    Glie { scale: f64 },
}

/// Pull counts `v_t(s, a)` for visited joint states.
#[derive(Clone, Debug, Default)]
pub struct VisitCounter {
    arms: usize,
    s_max: usize,
    counts: HashMap<u128, Vec<u64>>,
    total: u64,
}

impl VisitCounter {
    pub fn new(arms: usize, s_max: usize) -> Self {
        VisitCounter {
            arms,
            s_max,
            counts: HashMap::new(),
            total: 0,
        }
    }

    pub fn count(&self, s: &StateVector, a: usize) -> u64 {
        self.counts
            .get(&s.encode(self.s_max))
            .map_or(0, |row| row[a])
    }

    pub fn record(&mut self, s: &StateVector, a: usize) {
        let arms = self.arms;
        self.counts
            .entry(s.encode(self.s_max))
            .or_insert_with(|| vec![0; arms])[a] += 1;
        self.total += 1;
    }

    /// Arm with the fewest pulls at `s`; ties go to the lowest index.
    pub fn least_visited(&self, s: &StateVector) -> usize {
        match self.counts.get(&s.encode(self.s_max)) {
            None => 0,
            Some(row) => row
                .iter()
                .enumerate()
                .min_by_key(|&(i, &c)| (c, i))
                .map_or(0, |(i, _)| i),
        }
    }

    /// Counts for every arm at `s` (zeros if never visited).
    pub fn row(&self, s: &StateVector) -> Vec<u64> {
        self.counts
            .get(&s.encode(self.s_max))
            .cloned()
            .unwrap_or_else(|| vec![0; self.arms])
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct_states(&self) -> usize {
        self.counts.len()
    }

    pub fn states(&self) -> impl Iterator<Item = (StateVector, &[u64])> + '_ {
        self.counts.iter().map(|(&code, row)| {
            (
                StateVector::decode(code, self.arms, self.s_max),
                row.as_slice(),
            )
        })
    }
}

/// Behaviour policy plus the visit counts it maintains.
#[derive(Clone, Debug)]
pub struct Policy {
    exploration: Exploration,
    visits: VisitCounter,
}

impl Policy {
    pub fn new(exploration: Exploration, arms: usize, s_max: usize) -> Self {
        Policy {
            exploration,
            visits: VisitCounter::new(arms, s_max),
        }
    }

    pub fn visits(&self) -> &VisitCounter {
        &self.visits
    }

    pub fn visits_mut(&mut self) -> &mut VisitCounter {
        &mut self.visits
    }

    pub fn into_visits(self) -> VisitCounter {
        self.visits
    }

    /// Chooses the arm for round `t` at state `s` and records the visit.
    ///
    /// Uniform-first exploration draws nothing from `rng`. The GLIE policy
    /// draws one uniform per round plus one arm index when it explores.
    pub fn select<L: TdLearner + ?Sized, R: Rng + ?Sized>(
        &mut self,
        learner: &L,
        s: &StateVector,
        t: u64,
        rng: &mut R,
    ) -> usize {
        let arm = match self.exploration {
            Exploration::UniformFirst(plan) => {
                if t <= plan.rounds {
                    self.visits.least_visited(s)
                } else {
                    learner.greedy(s)
                }
            }
            Exploration::Glie { scale } => {
                let epsilon = (scale / t as f64).min(1.0);
                if rng.random::<f64>() < epsilon {
                    rng.random_range(0..learner.arms())
                } else {
                    learner.greedy(s)
                }
            }
        };
        self.visits.record(s, arm);
        arm
    }
}

/// Hyperparameters shared by every TD agent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdConfig {
    pub schedule: LearningSchedule,
    pub exploration: Exploration,
    /// Discount used in the update target.
    pub gamma: f64,
}

impl TdConfig {
    /// Uniform-first exploration over `fraction * T` rounds with the given `t0`.
    pub fn uniform_first(scn: &Scenario, t0: u64, fraction: f64, gamma: f64) -> Result<Self> {
        Ok(TdConfig {
            schedule: LearningSchedule::new(t0),
            exploration: Exploration::UniformFirst(ExplorationPlan::from_fraction(
                fraction,
                scn.horizon(),
            )?),
            gamma,
        })
    }
}

/// Step-by-step driver of the on-policy TD loop.
///
/// Round `t` pulls the arm chosen at the end of round `t - 1`, samples its
/// reward from `env_rng`, advances the state, lets the policy pick the next
/// arm, and applies the learner's update with `alpha_t`. The final round of
/// the horizon bootstraps from 0.
pub struct TdEpisode<'a, L> {
    scn: &'a Scenario,
    learner: L,
    policy: Policy,
    config: TdConfig,
    state: StateVector,
    next_state: StateVector,
    arm: Option<usize>,
    round: u64,
}

impl<'a, L: TdLearner> TdEpisode<'a, L> {
    pub fn new(scn: &'a Scenario, learner: L, config: TdConfig) -> Self {
        let policy = Policy::new(config.exploration, scn.arms(), scn.s_max());
        TdEpisode {
            scn,
            learner,
            policy,
            config,
            state: scn.initial_state().clone(),
            next_state: scn.initial_state().clone(),
            arm: None,
            round: 0,
        }
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn learner(&self) -> &L {
        &self.learner
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    /// Plays one round; `None` once the horizon is exhausted.
    pub fn step<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        env_rng: &mut R1,
        agent_rng: &mut R2,
    ) -> Option<Step> {
        let horizon = self.scn.horizon();
        if self.round >= horizon {
            return None;
        }
        let t = self.round + 1;
        let a = match self.arm {
            Some(a) => a,
            None => self.policy.select(&self.learner, &self.state, t, agent_rng),
        };
        let s_a = self.state.get(a);
        let reward = self.scn.draw(a, s_a, env_rng);

        self.next_state.clone_from(&self.state);
        self.next_state.advance(a, self.scn.s_max());
        let alpha = self.config.schedule.alpha(t);
        if t < horizon {
            let a_next = self
                .policy
                .select(&self.learner, &self.next_state, t + 1, agent_rng);
            self.learner.learn(
                &self.state,
                a,
                reward.value,
                Some((&self.next_state, a_next)),
                alpha,
                self.config.gamma,
            );
            self.arm = Some(a_next);
        } else {
            self.learner
                .learn(&self.state, a, reward.value, None, alpha, self.config.gamma);
            self.arm = None;
        }
        std::mem::swap(&mut self.state, &mut self.next_state);
        self.round = t;
        Some(Step {
            arm: a as u32,
            state: s_a as u32,
            expected: reward.expected,
        })
    }

    /// Runs the remaining rounds, appending them to `trace`.
    pub fn run_to_end<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        trace: &mut EpisodeTrace,
        env_rng: &mut R1,
        agent_rng: &mut R2,
    ) {
        while let Some(step) = self.step(env_rng, agent_rng) {
            trace.steps.push(step);
        }
    }

    pub fn into_parts(self) -> (L, Policy) {
        (self.learner, self.policy)
    }
}

/// Outcome of one SS-SARSA episode.
#[derive(Clone, Debug)]
pub struct SsSarsaRun {
    pub trace: EpisodeTrace,
    pub table: SsqTable,
    pub visits: VisitCounter,
}

/// Runs state-separated SARSA for the scenario's full horizon.
pub fn run_episode<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    scn: &Scenario,
    config: &TdConfig,
    env_rng: &mut R1,
    agent_rng: &mut R2,
) -> SsSarsaRun {
    let table = SsqTable::new(scn.arms(), scn.s_max());
    let mut episode = TdEpisode::new(scn, table, *config);
    let mut trace = EpisodeTrace::with_capacity(scn.horizon() as usize);
    episode.run_to_end(&mut trace, env_rng, agent_rng);
    let (table, policy) = episode.into_parts();
    SsSarsaRun {
        trace,
        table,
        visits: policy.into_visits(),
    }
}
