//! Joint-state tabular baselines.
//!
//! Q-learning and SARSA over the full `s_max^K` joint state space, driven by
//! the same loop, exploration policy and learning-rate schedule as
//! state-separated SARSA so that only the value representation differs.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EpisodeTrace, Scenario, StateVector};
use crate::error::{Error, Result};
use crate::sssarsa::{TdConfig, TdEpisode, TdLearner, VisitCounter};

/// Default cap on `s_max^K * K` joint keys.
pub const DEFAULT_MAX_JOINT_KEYS: u64 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TabularKind {
    QLearning,
    Sarsa,
}

/// Lazily materialised `Q(s, a)` over joint states; missing entries are 0.
#[derive(Clone, Debug)]
pub struct JointQTable {
    arms: usize,
    s_max: usize,
    kind: TabularKind,
    values: HashMap<u128, Vec<f64>>,
}

impl JointQTable {
    pub fn new(arms: usize, s_max: usize, kind: TabularKind) -> Self {
        JointQTable {
            arms,
            s_max,
            kind,
            values: HashMap::new(),
        }
    }

    pub fn kind(&self) -> TabularKind {
        self.kind
    }

    pub fn q(&self, s: &StateVector, a: usize) -> f64 {
        self.values
            .get(&s.encode(self.s_max))
            .map_or(0.0, |row| row[a])
    }

    pub fn set(&mut self, s: &StateVector, a: usize, value: f64) {
        *self.cell(s, a) = value;
    }

    fn cell(&mut self, s: &StateVector, a: usize) -> &mut f64 {
        let arms = self.arms;
        &mut self
            .values
            .entry(s.encode(self.s_max))
            .or_insert_with(|| vec![0.0; arms])[a]
    }

    fn max_q(&self, s: &StateVector) -> f64 {
        match self.values.get(&s.encode(self.s_max)) {
            Some(row) => row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            None => 0.0,
        }
    }

    /// Joint states with at least one materialised entry.
    pub fn materialized_states(&self) -> usize {
        self.values.len()
    }

    /// `Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))`.
    pub fn q_learning_update(
        &mut self,
        s: &StateVector,
        a: usize,
        reward: f64,
        next: Option<&StateVector>,
        alpha: f64,
        gamma: f64,
    ) {
        let target = next.map_or(0.0, |n| self.max_q(n));
        let cell = self.cell(s, a);
        *cell += alpha * (reward + gamma * target - *cell);
    }

    /// `Q(s,a) += alpha * (r + gamma * Q(s',a') - Q(s,a))`.
    pub fn sarsa_update(
        &mut self,
        s: &StateVector,
        a: usize,
        reward: f64,
        next: Option<(&StateVector, usize)>,
        alpha: f64,
        gamma: f64,
    ) {
        let target = next.map_or(0.0, |(n, a_next)| self.q(n, a_next));
        let cell = self.cell(s, a);
        *cell += alpha * (reward + gamma * target - *cell);
    }
}

impl TdLearner for JointQTable {
    fn arms(&self) -> usize {
        self.arms
    }

    fn value(&self, s: &StateVector, arm: usize) -> f64 {
        self.q(s, arm)
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
        match self.kind {
            TabularKind::QLearning => {
                self.q_learning_update(s, a, reward, next.map(|(n, _)| n), alpha, gamma)
            }
            TabularKind::Sarsa => self.sarsa_update(s, a, reward, next, alpha, gamma),
        }
    }

    fn greedy(&self, s: &StateVector) -> usize {
        match self.values.get(&s.encode(self.s_max)) {
            Some(row) => crate::sssarsa::argmax(row.iter().copied()),
            None => 0,
        }
    }
}

/// Refuses scenarios whose joint table could exceed `cap` keys.
pub fn check_joint_capacity(scn: &Scenario, cap: u64) -> Result<()> {
    let required = scn.joint_cardinality();
    if required > cap as f64 {
        return Err(Error::StateSpace { required, cap });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct BaselineRun {
    pub trace: EpisodeTrace,
    pub table: JointQTable,
    pub visits: VisitCounter,
}

/// Runs joint-state Q-learning or SARSA for the full horizon.
///
/// Rewards are drawn from `env_rng` exactly as in state-separated SARSA, so
/// identical pull sequences see identical noise.
pub fn run_episode_baseline<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    scn: &Scenario,
    kind: TabularKind,
    config: &TdConfig,
    max_joint_keys: u64,
    env_rng: &mut R1,
    agent_rng: &mut R2,
) -> Result<BaselineRun> {
    check_joint_capacity(scn, max_joint_keys)?;
    let table = JointQTable::new(scn.arms(), scn.s_max(), kind);
    let mut episode = TdEpisode::new(scn, table, *config);
    let mut trace = EpisodeTrace::with_capacity(scn.horizon() as usize);
    episode.run_to_end(&mut trace, env_rng, agent_rng);
    let (table, policy) = episode.into_parts();
    Ok(BaselineRun {
        trace,
        table,
        visits: policy.into_visits(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{GammaMode, Preset, RewardDistribution, ScenarioBuilder};
    use crate::rng::{agent_rng, env_rng};
    use crate::sssarsa::{self, SsqTable};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sv(v: &[usize], s_max: usize) -> StateVector {
        StateVector::new(v.to_vec(), s_max).unwrap()
    }

    #[test]
    fn q_learning_examples() {
        let s = sv(&[2, 2], 2);
        let n = s.transition(0, 2).unwrap();
        let mut t = JointQTable::new(2, 2, TabularKind::QLearning);
        t.q_learning_update(&s, 0, 1.0, Some(&n), 1.0, 0.7);
        assert_eq!(t.q(&s, 0), 1.0);

        let mut t = JointQTable::new(2, 2, TabularKind::QLearning);
        t.set(&n, 0, 0.2);
        t.set(&n, 1, 0.7);
        t.q_learning_update(&s, 1, 0.0, Some(&n), 0.5, 1.0);
        assert!((t.q(&s, 1) - 0.35).abs() < 1e-15);
    }

    #[test]
    fn zero_discount_is_weighted_reward_average() {
        let s = sv(&[1], 1);
        let mut t = JointQTable::new(1, 1, TabularKind::QLearning);
        let mut expected = 0.0;
        for (i, r) in [1.0, 0.0, 0.5, 2.0].into_iter().enumerate() {
            let alpha = 1.0 / (i + 1) as f64;
            t.q_learning_update(&s, 0, r, Some(&s), alpha, 0.0);
            expected += alpha * (r - expected);
        }
        assert!((t.q(&s, 0) - expected).abs() < 1e-15);
        assert!((expected - 0.875).abs() < 1e-15);
    }

    #[test]
    fn sarsa_examples() {
        let s = sv(&[2, 2], 2);
        let n = s.transition(0, 2).unwrap();
        let mut t = JointQTable::new(2, 2, TabularKind::Sarsa);
        t.sarsa_update(&s, 0, 1.0, Some((&n, 1)), 0.5, 0.9);
        assert_eq!(t.q(&s, 0), 0.5);
    }

    #[test]
    fn sarsa_equals_q_learning_on_greedy_next_arm() {
        let s = sv(&[3, 1, 2], 3);
        let n = s.transition(2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut q = JointQTable::new(3, 3, TabularKind::QLearning);
        for a in 0..3 {
            q.set(&s, a, rng.random());
            q.set(&n, a, rng.random());
        }
        let mut sarsa = q.clone();
        let greedy = q.greedy(&n);
        q.q_learning_update(&s, 2, 0.3, Some(&n), 0.2, 0.95);
        sarsa.sarsa_update(&s, 2, 0.3, Some((&n, greedy)), 0.2, 0.95);
        assert_eq!(q.q(&s, 2), sarsa.q(&s, 2));
    }

    #[test]
    fn guard_refuses_huge_joint_spaces() {
        let homo = Preset::TenHomo
            .scenario(
                None,
                RewardDistribution::Bernoulli,
                Some(100),
                GammaMode::Discounted,
            )
            .unwrap();
        let cfg = TdConfig::uniform_first(&homo, 5000, 0.1, homo.gamma()).unwrap();
        let err = run_episode_baseline(
            &homo,
            TabularKind::Sarsa,
            &cfg,
            DEFAULT_MAX_JOINT_KEYS,
            &mut env_rng(0),
            &mut agent_rng(0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::StateSpace { .. }), "{err}");

        let small = Preset::Small3
            .scenario(
                None,
                RewardDistribution::Bernoulli,
                Some(100),
                GammaMode::Discounted,
            )
            .unwrap();
        assert_eq!(small.joint_cardinality(), 81.0);
        assert!(check_joint_capacity(&small, DEFAULT_MAX_JOINT_KEYS).is_ok());
    }

    #[test]
    fn single_arm_matches_state_separated_sarsa() {
        let mut b = ScenarioBuilder::small_scale("one", 1, 4, 3000);
        b.distribution = RewardDistribution::Normal;
        let scn = b.build().unwrap();
        let cfg = TdConfig::uniform_first(&scn, 50, 0.1, 0.95).unwrap();
        let ss = sssarsa::run_episode(&scn, &cfg, &mut env_rng(11), &mut agent_rng(11));
        let tab = run_episode_baseline(
            &scn,
            TabularKind::Sarsa,
            &cfg,
            DEFAULT_MAX_JOINT_KEYS,
            &mut env_rng(11),
            &mut agent_rng(11),
        )
        .unwrap();
        assert_eq!(ss.trace, tab.trace);
        for s in 1..=4 {
            let state = sv(&[s], 4);
            assert_eq!(ss.table.aggregate_q(&state, 0), tab.table.q(&state, 0));
        }
    }

    #[test]
    fn materializes_only_visited_states() {
        let scn = Preset::SixHetero
            .scenario(
                None,
                RewardDistribution::Bernoulli,
                Some(500),
                GammaMode::Discounted,
            )
            .unwrap();
        let cfg = TdConfig::uniform_first(&scn, 5000, 0.1, scn.gamma()).unwrap();
        let run = run_episode_baseline(
            &scn,
            TabularKind::QLearning,
            &cfg,
            DEFAULT_MAX_JOINT_KEYS,
            &mut env_rng(3),
            &mut agent_rng(3),
        )
        .unwrap();
        assert!(run.table.materialized_states() <= 500);
        assert!(run.table.materialized_states() <= run.visits.distinct_states());
        assert_eq!(run.visits.total(), 500);
    }

    proptest! {
        /// The separated update, averaged, equals this module's SARSA update
        /// applied to a joint table holding the aggregated values.
        #[test]
        fn separated_update_matches_joint_sarsa(
            seed in any::<u64>(),
            arms in 1usize..5,
            s_max in 1usize..4,
            alpha in 0.0f64..=1.0,
            gamma in 0.0f64..=1.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ss = SsqTable::new(arms, s_max);
            ss.values_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            let s = StateVector::new((0..arms).map(|_| rng.random_range(1..=s_max)).collect(), s_max).unwrap();
            let a = rng.random_range(0..arms);
            let a_next = rng.random_range(0..arms);
            let n = s.transition(a, s_max).unwrap();
            let r: f64 = rng.random();

            let mut joint = JointQTable::new(arms, s_max, TabularKind::Sarsa);
            joint.set(&s, a, ss.aggregate_q(&s, a));
            joint.set(&n, a_next, ss.aggregate_q(&n, a_next));
            joint.sarsa_update(&s, a, r, Some((&n, a_next)), alpha, gamma);
            ss.ss_update(&s, a, r, Some((&n, a_next)), alpha, gamma);
            prop_assert!((joint.q(&s, a) - ss.aggregate_q(&s, a)).abs() <= 1e-12);
        }
    }
}
