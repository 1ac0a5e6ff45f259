//! Exact references: value iteration on the joint MDP, closed-form optimal
//! policies, the state distribution of a uniformly random policy, and the
//! Q-error diagnostic.

use std::collections::{HashMap, VecDeque};

use num_rational::Rational64;
use rand::Rng;
use serde::Serialize;

use crate::env::{RewardShape, Scenario, StateVector};
use crate::error::{Error, Result};
use crate::tabular::{check_joint_capacity, DEFAULT_MAX_JOINT_KEYS};

pub const DEFAULT_EPSILON: f64 = 1e-10;

/// Joint states reachable from the scenario's initial state, in BFS order.
pub fn reachable_states(scn: &Scenario, cap: u64) -> Result<Vec<StateVector>> {
    check_joint_capacity(scn, cap)?;
    let s_max = scn.s_max();
    let mut seen = HashMap::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    let start = scn.initial_state().clone();
    seen.insert(start.encode(s_max), 0usize);
    queue.push_back(start);
    while let Some(s) = queue.pop_front() {
        for a in 0..scn.arms() {
            let n = s.transition(a, s_max)?;
            let code = n.encode(s_max);
            if !seen.contains_key(&code) {
                seen.insert(code, seen.len());
                queue.push_back(n);
            }
        }
        order.push(s);
    }
    Ok(order)
}

/// Optimal action values on the reachable set.
#[derive(Clone, Debug)]
pub struct ExactQ {
    arms: usize,
    s_max: usize,
    gamma: f64,
    states: Vec<StateVector>,
    index: HashMap<u128, usize>,
    next: Vec<usize>,
    rewards: Vec<f64>,
    q: Vec<f64>,
    iterations: u64,
}

impl ExactQ {
    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    fn idx(&self, s: &StateVector) -> Option<usize> {
        self.index.get(&s.encode(self.s_max)).copied()
    }

    pub fn contains(&self, s: &StateVector) -> bool {
        self.idx(s).is_some()
    }

    /// `Q*(s, a)`, or `None` when `s` is not reachable.
    pub fn q(&self, s: &StateVector, a: usize) -> Option<f64> {
        self.idx(s).map(|i| self.q[i * self.arms + a])
    }

    /// Greedy action at `s`, lowest index on ties.
    pub fn policy(&self, s: &StateVector) -> Option<usize> {
        self.idx(s).map(|i| self.greedy_at(i))
    }

    fn greedy_at(&self, i: usize) -> usize {
        crate::sssarsa::argmax(self.q[i * self.arms..(i + 1) * self.arms].iter().copied())
    }

    /// Largest `|Q - (r + gamma * max Q')|` over the reachable set.
    pub fn bellman_residual(&self) -> f64 {
        let v: Vec<f64> = (0..self.states.len()).map(|i| self.max_at(i)).collect();
        self.q
            .iter()
            .enumerate()
            .map(|(j, &q)| (q - (self.rewards[j] + self.gamma * v[self.next[j]])).abs())
            .fold(0.0, f64::max)
    }

    fn max_at(&self, i: usize) -> f64 {
        self.q[i * self.arms..(i + 1) * self.arms]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Arms chosen by the greedy policy for `rounds` steps from `start`.
    pub fn greedy_rollout(&self, start: &StateVector, rounds: usize) -> Result<Vec<usize>> {
        let mut i = self
            .idx(start)
            .ok_or_else(|| Error::Domain(format!("state {start} is not reachable")))?;
        let mut arms = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let a = self.greedy_at(i);
            arms.push(a);
            i = self.next[i * self.arms + a];
        }
        Ok(arms)
    }
}

/// Solves the Bellman optimality equation on the reachable set.
///
/// Stops once the sup-norm change drops below `epsilon (1 - gamma) / (2 gamma)`,
/// or below a few ulps of the largest value when that bound is finer than
/// double precision can resolve.
pub fn value_iteration(scn: &Scenario, gamma: f64, epsilon: f64) -> Result<ExactQ> {
    value_iteration_capped(scn, gamma, epsilon, DEFAULT_MAX_JOINT_KEYS)
}

pub fn value_iteration_capped(
    scn: &Scenario,
    gamma: f64,
    epsilon: f64,
    cap: u64,
) -> Result<ExactQ> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!(
            "value iteration needs 0 <= gamma < 1, got {gamma}"
        )));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let arms = scn.arms();
    let s_max = scn.s_max();
    let states = reachable_states(scn, cap)?;
    let index: HashMap<u128, usize> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.encode(s_max), i))
        .collect();
    let mut next = Vec::with_capacity(states.len() * arms);
    let mut rewards = Vec::with_capacity(states.len() * arms);
    for s in &states {
        for a in 0..arms {
            next.push(index[&s.transition(a, s_max)?.encode(s_max)]);
            rewards.push(scn.mean(a, s.get(a)));
        }
    }

    let r_max = rewards.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let bound = if gamma == 0.0 {
        f64::INFINITY
    } else {
        epsilon * (1.0 - gamma) / (2.0 * gamma)
    };
    // Sweeps needed for gamma^n * r_max to fall under the bound, with slack.
    let max_iter = if gamma == 0.0 || r_max == 0.0 {
        2
    } else {
        let floor = 8.0 * f64::EPSILON * r_max;
        let n = ((bound.max(floor) / r_max).ln() / gamma.ln()).ceil();
        (n.max(0.0) as u64).saturating_mul(2).saturating_add(100)
    };

    let n_states = states.len();
    let mut q = vec![0.0; n_states * arms];
    let mut v = vec![0.0; n_states];
    let mut iterations = 0;
    loop {
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = q[i * arms..(i + 1) * arms]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
        }
        let mut delta = 0.0f64;
        let mut q_abs = 0.0f64;
        for j in 0..q.len() {
            let updated = rewards[j] + gamma * v[next[j]];
            delta = delta.max((updated - q[j]).abs());
            q_abs = q_abs.max(updated.abs());
            q[j] = updated;
        }
        iterations += 1;
        if delta < bound.max(8.0 * f64::EPSILON * q_abs) {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::Numerical(format!(
                "value iteration did not settle in {iterations} sweeps (last change {delta:e})"
            )));
        }
    }

    Ok(ExactQ {
        arms,
        s_max,
        gamma,
        states,
        index,
        next,
        rewards,
        q,
        iterations,
    })
}

/// Closed-form optimal behaviour for the scenarios that admit one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OraclePolicy {
    /// Pull `arms` in rotation; with at least `s_max` of them, every pull
    /// lands at `s_max`.
    Cyclic { arms: Vec<usize> },
    /// Pull `peak_arm` when its state is `s_max`, otherwise `filler`.
    PeakWhenReady { peak_arm: usize, filler: usize },
    /// Only one arm exists.
    Single,
}

impl OraclePolicy {
    /// The policy, or `None` when the optimum has no simple closed form.
    pub fn for_scenario(scn: &Scenario) -> Option<OraclePolicy> {
        let s_max = scn.s_max();
        if scn.arms() == 1 {
            return Some(OraclePolicy::Single);
        }
        match scn.shape() {
            RewardShape::SmallScale => Some(OraclePolicy::PeakWhenReady {
                peak_arm: 0,
                filler: 1,
            }),
            RewardShape::MonotoneIncreasing => {
                let best = scn.best_arms();
                if best == 0 || s_max > best {
                    return None;
                }
                // Rotating the best arms earns their peak every round, which
                // is optimal only if no arm ever pays more.
                let peak = scn.mean_exact(0, s_max);
                let uniform = (0..best).all(|a| scn.mean_exact(a, s_max) == peak);
                let dominant =
                    (0..scn.arms()).all(|a| (1..=s_max).all(|s| scn.mean_exact(a, s) <= peak));
                (uniform && dominant).then(|| OraclePolicy::Cyclic {
                    arms: (0..best).collect(),
                })
            }
            RewardShape::IncreasingThenDecreasing => None,
        }
    }

    /// Streaming form of the policy for rollouts.
    pub fn actor(&self, s_max: usize) -> OracleActor<'_> {
        OracleActor {
            policy: self,
            s_max,
            position: 0,
        }
    }

    /// Exact expected reward per round from the initial state.
    pub fn rollout_exact(&self, scn: &Scenario, rounds: usize) -> Vec<Rational64> {
        let mut actor = self.actor(scn.s_max());
        let mut s = scn.initial_state().clone();
        let mut out = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let a = actor.act(&s);
            out.push(scn.mean_exact(a, s.get(a)));
            s.advance(a, scn.s_max());
        }
        out
    }

    /// Mean reward per round once the rollout settles into its cycle.
    pub fn long_run_average(&self, scn: &Scenario) -> Rational64 {
        let s_max = scn.s_max();
        let mut actor = self.actor(s_max);
        let mut s = scn.initial_state().clone();
        let mut seen: HashMap<(u128, usize), usize> = HashMap::new();
        let mut rewards = Vec::new();
        loop {
            let key = (s.encode(s_max), actor.position);
            if let Some(&start) = seen.get(&key) {
                let cycle = &rewards[start..];
                let sum = cycle
                    .iter()
                    .fold(Rational64::from_integer(0), |acc, r| acc + r);
                return sum / Rational64::from_integer(cycle.len() as i64);
            }
            seen.insert(key, rewards.len());
            let a = actor.act(&s);
            rewards.push(scn.mean_exact(a, s.get(a)));
            s.advance(a, s_max);
        }
    }
}

/// Stateful policy evaluation; the cyclic policy needs a position counter.
#[derive(Clone, Debug)]
pub struct OracleActor<'a> {
    policy: &'a OraclePolicy,
    s_max: usize,
    position: usize,
}

impl OracleActor<'_> {
    pub fn act(&mut self, s: &StateVector) -> usize {
        match self.policy {
            OraclePolicy::Cyclic { arms } => {
                let a = arms[self.position];
                self.position = (self.position + 1) % arms.len();
                a
            }
            OraclePolicy::PeakWhenReady { peak_arm, filler } => {
                if s.get(*peak_arm) == self.s_max {
                    *peak_arm
                } else {
                    *filler
                }
            }
            OraclePolicy::Single => 0,
        }
    }
}

/// Per-state pull probabilities of one arm under a uniformly random policy,
/// once `t >= s_max`. Index `i` holds state `i + 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateDistribution {
    pub p: Vec<f64>,
}

pub fn random_policy_distribution(arms: usize, s_max: usize) -> Result<StateDistribution> {
    if arms == 0 || s_max == 0 {
        return Err(Error::Config("arms and s_max must be at least 1".into()));
    }
    let k = arms as f64;
    let mut p = Vec::with_capacity(s_max);
    if s_max > 1 {
        p.push(1.0 / (k * k));
        for i in 2..s_max {
            p.push((1.0 - 1.0 / k).powi(i as i32 - 1) / (k * k));
        }
    }
    let rest: f64 = p.iter().sum();
    p.push(1.0 / k - rest);
    Ok(StateDistribution { p })
}

/// Empirical version of [`random_policy_distribution`]: pulls uniformly at
/// random for `rounds` rounds after an `s_max`-round warm-up and returns the
/// frequency of each pulled state divided by `arms`.
pub fn simulate_random_policy<R: Rng + ?Sized>(
    arms: usize,
    s_max: usize,
    rounds: u64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if arms == 0 || s_max == 0 || rounds == 0 {
        return Err(Error::Config(
            "arms, s_max and rounds must be at least 1".into(),
        ));
    }
    let mut s = StateVector::uniform(arms, s_max);
    for _ in 0..s_max {
        s.advance(rng.random_range(0..arms), s_max);
    }
    let mut counts = vec![0u64; s_max];
    for _ in 0..rounds {
        let a = rng.random_range(0..arms);
        counts[s.get(a) - 1] += 1;
        s.advance(a, s_max);
    }
    let denom = rounds as f64 * arms as f64;
    Ok(counts.into_iter().map(|c| c as f64 / denom).collect())
}

#[derive(Clone, Debug)]
pub struct QError {
    pub max: f64,
    /// `(state, arm, |estimate - Q*|)` for every reachable pair.
    pub pairs: Vec<(StateVector, usize, f64)>,
}

/// Absolute error of `estimate` against `Q*` over the reachable set.
pub fn q_error<F: Fn(&StateVector, usize) -> f64>(estimate: F, exact: &ExactQ) -> QError {
    let mut pairs = Vec::with_capacity(exact.q.len());
    let mut max = 0.0f64;
    for (i, s) in exact.states.iter().enumerate() {
        for a in 0..exact.arms {
            let err = (estimate(s, a) - exact.q[i * exact.arms + a]).abs();
            max = max.max(err);
            pairs.push((s.clone(), a, err));
        }
    }
    QError { max, pairs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{GammaMode, Preset, RewardDistribution, ScenarioBuilder};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small3() -> Scenario {
        Preset::Small3
            .scenario(
                None,
                RewardDistribution::Bernoulli,
                Some(1000),
                GammaMode::Discounted,
            )
            .unwrap()
    }

    fn preset(p: Preset, shape: Option<RewardShape>) -> Scenario {
        p.scenario(
            shape,
            RewardDistribution::Bernoulli,
            Some(1000),
            GammaMode::Discounted,
        )
        .unwrap()
    }

    fn ratio(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn reachable_set_excludes_double_resets() {
        let scn = preset(Preset::SixHetero, None);
        let states = reachable_states(&scn, DEFAULT_MAX_JOINT_KEYS).unwrap();
        for s in &states {
            assert!(s.as_slice().iter().filter(|&&x| x == 1).count() <= 1, "{s}");
        }
        // Initial state, plus states with no 1 never recur, so the set is
        // strictly smaller than the full product.
        assert!(states.len() < 3usize.pow(6));
        assert_eq!(states[0], StateVector::uniform(6, 3));
    }

    #[test]
    fn myopic_q_is_expected_reward() {
        let scn = preset(Preset::SixHetero, None);
        let exact = value_iteration(&scn, 0.0, DEFAULT_EPSILON).unwrap();
        for s in exact.states() {
            for a in 0..6 {
                assert_eq!(exact.q(s, a), Some(scn.mean(a, s.get(a))));
            }
        }
    }

    #[test]
    fn small_scale_peaks_only_when_ready() {
        let scn = small3();
        let exact = value_iteration(&scn, 0.99, DEFAULT_EPSILON).unwrap();
        assert!(exact.bellman_residual() <= DEFAULT_EPSILON);
        for s in exact.states() {
            let a = exact.policy(s).unwrap();
            assert_eq!(a == 0, s.get(0) == 3, "state {s} picks {a}");
        }
    }

    #[test]
    fn hetero_rotates_best_arms() {
        let scn = preset(Preset::SixHetero, None);
        let exact = value_iteration(&scn, 0.99, DEFAULT_EPSILON).unwrap();
        let pulls = exact.greedy_rollout(scn.initial_state(), 30).unwrap();
        let mut s = scn.initial_state().clone();
        for &a in &pulls {
            assert!(a < 3);
            assert_eq!(s.get(a), 3);
            s.advance(a, 3);
        }
    }

    #[test]
    fn guard_and_bad_gamma() {
        let homo = preset(Preset::TenHomo, None);
        assert!(matches!(
            value_iteration(&homo, 0.9, DEFAULT_EPSILON),
            Err(Error::StateSpace { .. })
        ));
        assert!(value_iteration(&small3(), 1.0, DEFAULT_EPSILON).is_err());
        assert!(value_iteration(&small3(), 0.9, 0.0).is_err());
    }

    #[test]
    fn oracle_policies() {
        assert_eq!(
            OraclePolicy::for_scenario(&preset(Preset::TenHomo, None)),
            Some(OraclePolicy::Cyclic {
                arms: (0..10).collect()
            })
        );
        assert_eq!(
            OraclePolicy::for_scenario(&small3()),
            Some(OraclePolicy::PeakWhenReady {
                peak_arm: 0,
                filler: 1
            })
        );
        for p in [
            Preset::SixHetero,
            Preset::SixHomo,
            Preset::TenHetero,
            Preset::TenHomo,
        ] {
            let inc = preset(p, Some(RewardShape::IncreasingThenDecreasing));
            assert_eq!(OraclePolicy::for_scenario(&inc), None, "{p}");
            let mono = preset(p, None);
            let policy = OraclePolicy::for_scenario(&mono).unwrap();
            assert_eq!(policy.long_run_average(&mono), ratio(3, 5));
            assert!(policy
                .rollout_exact(&mono, 50)
                .iter()
                .all(|&r| r == ratio(3, 5)));
        }
    }

    #[test]
    fn small_scale_average_is_seven_thirtieths() {
        let scn = small3();
        let policy = OraclePolicy::for_scenario(&scn).unwrap();
        assert_eq!(policy.long_run_average(&scn), ratio(7, 30));

        // Same figure from the value-iteration policy.
        let exact = value_iteration(&scn, 0.99, DEFAULT_EPSILON).unwrap();
        let pulls = exact.greedy_rollout(scn.initial_state(), 3 + 300).unwrap();
        let mut s = scn.initial_state().clone();
        let mut tail = Rational64::from_integer(0);
        for (t, &a) in pulls.iter().enumerate() {
            if t >= 3 {
                tail += scn.mean_exact(a, s.get(a));
            }
            s.advance(a, 3);
        }
        assert_eq!(tail / Rational64::from_integer(300), ratio(7, 30));
    }

    #[test]
    fn closed_form_matches_value_iteration_rollout() {
        for scn in [small3(), preset(Preset::SixHetero, None)] {
            let exact = value_iteration(&scn, 0.99, DEFAULT_EPSILON).unwrap();
            let policy = OraclePolicy::for_scenario(&scn).unwrap();
            let n = 60;
            let vi = exact.greedy_rollout(scn.initial_state(), n).unwrap();
            let mut s = scn.initial_state().clone();
            let vi_rewards: Vec<Rational64> = vi
                .iter()
                .map(|&a| {
                    let r = scn.mean_exact(a, s.get(a));
                    s.advance(a, scn.s_max());
                    r
                })
                .collect();
            assert_eq!(vi_rewards, policy.rollout_exact(&scn, n), "{}", scn.name());
        }
    }

    #[test]
    fn monotone_guard_rejects_dominated_rotation() {
        let mut b = ScenarioBuilder::small_scale("m", 3, 3, 100);
        b.shape = RewardShape::MonotoneIncreasing;
        b.best_arms = 3;
        b.v_best = Some(ratio(1, 4));
        assert!(OraclePolicy::for_scenario(&b.clone().build().unwrap()).is_some());
        b.best_arms = 2;
        b.v_sub_best = Some(ratio(1, 5));
        assert!(OraclePolicy::for_scenario(&b.clone().build().unwrap()).is_none());
        b.best_arms = 3;
        b.s_max = 4;
        assert!(OraclePolicy::for_scenario(&b.build().unwrap()).is_none());
    }

    #[test]
    fn random_distribution_values() {
        let d = random_policy_distribution(6, 6).unwrap();
        assert!((d.p[5] - 0.067).abs() <= 0.001);
        assert!((d.p[4] - 0.013).abs() <= 0.001);
        let d = random_policy_distribution(6, 3).unwrap();
        assert!((d.p[2] - 0.116).abs() <= 0.001);
        assert!((d.p[1] - 0.023).abs() <= 0.001);
        assert!(d.p[2] > 1.0 / 36.0);
        assert_eq!(random_policy_distribution(2, 1).unwrap().p, vec![0.5]);
        assert!(random_policy_distribution(0, 3).is_err());
    }

    #[test]
    fn random_distribution_shape() {
        for k in 1..8 {
            for s_max in 1..8 {
                let p = random_policy_distribution(k, s_max).unwrap().p;
                let kf = k as f64;
                assert!((p.iter().sum::<f64>() - 1.0 / kf).abs() < 1e-15);
                assert!(p.iter().all(|&x| x > 0.0 || (k == 1 && s_max > 1)));
                if s_max >= 3 && k >= 2 {
                    let base = 1.0 / (kf * kf);
                    assert!(p[1..s_max - 1].iter().all(|&x| x < base));
                    // The capped state outweighs state 1 only while an arm
                    // is more likely than 1/K to sit idle for s_max - 1 rounds.
                    let idle = (1.0 - 1.0 / kf).powi(s_max as i32 - 1);
                    assert_eq!(p[s_max - 1] > base, idle > 1.0 / kf, "k={k} s_max={s_max}");
                }
            }
        }
    }

    #[test]
    fn random_distribution_by_markov_chain() {
        // Independent route: exact stationary probabilities by enumerating
        // the last s_max pulls (i.i.d. uniform) for small cases.
        for (k, s_max) in [(2usize, 3usize), (3, 3), (3, 4), (4, 2)] {
            let mut p = vec![0.0; s_max];
            let histories = k.pow(s_max as u32);
            for h in 0..histories {
                // Digits: h[0] is the current pull, h[j] the pull j rounds ago.
                let digits: Vec<usize> = (0..s_max).map(|j| h / k.pow(j as u32) % k).collect();
                let a = digits[0];
                let gap = (1..s_max).find(|&j| digits[j] == a).unwrap_or(s_max);
                p[gap - 1] += 1.0 / histories as f64 / k as f64;
            }
            let analytic = random_policy_distribution(k, s_max).unwrap().p;
            for i in 0..s_max {
                assert!(
                    (p[i] - analytic[i]).abs() < 1e-12,
                    "k={k} s_max={s_max} i={i}"
                );
            }
        }
    }

    #[test]
    fn random_simulation_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rounds = 200_000;
        let sim = simulate_random_policy(6, 3, rounds, &mut rng).unwrap();
        let analytic = random_policy_distribution(6, 3).unwrap().p;
        for (i, (&x, &p)) in sim.iter().zip(&analytic).enumerate() {
            let pooled = 6.0 * p;
            let se = (pooled * (1.0 - pooled) / rounds as f64).sqrt() / 6.0;
            assert!((x - p).abs() <= 4.0 * se, "state {}: {x} vs {p}", i + 1);
        }
    }

    #[test]
    fn q_error_examples() {
        let scn = small3();
        let exact = value_iteration(&scn, 0.5, DEFAULT_EPSILON).unwrap();
        let same = q_error(|s, a| exact.q(s, a).unwrap(), &exact);
        assert_eq!(same.max, 0.0);
        let shifted = q_error(|s, a| exact.q(s, a).unwrap() + 0.1, &exact);
        assert!((shifted.max - 0.1).abs() < 1e-12);
        assert_eq!(shifted.pairs.len(), exact.states().len() * 3);
    }
}
