//! Per-agent posterior sampling: Dirichlet beliefs over transition rows,
//! model sampling, and greedy action selection.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::game::{GameSpec, StepModel};
use crate::planner::QTable;

/// Reward assumed for a transition the agent has never observed when reward
/// learning is enabled.
pub const UNOBSERVED_REWARD: f64 = 0.5;

/// Dirichlet transition counts and first-observation reward estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    num_states: usize,
    num_actions: usize,
    prior_strength: f64,
    // [s][a][s']
    counts: Vec<f64>,
    rewards: Vec<Option<f64>>,
}

/// Symmetric Dirichlet(κ) prior over every transition row.
pub fn init_belief(num_states: usize, num_actions: usize, prior_strength: f64) -> Result<Belief> {
    if !(prior_strength > 0.0 && prior_strength.is_finite()) {
        return Err(Error::NonPositivePrior(prior_strength));
    }
    let len = num_states * num_actions * num_states;
    Ok(Belief {
        num_states,
        num_actions,
        prior_strength,
        counts: vec![prior_strength; len],
        rewards: vec![None; len],
    })
}

impl Belief {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prior_strength(&self) -> f64 {
        self.prior_strength
    }

    fn row_start(&self, state: usize, action: usize) -> usize {
        (state * self.num_actions + action) * self.num_states
    }

    fn check(&self, state: usize, action: usize) -> Result<()> {
        if state >= self.num_states {
            return Err(Error::OutOfRange {
                what: "state",
                index: state,
                size: self.num_states,
            });
        }
        if action >= self.num_actions {
            return Err(Error::OutOfRange {
                what: "action",
                index: action,
                size: self.num_actions,
            });
        }
        Ok(())
    }

    /// Dirichlet parameters N(s,a,·).
    pub fn counts(&self, state: usize, action: usize) -> &[f64] {
        let start = self.row_start(state, action);
        &self.counts[start..start + self.num_states]
    }

    pub fn observed_reward(&self, state: usize, action: usize, next: usize) -> Option<f64> {
        self.rewards[self.row_start(state, action) + next]
    }

    /// Records one transition. The reward estimate is pinned on first sight.
    pub fn update(&mut self, state: usize, action: usize, reward: f64, next: usize) -> Result<()> {
        self.check(state, action)?;
        if next >= self.num_states {
            return Err(Error::OutOfRange {
                what: "next state",
                index: next,
                size: self.num_states,
            });
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::RewardOutOfRange(reward));
        }
        let k = self.row_start(state, action) + next;
        self.counts[k] += 1.0;
        self.rewards[k].get_or_insert(reward);
        Ok(())
    }

    /// Posterior mean N(s,a,·)/ΣN(s,a,·).
    pub fn posterior_mean(&self, state: usize, action: usize) -> Result<Vec<f64>> {
        self.check(state, action)?;
        let row = self.counts(state, action);
        let total: f64 = row.iter().sum();
        Ok(row.iter().map(|c| c / total).collect())
    }

    /// Draws every row independently from Dirichlet(N(s,a,·)). Dimensions,
    /// horizon, discount, feasibility and (unless `learn_rewards`) the reward
    /// table come from `skeleton`.
    pub fn sample_model<R: Rng + ?Sized>(
        &self,
        skeleton: &GameSpec,
        learn_rewards: bool,
        rng: &mut R,
    ) -> Result<SampledModel> {
        if skeleton.num_states() != self.num_states || skeleton.num_actions() != self.num_actions {
            return Err(Error::DimensionMismatch {
                what: "belief dimensions",
                expected: skeleton.num_states() * skeleton.num_actions(),
                actual: self.num_states * self.num_actions,
            });
        }
        let ns = self.num_states;
        let mut rows = Vec::with_capacity(self.counts.len());
        for row in self.counts.chunks(ns) {
            rows.extend(sample_dirichlet(row, rng));
        }
        let mut reward = Vec::with_capacity(self.counts.len());
        for s in 0..ns {
            for a in 0..self.num_actions {
                for next in 0..ns {
                    reward.push(if learn_rewards {
                        self.observed_reward(s, a, next).unwrap_or(UNOBSERVED_REWARD)
                    } else {
                        skeleton.reward(s, a, next)
                    });
                }
            }
        }
        Ok(SampledModel {
            num_states: ns,
            num_actions: self.num_actions,
            horizon: skeleton.horizon(),
            discount: skeleton.discount(),
            rows,
            reward,
            feasible: skeleton.feasibility_mask().to_vec(),
        })
    }
}

/// Normalized independent Gamma(αᵢ, 1) draws. Falls back to the mean when
/// every draw underflows.
fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let mut draws: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let mut total: f64 = draws.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        draws = alpha.to_vec();
        total = draws.iter().sum();
    }
    draws.iter_mut().for_each(|d| *d /= total);
    draws
}

/// A transition model drawn from a belief. Stationary across steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledModel {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    discount: f64,
    rows: Vec<f64>,
    reward: Vec<f64>,
    feasible: Vec<bool>,
}

impl SampledModel {
    /// The true game's rows under a fixed population action distribution,
    /// packaged as a stationary model.
    pub fn from_spec(spec: &GameSpec, alpha: &crate::dist::ActionDist) -> Result<Self> {
        let ns = spec.num_states();
        let na = spec.num_actions();
        let mut rows = Vec::with_capacity(ns * na * ns);
        let mut reward = Vec::with_capacity(ns * na * ns);
        for s in 0..ns {
            for a in 0..na {
                if spec.is_feasible(s, a) {
                    rows.extend(spec.transition_kernel(s, a, alpha)?);
                } else {
                    let mut row = vec![0.0; ns];
                    spec.mix_row_into(s, a, alpha.probs(), &mut row);
                    rows.extend(row);
                }
                reward.extend((0..ns).map(|next| spec.reward(s, a, next)));
            }
        }
        Ok(Self {
            num_states: ns,
            num_actions: na,
            horizon: spec.horizon(),
            discount: spec.discount(),
            rows,
            reward,
            feasible: spec.feasibility_mask().to_vec(),
        })
    }

    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.num_actions + action) * self.num_states;
        &self.rows[start..start + self.num_states]
    }
}

impl StepModel for SampledModel {
    fn num_states(&self) -> usize {
        self.num_states
    }
    fn num_actions(&self) -> usize {
        self.num_actions
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn discount(&self) -> f64 {
        self.discount
    }
    fn is_feasible(&self, state: usize, action: usize) -> bool {
        self.feasible[state * self.num_actions + action]
    }
    fn transition_row(&self, _step: usize, state: usize, action: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(state, action));
    }
    fn reward(&self, state: usize, action: usize, next: usize) -> f64 {
        self.reward[(state * self.num_actions + action) * self.num_states + next]
    }
}

/// Greedy action at (state, step) with smallest-index tie-breaking.
pub fn act(q: &QTable, state: usize, step: usize) -> usize {
    q.best_action(step, state)
}

/// One observed step of an agent's own experience.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next: usize,
}

/// Append-only record of an agent's own transitions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    records: Vec<Transition>,
}

impl History {
    pub fn push(&mut self, t: Transition) {
        self.records.push(t);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Transition] {
        &self.records
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{check_simplex, l1_distance};
    use crate::game::generators;
    use crate::game::sample_index;
    use crate::planner::lower_myopic_policy;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn skeleton(ns: usize, na: usize) -> GameSpec {
        generators::random(ns, na, 3, 0.9, 0.0, 0).unwrap()
    }

    #[test]
    fn fresh_belief_is_uniform() {
        let b = init_belief(2, 2, 1.0).unwrap();
        assert_eq!(b.posterior_mean(1, 0).unwrap(), vec![0.5, 0.5]);
        let b = init_belief(3, 2, 1.0).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                assert_eq!(b.posterior_mean(s, a).unwrap(), vec![1.0 / 3.0; 3]);
            }
        }
    }

    #[test]
    fn nonpositive_prior_rejected() {
        assert_eq!(init_belief(2, 2, 0.0), Err(Error::NonPositivePrior(0.0)));
        assert!(init_belief(2, 2, -1.0).is_err());
        assert!(init_belief(2, 2, f64::NAN).is_err());
    }

    #[test]
    fn three_observations_posterior() {
        let mut b = init_belief(2, 2, 1.0).unwrap();
        for _ in 0..3 {
            b.update(0, 0, 0.5, 1).unwrap();
        }
        assert_eq!(b.posterior_mean(0, 0).unwrap(), vec![0.2, 0.8]);
        assert_eq!(b.posterior_mean(0, 1).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn update_rejects_bad_reward() {
        let mut b = init_belief(2, 2, 1.0).unwrap();
        assert_eq!(b.update(0, 0, 1.2, 1), Err(Error::RewardOutOfRange(1.2)));
        assert!(b.update(0, 0, 0.5, 2).is_err());
        assert_eq!(b, init_belief(2, 2, 1.0).unwrap());
    }

    #[test]
    fn reward_pinned_at_first_observation() {
        let mut b = init_belief(2, 1, 1.0).unwrap();
        b.update(1, 0, 0.25, 0).unwrap();
        b.update(1, 0, 0.75, 0).unwrap();
        assert_eq!(b.observed_reward(1, 0, 0), Some(0.25));
        assert_eq!(b.observed_reward(1, 0, 1), None);
        let spec = skeleton(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = b.sample_model(&spec, true, &mut rng).unwrap();
        assert_eq!(m.reward(1, 0, 0), 0.25);
        assert_eq!(m.reward(1, 0, 1), UNOBSERVED_REWARD);
        let m = b.sample_model(&spec, false, &mut rng).unwrap();
        assert_eq!(m.reward(1, 0, 1), spec.reward(1, 0, 1));
    }

    #[test]
    fn concentrated_counts_sample_near_vertex() {
        let mut b = init_belief(2, 1, 1.0).unwrap();
        // counts (10^6, 1)
        b.counts[0] = 1e6;
        let spec = skeleton(2, 1);
        let close = (0..100u64)
            .filter(|&seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = b.sample_model(&spec, false, &mut rng).unwrap();
                l1_distance(m.row(0, 0), &[1.0, 0.0]).unwrap() / 2.0 <= 0.01
            })
            .count();
        assert!(close >= 99, "{close} of 100 within 0.01");
    }

    #[test]
    fn sampling_is_seeded_and_pure() {
        let mut b = init_belief(3, 2, 1.0).unwrap();
        b.update(0, 1, 0.3, 2).unwrap();
        let before = b.clone();
        let spec = skeleton(3, 2);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            b.sample_model(&spec, false, &mut rng).unwrap()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
        assert_eq!(b, before);
    }

    #[test]
    fn act_matches_lower_myopic() {
        let q = QTable::from_values(2, 2, 2, vec![0.2, 0.8, 0.4, 0.4, 0.9, 0.1, 0.0, 0.0]).unwrap();
        assert_eq!(act(&q, 0, 0), 1);
        assert_eq!(act(&q, 1, 0), 0);
        let pi = lower_myopic_policy(&q);
        for s in 0..2 {
            for j in 0..2 {
                assert_eq!(act(&q, s, j), pi.action(s, j));
            }
        }
    }

    fn posterior_error(n: usize, seed: u64) -> f64 {
        let truth = [0.3, 0.7];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = init_belief(2, 1, 1.0).unwrap();
        for _ in 0..n {
            b.update(0, 0, 0.0, sample_index(&truth, &mut rng)).unwrap();
        }
        l1_distance(&b.posterior_mean(0, 0).unwrap(), &truth).unwrap()
    }

    #[test]
    fn posterior_mean_concentrates() {
        assert!(posterior_error(10_000, 17) <= 0.05);
        // averaged over seeds the error shrinks roughly like 1/sqrt(N)
        let small: f64 = (0..20).map(|s| posterior_error(100, s)).sum();
        let large: f64 = (0..20).map(|s| posterior_error(10_000, s)).sum();
        assert!(small / large >= 5.0, "ratio {}", small / large);
    }

    #[test]
    fn history_appends() {
        let mut h = History::default();
        assert!(h.is_empty());
        let t = Transition { state: 0, action: 1, reward: 0.5, next: 1 };
        h.push(t);
        h.push(Transition { state: 1, ..t });
        assert_eq!(h.len(), 2);
        assert_eq!(h.records()[0], t);
    }

    proptest! {
        #[test]
        fn updates_commute(obs in proptest::collection::vec((0usize..3, 0usize..2, 0usize..3), 0..40), seed in any::<u64>()) {
            let mut forward = init_belief(3, 2, 0.5).unwrap();
            for &(s, a, n) in &obs {
                forward.update(s, a, 0.5, n).unwrap();
            }
            let mut shuffled = obs.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
            let mut other = init_belief(3, 2, 0.5).unwrap();
            for &(s, a, n) in &shuffled {
                other.update(s, a, 0.5, n).unwrap();
            }
            prop_assert_eq!(&forward.counts, &other.counts);
            prop_assert!(forward.counts.iter().all(|c| *c >= 0.5));
        }

        #[test]
        fn samples_and_means_on_simplex(kappa in 0.01f64..5.0, seed in any::<u64>()) {
            let b = init_belief(4, 2, kappa).unwrap();
            let spec = skeleton(4, 2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = b.sample_model(&spec, false, &mut rng).unwrap();
            for s in 0..4 {
                for a in 0..2 {
                    prop_assert!(check_simplex(m.row(s, a)).is_ok());
                    prop_assert!(check_simplex(&b.posterior_mean(s, a).unwrap()).is_ok());
                }
            }
        }
    }
}
