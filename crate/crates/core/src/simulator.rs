//! Synchronous population simulation: every agent plans on its own sampled
//! model, then all agents act step by step against the true game, coupled
//! through the population's empirical action distribution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{ActionDist, StateDist};
use crate::error::{Error, Result};
use crate::game::{sample_index, GameSpec};
use crate::learner::{act, init_belief, Belief, History, SampledModel, Transition};
use crate::mean_field::{empirical_action_dist, empirical_state_dist};
use crate::planner::{backward_induction, lower_myopic_policy, Policy, QTable};

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub num_agents: usize,
    pub num_episodes: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub window: usize,
    pub prior_strength: f64,
    pub reward_learning: bool,
    /// Keep agent states across episode boundaries instead of redrawing from ρ.
    pub carry_over_states: bool,
    /// Keep agent 0's sampled model for every episode (needed for value-gap traces).
    pub retain_models: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_agents: 2,
            num_episodes: 1,
            seed: 0,
            epsilon: DEFAULT_EPSILON,
            window: 1,
            prior_strength: 1.0,
            reward_learning: false,
            carry_over_states: false,
            retain_models: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_agents < 2 {
            return fail(format!("num_agents must be at least 2, got {}", self.num_agents));
        }
        if self.num_episodes == 0 {
            return fail("num_episodes must be positive".into());
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.window == 0 || self.window > self.num_episodes {
            return fail(format!(
                "window must be in 1..={}, got {}",
                self.num_episodes, self.window
            ));
        }
        if !(self.prior_strength > 0.0 && self.prior_strength.is_finite()) {
            return fail(format!("prior_strength must be positive, got {}", self.prior_strength));
        }
        Ok(())
    }
}

/// One learning agent with its private random streams.
#[derive(Debug, Clone)]
pub struct Agent {
    pub belief: Belief,
    pub history: History,
    pub state: usize,
    q: Option<QTable>,
    planning_rng: ChaCha8Rng,
    env_rng: ChaCha8Rng,
}

impl Agent {
    /// Agent `index` draws from streams `2·index` (model sampling) and
    /// `2·index + 1` (its own transitions) of the master seed.
    pub fn new(index: usize, master_seed: u64, spec: &GameSpec, prior_strength: f64) -> Result<Self> {
        let stream = |k: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
            rng.set_stream(k);
            rng
        };
        Ok(Self {
            belief: init_belief(spec.num_states(), spec.num_actions(), prior_strength)?,
            history: History::default(),
            state: 0,
            q: None,
            planning_rng: stream(2 * index as u64),
            env_rng: stream(2 * index as u64 + 1),
        })
    }

    pub fn reset_state(&mut self, initial: &StateDist) {
        self.state = sample_index(initial.probs(), &mut self.env_rng);
    }

    /// Samples a model from the belief and plans on it for the next episode.
    pub fn plan(&mut self, spec: &GameSpec, learn_rewards: bool) -> Result<SampledModel> {
        let model = self
            .belief
            .sample_model(spec, learn_rewards, &mut self.planning_rng)?;
        self.q = Some(backward_induction(&model));
        Ok(model)
    }

    pub fn q_table(&self) -> Option<&QTable> {
        self.q.as_ref()
    }

    pub fn policy(&self) -> Option<Policy> {
        self.q.as_ref().map(lower_myopic_policy)
    }
}

/// What happened in one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// α_j over the whole population, per step.
    pub alpha: Vec<ActionDist>,
    /// f_j before acting, per step.
    pub states: Vec<StateDist>,
    /// Discounted return Σ_j γ^j r_j per agent.
    pub returns: Vec<f64>,
}

/// Plays one episode with frozen per-agent Q-tables.
pub fn run_episode(spec: &GameSpec, agents: &mut [Agent]) -> Result<EpisodeRecord> {
    if agents.is_empty() {
        return Err(Error::EmptyPopulation("no agents"));
    }
    let ns = spec.num_states();
    let na = spec.num_actions();
    let horizon = spec.horizon();
    for agent in agents.iter() {
        let q = agent
            .q
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("agent has not planned".into()))?;
        if q.num_states() != ns || q.num_actions() != na || q.horizon() != horizon {
            return Err(Error::DimensionMismatch {
                what: "agent Q-table",
                expected: ns * na * horizon,
                actual: q.num_states() * q.num_actions() * q.horizon(),
            });
        }
        if agent.state >= ns {
            return Err(Error::OutOfRange { what: "agent state", index: agent.state, size: ns });
        }
    }

    let mut alpha_trace = Vec::with_capacity(horizon);
    let mut state_trace = Vec::with_capacity(horizon);
    let mut returns = vec![0.0; agents.len()];
    let mut rows = vec![0.0; ns * na * ns];
    let mut discount = 1.0;
    for step in 0..horizon {
        let states: Vec<usize> = agents.iter().map(|a| a.state).collect();
        state_trace.push(empirical_state_dist(&states, ns, None)?);
        let actions: Vec<usize> = agents
            .iter()
            .map(|agent| act(agent.q.as_ref().expect("checked"), agent.state, step))
            .collect();
        let alpha = empirical_action_dist(&actions, na, None)?;
        for (k, row) in rows.chunks_mut(ns).enumerate() {
            spec.mix_row_into(k / na, k % na, alpha.probs(), row);
        }
        for ((agent, &action), ret) in agents.iter_mut().zip(&actions).zip(returns.iter_mut()) {
            let s = agent.state;
            if !spec.is_feasible(s, action) {
                return Err(Error::InfeasibleAction { state: s, action });
            }
            let row = &rows[(s * na + action) * ns..(s * na + action + 1) * ns];
            let next = sample_index(row, &mut agent.env_rng);
            let reward = spec.reward(s, action, next);
            agent.belief.update(s, action, reward, next)?;
            agent.history.push(Transition { state: s, action, reward, next });
            agent.state = next;
            *ret += discount * reward;
        }
        alpha_trace.push(alpha);
        discount *= spec.discount();
    }
    Ok(EpisodeRecord {
        alpha: alpha_trace,
        states: state_trace,
        returns,
    })
}

/// Smallest 1-based episode k such that every episode in (k, k+W] stays
/// within L1 distance ε of episode k at every step.
pub fn detect_convergence(alpha_trace: &[Vec<ActionDist>], epsilon: f64, window: usize) -> Option<usize> {
    let episodes = alpha_trace.len();
    if window == 0 {
        return None;
    }
    (0..episodes.saturating_sub(window))
        .find(|&k| {
            alpha_trace[k + 1..=k + window].iter().all(|later| {
                later.iter().zip(&alpha_trace[k]).all(|(a, b)| {
                    a.l1_distance(b).map(|d| d < epsilon).unwrap_or(false)
                })
            })
        })
        .map(|k| k + 1)
}

/// Per-step average of the last `window` episodes of an action trace.
pub fn final_window_alpha(trace: &[Vec<ActionDist>], window: usize) -> Result<Vec<ActionDist>> {
    let tail = &trace[trace.len().saturating_sub(window.max(1))..];
    let horizon = tail.first().map(Vec::len).unwrap_or(0);
    (0..horizon)
        .map(|j| ActionDist::average(tail.iter().map(|ep| &ep[j])))
        .collect()
}

/// Per-step average of the last `window` episodes of a state trace.
pub fn final_window_states(trace: &[Vec<StateDist>], window: usize) -> Result<Vec<StateDist>> {
    let tail = &trace[trace.len().saturating_sub(window.max(1))..];
    let horizon = tail.first().map(Vec::len).unwrap_or(0);
    (0..horizon)
        .map(|j| StateDist::average(tail.iter().map(|ep| &ep[j])))
        .collect()
}

/// Per (state, step) plurality action across policies; ties go to the
/// smallest action index.
pub fn consensus_policy(policies: &[Policy]) -> Result<Policy> {
    let first = policies
        .first()
        .ok_or(Error::EmptyPopulation("no policies"))?;
    let (ns, na, horizon) = (first.num_states(), first.num_actions(), first.horizon());
    let mut votes = vec![0usize; ns * horizon * na];
    for p in policies {
        if (p.num_states(), p.num_actions(), p.horizon()) != (ns, na, horizon) {
            return Err(Error::DimensionMismatch {
                what: "policy shape",
                expected: ns * na * horizon,
                actual: p.num_states() * p.num_actions() * p.horizon(),
            });
        }
        for (k, &a) in p.as_slice().iter().enumerate() {
            votes[k * na + a] += 1;
        }
    }
    Ok(Policy::from_fn(ns, na, horizon, |s, step| {
        let tally = &votes[(step * ns + s) * na..(step * ns + s + 1) * na];
        let top = *tally.iter().max().expect("at least one action");
        tally.iter().position(|&c| c == top).expect("max exists")
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// K_ε, 1-based; `None` when the trace never settles.
    pub episode: Option<usize>,
    pub epsilon: f64,
    pub window: usize,
    /// α̂_j: average over the final window.
    pub final_alpha: Vec<ActionDist>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: SimConfig,
    /// `[episode][step]`
    pub alpha_trace: Vec<Vec<ActionDist>>,
    /// `[episode][step]`
    pub state_trace: Vec<Vec<StateDist>>,
    /// `[episode][agent]`
    pub policy_trace: Vec<Vec<Policy>>,
    /// `[episode][agent]` discounted returns.
    pub returns: Vec<Vec<f64>>,
    pub convergence: ConvergenceReport,
    /// f̂_j: average over the final window.
    pub final_states: Vec<StateDist>,
    /// Consensus of the agents' policies in the last episode.
    pub final_policy: Policy,
    /// Agent 0's sampled model per episode, when retained.
    pub sampled_models: Option<Vec<SampledModel>>,
}

impl RunResult {
    pub fn num_episodes(&self) -> usize {
        self.alpha_trace.len()
    }

    pub fn mean_returns(&self) -> Vec<f64> {
        self.returns
            .iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect()
    }
}

/// Stepwise driver behind [`run`]; exposes the agents between episodes.
pub struct Simulation<'a> {
    spec: &'a GameSpec,
    config: SimConfig,
    agents: Vec<Agent>,
    episode: usize,
    alpha_trace: Vec<Vec<ActionDist>>,
    state_trace: Vec<Vec<StateDist>>,
    policy_trace: Vec<Vec<Policy>>,
    returns: Vec<Vec<f64>>,
    sampled_models: Option<Vec<SampledModel>>,
}

impl<'a> Simulation<'a> {
    pub fn new(config: SimConfig, spec: &'a GameSpec) -> Result<Self> {
        config.validate()?;
        let agents = (0..config.num_agents)
            .map(|i| Agent::new(i, config.seed, spec, config.prior_strength))
            .collect::<Result<Vec<_>>>()?;
        let sampled_models = config.retain_models.then(Vec::new);
        Ok(Self {
            spec,
            config,
            agents,
            episode: 0,
            alpha_trace: Vec::new(),
            state_trace: Vec::new(),
            policy_trace: Vec::new(),
            returns: Vec::new(),
            sampled_models,
        })
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn episodes_run(&self) -> usize {
        self.episode
    }

    pub fn run_next_episode(&mut self) -> Result<()> {
        let spec = self.spec;
        let initial = spec.initial_dist();
        if self.episode == 0 || !self.config.carry_over_states {
            self.agents.iter_mut().for_each(|a| a.reset_state(initial));
        }
        let learn_rewards = self.config.reward_learning;
        let planned: Vec<(SampledModel, Policy)> = self
            .agents
            .par_iter_mut()
            .map(|agent| {
                let model = agent.plan(spec, learn_rewards)?;
                let policy = agent.policy().expect("just planned");
                Ok((model, policy))
            })
            .collect::<Result<_>>()?;
        let mut policies = Vec::with_capacity(planned.len());
        for (i, (model, policy)) in planned.into_iter().enumerate() {
            if i == 0 {
                if let Some(models) = self.sampled_models.as_mut() {
                    models.push(model);
                }
            }
            policies.push(policy);
        }

        let record = run_episode(spec, &mut self.agents)?;
        self.alpha_trace.push(record.alpha);
        self.state_trace.push(record.states);
        self.returns.push(record.returns);
        self.policy_trace.push(policies);
        self.episode += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<RunResult> {
        if self.episode == 0 {
            return Err(Error::InvalidConfig("no episodes were run".into()));
        }
        let window = self.config.window;
        let convergence = ConvergenceReport {
            episode: detect_convergence(&self.alpha_trace, self.config.epsilon, window),
            epsilon: self.config.epsilon,
            window,
            final_alpha: final_window_alpha(&self.alpha_trace, window)?,
        };
        let final_states = final_window_states(&self.state_trace, window)?;
        let final_policy = consensus_policy(self.policy_trace.last().expect("nonempty"))?;
        Ok(RunResult {
            config: self.config,
            alpha_trace: self.alpha_trace,
            state_trace: self.state_trace,
            policy_trace: self.policy_trace,
            returns: self.returns,
            convergence,
            final_states,
            final_policy,
            sampled_models: self.sampled_models,
        })
    }
}

/// Runs `config.num_episodes` episodes of posterior-sampling learners on `spec`.
/// Deterministic in `config.seed` regardless of thread count.
pub fn run(config: &SimConfig, spec: &GameSpec) -> Result<RunResult> {
    let mut sim = Simulation::new(config.clone(), spec)?;
    for _ in 0..config.num_episodes {
        sim.run_next_episode()?;
    }
    sim.finish()
}
