//! Empirical and induced population distributions, and the forward state
//! flow of a population following an oblivious policy.

use crate::dist::{ActionDist, StateDist};
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::planner::Policy;

fn empirical(values: &[usize], size: usize, exclude: Option<usize>) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyPopulation("no agents"));
    }
    if let Some(i) = exclude {
        if i >= values.len() {
            return Err(Error::OutOfRange {
                what: "excluded agent",
                index: i,
                size: values.len(),
            });
        }
        if values.len() < 2 {
            return Err(Error::EmptyPopulation("exclusion leaves no agents"));
        }
    }
    let mut counts = vec![0usize; size];
    for (agent, &v) in values.iter().enumerate() {
        if Some(agent) == exclude {
            continue;
        }
        if v >= size {
            return Err(Error::OutOfRange {
                what: "value",
                index: v,
                size,
            });
        }
        counts[v] += 1;
    }
    let counted = values.len() - usize::from(exclude.is_some());
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / counted as f64)
        .collect())
}

/// Fraction of agents (optionally excluding one) playing each action.
pub fn empirical_action_dist(
    actions: &[usize],
    num_actions: usize,
    exclude: Option<usize>,
) -> Result<ActionDist> {
    ActionDist::new(empirical(actions, num_actions, exclude)?)
}

/// Fraction of agents (optionally excluding one) in each state.
pub fn empirical_state_dist(
    states: &[usize],
    num_states: usize,
    exclude: Option<usize>,
) -> Result<StateDist> {
    StateDist::new(empirical(states, num_states, exclude)?)
}

/// α(a) = Σ_{s : π(s,step)=a} f(s). `step` is 0-based.
pub fn induced_action_dist(policy: &Policy, f: &StateDist, step: usize) -> Result<ActionDist> {
    if f.len() != policy.num_states() {
        return Err(Error::DimensionMismatch {
            what: "state distribution length",
            expected: policy.num_states(),
            actual: f.len(),
        });
    }
    if step >= policy.horizon() {
        return Err(Error::OutOfRange {
            what: "step",
            index: step,
            size: policy.horizon(),
        });
    }
    let mut alpha = vec![0.0; policy.num_actions()];
    for (s, &mass) in f.probs().iter().enumerate() {
        alpha[policy.action(s, step)] += mass;
    }
    ActionDist::new(alpha)
}

/// Propagates ρ through the dynamics under `policy` and the per-step α:
/// f_0 = ρ, f_{j+1}(s') = Σ_s f_j(s)·p(s'|s,π(s,j),α_j). Returns one
/// distribution per step.
pub fn forward_state_flow(
    spec: &GameSpec,
    policy: &Policy,
    alpha: &[ActionDist],
    initial: &StateDist,
) -> Result<Vec<StateDist>> {
    let ns = spec.num_states();
    if initial.len() != ns {
        return Err(Error::DimensionMismatch {
            what: "initial distribution length",
            expected: ns,
            actual: initial.len(),
        });
    }
    policy.check_against(spec)?;
    spec.with_alpha(alpha)?;
    let mut flow = Vec::with_capacity(spec.horizon());
    flow.push(initial.clone());
    let mut row = vec![0.0; ns];
    for step in 0..spec.horizon() - 1 {
        let current = flow[step].probs();
        let mut next = vec![0.0; ns];
        for (s, &mass) in current.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            spec.mix_row_into(s, policy.action(s, step), alpha[step].probs(), &mut row);
            for (n, p) in next.iter_mut().zip(&row) {
                *n += mass * p;
            }
        }
        flow.push(StateDist::new(next)?);
    }
    Ok(flow)
}
