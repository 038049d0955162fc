//! Mean-field equilibrium verification on the true game: best response,
//! exploitability, the three equilibrium conditions, and the value-gap
//! diagnostic with its Azuma-Hoeffding envelope.

use std::fmt;

use crate::dist::{ActionDist, StateDist};
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::learner::SampledModel;
use crate::mean_field::{forward_state_flow, induced_action_dist};
use crate::planner::{backward_induction, lower_myopic_policy, policy_value, Policy, QTable, ORACLE_TOL};
use crate::simulator::RunResult;

/// The lower-myopic optimal policy of the true game under α̂.
pub fn best_response_policy(spec: &GameSpec, alpha: &[ActionDist]) -> Result<(Policy, QTable)> {
    let q = backward_induction(&spec.with_alpha(alpha)?);
    Ok((lower_myopic_policy(&q), q))
}

/// max over (s, j) of V_{π*,j}(s|α̂) − V_{π̂,j}(s|α̂).
pub fn exploitability(spec: &GameSpec, policy: &Policy, alpha: &[ActionDist]) -> Result<f64> {
    let model = spec.with_alpha(alpha)?;
    let (best, _) = best_response_policy(spec, alpha)?;
    let v_best = policy_value(&model, &best)?;
    let v = policy_value(&model, policy)?;
    let mut gap = f64::NEG_INFINITY;
    for j in 0..spec.horizon() {
        for s in 0..spec.num_states() {
            gap = gap.max(v_best.get(j, s) - v.get(j, s));
        }
    }
    Ok(gap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfeReport {
    /// π̂ ∈ P(α̂) up to rounding.
    pub policy_in_best_response_set: bool,
    /// Exploitability of π̂ under α̂.
    pub policy_gap: f64,
    /// max_j ‖f_obs,j − f̂_j‖₁; zero when no observed flow was supplied.
    pub state_flow_residual: f64,
    /// max_j ‖α̂_j − D̂(π̂, f̂_j)‖₁.
    pub induced_alpha_residual: f64,
    pub tolerance: f64,
    pub is_equilibrium: bool,
    /// f̂: forward flow of ρ under π̂ and α̂.
    pub state_flow: Vec<StateDist>,
    pub induced_alpha: Vec<ActionDist>,
}

impl fmt::Display for MfeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mean_field_equilibrium: {}", self.is_equilibrium)?;
        writeln!(f, "tolerance: {:e}", self.tolerance)?;
        writeln!(f, "policy_in_best_response_set: {}", self.policy_in_best_response_set)?;
        writeln!(f, "policy_gap: {:e}", self.policy_gap)?;
        writeln!(f, "induced_alpha_residual: {:e}", self.induced_alpha_residual)?;
        write!(f, "state_flow_residual: {:e}", self.state_flow_residual)
    }
}

/// Checks the equilibrium conditions for (π̂, α̂) on the true game.
///
/// `observed_states`, when given, is compared against the forward flow to
/// fill `state_flow_residual`; it does not gate the verdict.
pub fn verify_mfe(
    spec: &GameSpec,
    policy: &Policy,
    alpha: &[ActionDist],
    initial: &StateDist,
    observed_states: Option<&[StateDist]>,
    tol: f64,
) -> Result<MfeReport> {
    let policy_gap = exploitability(spec, policy, alpha)?;
    let state_flow = forward_state_flow(spec, policy, alpha, initial)?;
    let induced_alpha = state_flow
        .iter()
        .enumerate()
        .map(|(j, f)| induced_action_dist(policy, f, j))
        .collect::<Result<Vec<_>>>()?;
    let mut induced_alpha_residual: f64 = 0.0;
    for (a, b) in alpha.iter().zip(&induced_alpha) {
        induced_alpha_residual = induced_alpha_residual.max(a.l1_distance(b)?);
    }
    let mut state_flow_residual: f64 = 0.0;
    if let Some(observed) = observed_states {
        if observed.len() != state_flow.len() {
            return Err(Error::DimensionMismatch {
                what: "observed state distributions",
                expected: state_flow.len(),
                actual: observed.len(),
            });
        }
        for (a, b) in observed.iter().zip(&state_flow) {
            state_flow_residual = state_flow_residual.max(a.l1_distance(b)?);
        }
    }
    Ok(MfeReport {
        policy_in_best_response_set: policy_gap <= ORACLE_TOL,
        policy_gap,
        state_flow_residual,
        induced_alpha_residual,
        tolerance: tol,
        is_equilibrium: policy_gap <= tol && induced_alpha_residual <= tol,
        state_flow,
        induced_alpha,
    })
}

/// Per-episode value gaps g_k with prefix sums and the Azuma envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGapTrace {
    pub delta: f64,
    pub gaps: Vec<f64>,
    pub prefix_sums: Vec<f64>,
    /// τ·√(2m·ln(1/δ)) for prefix length m.
    pub envelope: Vec<f64>,
    /// Prefix sum strictly above the envelope.
    pub exceeds: Vec<bool>,
}

impl ValueGapTrace {
    pub fn violations(&self) -> usize {
        self.exceeds.iter().filter(|&&x| x).count()
    }

    /// Running averages (1/m)·Σ_{k≤m} g_k.
    pub fn cesaro(&self) -> Vec<f64> {
        self.prefix_sums
            .iter()
            .enumerate()
            .map(|(i, s)| s / (i + 1) as f64)
            .collect()
    }

    /// Mean gap over the first and the second half of the episodes.
    pub fn half_means(&self) -> (f64, f64) {
        let mid = self.gaps.len() / 2;
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
        (mean(&self.gaps[..mid]), mean(&self.gaps[mid..]))
    }
}

pub fn azuma_envelope(horizon: usize, m: usize, delta: f64) -> f64 {
    horizon as f64 * (2.0 * m as f64 * (1.0 / delta).ln()).sqrt()
}

/// g_k = max_s |V_{π*,1}(s|α̂) − V^{M_k}_{π_k,1}(s)| for each episode's sampled
/// model M_k and the policy π_k planned on it.
pub fn value_gap_trace(
    spec: &GameSpec,
    alpha: &[ActionDist],
    models: &[SampledModel],
    policies: &[Policy],
    delta: f64,
) -> Result<ValueGapTrace> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {delta}")));
    }
    if models.len() != policies.len() {
        return Err(Error::DimensionMismatch {
            what: "policies per sampled model",
            expected: models.len(),
            actual: policies.len(),
        });
    }
    let model = spec.with_alpha(alpha)?;
    let (best, _) = best_response_policy(spec, alpha)?;
    let v_best = policy_value(&model, &best)?;
    let mut gaps = Vec::with_capacity(models.len());
    for (m, pi) in models.iter().zip(policies) {
        let v = policy_value(m, pi)?;
        let g = (0..spec.num_states())
            .map(|s| (v_best.get(0, s) - v.get(0, s)).abs())
            .fold(0.0, f64::max);
        gaps.push(g);
    }
    let prefix_sums: Vec<f64> = gaps
        .iter()
        .scan(0.0, |acc, g| {
            *acc += g;
            Some(*acc)
        })
        .collect();
    let envelope: Vec<f64> = (1..=gaps.len())
        .map(|m| azuma_envelope(spec.horizon(), m, delta))
        .collect();
    let exceeds = prefix_sums.iter().zip(&envelope).map(|(s, e)| s > e).collect();
    Ok(ValueGapTrace {
        delta,
        gaps,
        prefix_sums,
        envelope,
        exceeds,
    })
}

/// [`value_gap_trace`] over agent 0's retained models, under the run's final α̂.
pub fn value_gap_trace_for_run(run: &RunResult, spec: &GameSpec, delta: f64) -> Result<ValueGapTrace> {
    let models = run.sampled_models.as_ref().ok_or(Error::ModelsNotRetained)?;
    let policies: Vec<Policy> = run.policy_trace.iter().map(|p| p[0].clone()).collect();
    value_gap_trace(spec, &run.convergence.final_alpha, models, &policies, delta)
}
