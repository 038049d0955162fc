//! The true game model: dimensions, rewards, and the population-coupled
//! transition kernels p(s'|s,a,α) = Σ_b α(b)·P_b(s'|s,a).

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{check_simplex, ActionDist, StateDist};
use crate::error::{Error, Result};

pub mod generators;

/// Unvalidated game description, as read from a scenario file or built by hand.
///
/// Index conventions: `reward[s][a][s']`, `base_kernels[b][s][a][s']`,
/// `feasible_actions[s]` lists the allowed actions in state `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpecData {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub discount: f64,
    pub initial_dist: Vec<f64>,
    pub reward: Vec<Vec<Vec<f64>>>,
    pub base_kernels: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasible_actions: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyStateSpace,
    EmptyActionSpace,
    ZeroHorizon,
    Discount(f64),
    InitialDist(String),
    Shape { field: String, expected: usize, actual: usize },
    RewardOutOfRange { state: usize, action: usize, next: usize, value: f64 },
    KernelRow { kernel: usize, state: usize, action: usize, detail: String },
    NoFeasibleAction { state: usize },
    FeasibleActionOutOfRange { state: usize, action: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyStateSpace => write!(f, "num_states must be positive"),
            Violation::EmptyActionSpace => write!(f, "num_actions must be positive"),
            Violation::ZeroHorizon => write!(f, "horizon must be at least 1"),
            Violation::Discount(g) => write!(f, "discount {g} outside [0, 1)"),
            Violation::InitialDist(d) => write!(f, "initial_dist is not a distribution: {d}"),
            Violation::Shape { field, expected, actual } => {
                write!(f, "{field} has length {actual}, expected {expected}")
            }
            Violation::RewardOutOfRange { state, action, next, value } => write!(
                f,
                "reward out of [0,1] at reward[{state}][{action}][{next}] = {value}"
            ),
            Violation::KernelRow { kernel, state, action, detail } => write!(
                f,
                "base_kernels[{kernel}][{state}][{action}] is not a distribution: {detail}"
            ),
            Violation::NoFeasibleAction { state } => {
                write!(f, "feasible_actions[{state}] is empty")
            }
            Violation::FeasibleActionOutOfRange { state, action } => {
                write!(f, "feasible_actions[{state}] lists unknown action {action}")
            }
        }
    }
}

/// Outcome of [`validate_spec`]: empty when every invariant holds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every structural and probabilistic invariant of a game description.
pub fn validate_spec(data: &GameSpecData) -> ValidationReport {
    let mut violations = Vec::new();
    let ns = data.num_states;
    let na = data.num_actions;
    if ns == 0 {
        violations.push(Violation::EmptyStateSpace);
    }
    if na == 0 {
        violations.push(Violation::EmptyActionSpace);
    }
    if data.horizon == 0 {
        violations.push(Violation::ZeroHorizon);
    }
    if !(0.0..1.0).contains(&data.discount) {
        violations.push(Violation::Discount(data.discount));
    }
    if data.initial_dist.len() != ns {
        violations.push(Violation::Shape {
            field: "initial_dist".into(),
            expected: ns,
            actual: data.initial_dist.len(),
        });
    } else if let Err(d) = check_simplex(&data.initial_dist) {
        violations.push(Violation::InitialDist(d));
    }

    let mut shape = |field: String, expected: usize, actual: usize| {
        if expected != actual {
            violations.push(Violation::Shape { field, expected, actual });
            false
        } else {
            true
        }
    };
    let mut reward_ok = shape("reward".into(), ns, data.reward.len());
    if reward_ok {
        for (s, per_action) in data.reward.iter().enumerate() {
            if !shape(format!("reward[{s}]"), na, per_action.len()) {
                reward_ok = false;
                continue;
            }
            for (a, row) in per_action.iter().enumerate() {
                reward_ok &= shape(format!("reward[{s}][{a}]"), ns, row.len());
            }
        }
    }
    let mut kernels_ok = shape("base_kernels".into(), na, data.base_kernels.len());
    if kernels_ok {
        for (b, kernel) in data.base_kernels.iter().enumerate() {
            if !shape(format!("base_kernels[{b}]"), ns, kernel.len()) {
                kernels_ok = false;
                continue;
            }
            for (s, per_action) in kernel.iter().enumerate() {
                if !shape(format!("base_kernels[{b}][{s}]"), na, per_action.len()) {
                    kernels_ok = false;
                    continue;
                }
                for (a, row) in per_action.iter().enumerate() {
                    kernels_ok &= shape(format!("base_kernels[{b}][{s}][{a}]"), ns, row.len());
                }
            }
        }
    }
    if let Some(feasible) = &data.feasible_actions {
        if shape("feasible_actions".into(), ns, feasible.len()) {
            for (s, actions) in feasible.iter().enumerate() {
                if actions.is_empty() {
                    violations.push(Violation::NoFeasibleAction { state: s });
                }
                for &a in actions.iter().filter(|&&a| a >= na) {
                    violations.push(Violation::FeasibleActionOutOfRange { state: s, action: a });
                }
            }
        }
    }

    if reward_ok {
        for (s, per_action) in data.reward.iter().enumerate() {
            for (a, row) in per_action.iter().enumerate() {
                for (next, &value) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&value) {
                        violations.push(Violation::RewardOutOfRange {
                            state: s,
                            action: a,
                            next,
                            value,
                        });
                    }
                }
            }
        }
    }
    if kernels_ok {
        for (b, kernel) in data.base_kernels.iter().enumerate() {
            for (s, per_action) in kernel.iter().enumerate() {
                for (a, row) in per_action.iter().enumerate() {
                    if let Err(detail) = check_simplex(row) {
                        violations.push(Violation::KernelRow {
                            kernel: b,
                            state: s,
                            action: a,
                            detail,
                        });
                    }
                }
            }
        }
    }
    ValidationReport { violations }
}

/// A validated game. Immutable; share freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    data: GameSpecData,
    initial: StateDist,
    // [s][a][s']
    reward: Vec<f64>,
    // [b][s][a][s']
    kernels: Vec<f64>,
    // [s][a]
    feasible: Vec<bool>,
}

impl GameSpec {
    pub fn new(data: GameSpecData) -> Result<Self> {
        let report = validate_spec(&data);
        if !report.is_ok() {
            return Err(Error::InvalidSpec(report));
        }
        let ns = data.num_states;
        let na = data.num_actions;
        let initial = StateDist::new(data.initial_dist.clone())?;
        let reward = data.reward.iter().flatten().flatten().copied().collect();
        let kernels = data
            .base_kernels
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .copied()
            .collect();
        let mut feasible = vec![data.feasible_actions.is_none(); ns * na];
        if let Some(lists) = &data.feasible_actions {
            for (s, actions) in lists.iter().enumerate() {
                for &a in actions {
                    feasible[s * na + a] = true;
                }
            }
        }
        Ok(Self {
            data,
            initial,
            reward,
            kernels,
            feasible,
        })
    }

    pub fn data(&self) -> &GameSpecData {
        &self.data
    }

    pub fn num_states(&self) -> usize {
        self.data.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.data.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.data.horizon
    }

    pub fn discount(&self) -> f64 {
        self.data.discount
    }

    pub fn initial_dist(&self) -> &StateDist {
        &self.initial
    }

    pub fn is_feasible(&self, state: usize, action: usize) -> bool {
        state < self.num_states()
            && action < self.num_actions()
            && self.feasible[state * self.num_actions() + action]
    }

    /// Row-major `[s][a]` feasibility mask.
    pub fn feasibility_mask(&self) -> &[bool] {
        &self.feasible
    }

    pub fn reward(&self, state: usize, action: usize, next: usize) -> f64 {
        let ns = self.num_states();
        self.reward[(state * self.num_actions() + action) * ns + next]
    }

    /// Base kernel row P_b(·|s,a).
    pub fn base_row(&self, kernel: usize, state: usize, action: usize) -> &[f64] {
        let ns = self.num_states();
        let na = self.num_actions();
        let start = ((kernel * ns + state) * na + action) * ns;
        &self.kernels[start..start + ns]
    }

    /// True when every base kernel is identical, so the dynamics ignore α.
    pub fn is_null_coupling(&self) -> bool {
        let block = self.num_states() * self.num_actions() * self.num_states();
        let first = &self.kernels[..block];
        self.kernels.chunks(block).all(|k| k == first)
    }

    fn check_state_action(&self, state: usize, action: usize) -> Result<()> {
        if state >= self.num_states() {
            return Err(Error::OutOfRange {
                what: "state",
                index: state,
                size: self.num_states(),
            });
        }
        if action >= self.num_actions() {
            return Err(Error::OutOfRange {
                what: "action",
                index: action,
                size: self.num_actions(),
            });
        }
        if !self.is_feasible(state, action) {
            return Err(Error::InfeasibleAction { state, action });
        }
        Ok(())
    }

    fn check_alpha(&self, alpha: &ActionDist) -> Result<()> {
        if alpha.len() != self.num_actions() {
            return Err(Error::DimensionMismatch {
                what: "action distribution length",
                expected: self.num_actions(),
                actual: alpha.len(),
            });
        }
        Ok(())
    }

    /// Writes p(·|s,a,α) into `out` without bounds or feasibility checks.
    pub(crate) fn mix_row_into(&self, state: usize, action: usize, alpha: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (b, &weight) in alpha.iter().enumerate() {
            if weight == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.base_row(b, state, action)) {
                *o += weight * p;
            }
        }
    }

    /// p(·|s,a,α) = Σ_b α(b)·P_b(·|s,a).
    pub fn transition_kernel(&self, state: usize, action: usize, alpha: &ActionDist) -> Result<Vec<f64>> {
        self.check_state_action(state, action)?;
        self.check_alpha(alpha)?;
        let mut row = vec![0.0; self.num_states()];
        self.mix_row_into(state, action, alpha.probs(), &mut row);
        Ok(row)
    }

    /// r̄(s,a,α) = Σ_{s'} p(s'|s,a,α)·r(s,a,s').
    pub fn expected_reward(&self, state: usize, action: usize, alpha: &ActionDist) -> Result<f64> {
        let row = self.transition_kernel(state, action, alpha)?;
        Ok(row
            .iter()
            .enumerate()
            .map(|(next, p)| p * self.reward(state, action, next))
            .sum())
    }

    /// Draws the next state from p(·|s,a,α) and returns it with its reward.
    pub fn sample_transition<R: Rng + ?Sized>(
        &self,
        state: usize,
        action: usize,
        alpha: &ActionDist,
        rng: &mut R,
    ) -> Result<(usize, f64)> {
        let row = self.transition_kernel(state, action, alpha)?;
        let next = sample_index(&row, rng);
        Ok((next, self.reward(state, action, next)))
    }

    /// Binds a per-step population action sequence, yielding a plannable model.
    pub fn with_alpha<'a>(&'a self, alpha: &'a [ActionDist]) -> Result<CoupledModel<'a>> {
        if alpha.len() != self.horizon() {
            return Err(Error::DimensionMismatch {
                what: "per-step action distributions",
                expected: self.horizon(),
                actual: alpha.len(),
            });
        }
        for a in alpha {
            self.check_alpha(a)?;
        }
        Ok(CoupledModel { spec: self, alpha })
    }
}

/// Draws an index from a categorical row by inverse CDF. The final index
/// absorbs any rounding slack.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// A finite-horizon tabular model with (possibly) step-dependent dynamics.
/// Steps are 0-based: `0..horizon()`.
pub trait StepModel {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn horizon(&self) -> usize;
    fn discount(&self) -> f64;
    fn is_feasible(&self, state: usize, action: usize) -> bool;
    /// Writes p(·|s,a) at `step` into `out` (length `num_states()`).
    fn transition_row(&self, step: usize, state: usize, action: usize, out: &mut [f64]);
    fn reward(&self, state: usize, action: usize, next: usize) -> f64;
}

/// The true game with the population action distribution fixed per step.
#[derive(Debug, Clone, Copy)]
pub struct CoupledModel<'a> {
    spec: &'a GameSpec,
    alpha: &'a [ActionDist],
}

impl CoupledModel<'_> {
    pub fn spec(&self) -> &GameSpec {
        self.spec
    }

    pub fn alpha(&self) -> &[ActionDist] {
        self.alpha
    }
}

impl StepModel for CoupledModel<'_> {
    fn num_states(&self) -> usize {
        self.spec.num_states()
    }
    fn num_actions(&self) -> usize {
        self.spec.num_actions()
    }
    fn horizon(&self) -> usize {
        self.spec.horizon()
    }
    fn discount(&self) -> f64 {
        self.spec.discount()
    }
    fn is_feasible(&self, state: usize, action: usize) -> bool {
        self.spec.is_feasible(state, action)
    }
    fn transition_row(&self, step: usize, state: usize, action: usize, out: &mut [f64]) {
        self.spec
            .mix_row_into(state, action, self.alpha[step].probs(), out)
    }
    fn reward(&self, state: usize, action: usize, next: usize) -> f64 {
        self.spec.reward(state, action, next)
    }
}
