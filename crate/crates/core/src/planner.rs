//! Finite-horizon dynamic programming: backward induction, lower-myopic
//! policy extraction, exact policy evaluation, and an enumeration oracle.
//!
//! Steps are 0-based throughout (`0..horizon`). The terminal value after the
//! last step is zero, so the last step earns only its expected immediate
//! reward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, StepModel};

/// Default ceiling on the number of policies [`brute_force_optimal`] enumerates.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Value comparisons inside the enumeration oracle use this slack.
pub const ORACLE_TOL: f64 = 1e-12;

/// A deterministic oblivious policy: one action per (state, step).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    // [step][state]
    actions: Vec<usize>,
}

impl Policy {
    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        mut f: impl FnMut(usize, usize) -> usize,
    ) -> Self {
        let mut actions = Vec::with_capacity(num_states * horizon);
        for step in 0..horizon {
            for s in 0..num_states {
                actions.push(f(s, step));
            }
        }
        Self {
            num_states,
            num_actions,
            horizon,
            actions,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn action(&self, state: usize, step: usize) -> usize {
        self.actions[step * self.num_states + state]
    }

    /// Actions in `[step][state]` order.
    pub fn as_slice(&self) -> &[usize] {
        &self.actions
    }

    fn check(
        &self,
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        feasible: impl Fn(usize, usize) -> bool,
    ) -> Result<()> {
        for (what, expected, actual) in [
            ("policy states", num_states, self.num_states),
            ("policy actions", num_actions, self.num_actions),
            ("policy horizon", horizon, self.horizon),
        ] {
            if expected != actual {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    actual,
                });
            }
        }
        for step in 0..horizon {
            for s in 0..num_states {
                let a = self.action(s, step);
                if a >= num_actions || !feasible(s, a) {
                    return Err(Error::InfeasibleAction {
                        state: s,
                        action: a,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn check_against(&self, spec: &GameSpec) -> Result<()> {
        self.check(
            spec.num_states(),
            spec.num_actions(),
            spec.horizon(),
            |s, a| spec.is_feasible(s, a),
        )
    }

    pub fn check_against_model<M: StepModel>(&self, model: &M) -> Result<()> {
        self.check(
            model.num_states(),
            model.num_actions(),
            model.horizon(),
            |s, a| model.is_feasible(s, a),
        )
    }
}

/// Optimal action values Q_j(s,a) plus the feasibility mask they were computed under.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    // [step][state][action]; infeasible entries are 0 and never selected
    values: Vec<f64>,
    // [state][action]
    feasible: Vec<bool>,
}

impl QTable {
    /// Builds a table from explicit values laid out `[step][state][action]`.
    /// All actions are feasible.
    pub fn from_values(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let expected = num_states * num_actions * horizon;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "Q-table entries",
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            values,
            feasible: vec![true; num_states * num_actions],
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn get(&self, step: usize, state: usize, action: usize) -> f64 {
        self.values[(step * self.num_states + state) * self.num_actions + action]
    }

    pub fn is_feasible(&self, state: usize, action: usize) -> bool {
        self.feasible[state * self.num_actions + action]
    }

    /// Smallest feasible action index attaining the maximum.
    pub fn best_action(&self, step: usize, state: usize) -> usize {
        let mut best = None;
        for a in 0..self.num_actions {
            if !self.is_feasible(state, a) {
                continue;
            }
            let q = self.get(step, state, a);
            match best {
                Some((_, v)) if q <= v => {}
                _ => best = Some((a, q)),
            }
        }
        best.map(|(a, _)| a).unwrap_or(0)
    }

    pub fn best_value(&self, step: usize, state: usize) -> f64 {
        self.get(step, state, self.best_action(step, state))
    }
}

/// V_j(s) for each step; the terminal value is implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    num_states: usize,
    horizon: usize,
    // [step][state]
    values: Vec<f64>,
}

impl ValueTable {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// V at `step`; `step == horizon` returns the terminal zero.
    pub fn get(&self, step: usize, state: usize) -> f64 {
        if step == self.horizon {
            0.0
        } else {
            self.values[step * self.num_states + state]
        }
    }

    pub fn step(&self, step: usize) -> &[f64] {
        &self.values[step * self.num_states..(step + 1) * self.num_states]
    }
}

/// r̄(s,a) + γ·Σ_{s'} p(s'|s,a)·next(s'), with `next = None` at the last step.
pub(crate) fn backup<M: StepModel>(
    model: &M,
    step: usize,
    state: usize,
    action: usize,
    next: Option<&[f64]>,
    row: &mut [f64],
) -> f64 {
    model.transition_row(step, state, action, row);
    let immediate: f64 = row
        .iter()
        .enumerate()
        .map(|(s2, p)| p * model.reward(state, action, s2))
        .sum();
    match next {
        None => immediate,
        Some(v) => {
            let future: f64 = row.iter().zip(v).map(|(p, v)| p * v).sum();
            immediate + model.discount() * future
        }
    }
}

/// Exact optimal finite-horizon Q-table:
/// Q_last(s,a) = r̄(s,a); Q_j(s,a) = r̄(s,a) + γ Σ p(s'|s,a)·max_a' Q_{j+1}(s',a').
pub fn backward_induction<M: StepModel>(model: &M) -> QTable {
    let ns = model.num_states();
    let na = model.num_actions();
    let horizon = model.horizon();
    let feasible: Vec<bool> = (0..ns)
        .flat_map(|s| (0..na).map(move |a| (s, a)))
        .map(|(s, a)| model.is_feasible(s, a))
        .collect();
    let mut q = QTable {
        num_states: ns,
        num_actions: na,
        horizon,
        values: vec![0.0; horizon * ns * na],
        feasible,
    };
    let mut row = vec![0.0; ns];
    let mut next_v: Option<Vec<f64>> = None;
    for step in (0..horizon).rev() {
        for s in 0..ns {
            for a in 0..na {
                if !q.is_feasible(s, a) {
                    continue;
                }
                q.values[(step * ns + s) * na + a] =
                    backup(model, step, s, a, next_v.as_deref(), &mut row);
            }
        }
        next_v = Some((0..ns).map(|s| q.best_value(step, s)).collect());
    }
    q
}

/// Greedy policy with ties broken to the smallest action index.
pub fn lower_myopic_policy(q: &QTable) -> Policy {
    Policy::from_fn(q.num_states, q.num_actions, q.horizon, |s, step| {
        q.best_action(step, s)
    })
}

/// Exact evaluation of `policy` by backward recursion.
pub fn policy_value<M: StepModel>(model: &M, policy: &Policy) -> Result<ValueTable> {
    policy.check_against_model(model)?;
    Ok(policy_value_unchecked(model, policy))
}

pub(crate) fn policy_value_unchecked<M: StepModel>(model: &M, policy: &Policy) -> ValueTable {
    let ns = model.num_states();
    let horizon = model.horizon();
    let mut values = vec![0.0; horizon * ns];
    let mut row = vec![0.0; ns];
    for step in (0..horizon).rev() {
        let (head, tail) = values.split_at_mut((step + 1) * ns);
        let next = (step + 1 < horizon).then(|| &tail[..ns]);
        for s in 0..ns {
            head[step * ns + s] = backup(model, step, s, policy.action(s, step), next, &mut row);
        }
    }
    ValueTable {
        num_states: ns,
        horizon,
        values,
    }
}

/// Result of exhaustive policy enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceOptimum {
    /// Entrywise maximum of V_π over all enumerated policies.
    pub value: ValueTable,
    /// Every policy within [`ORACLE_TOL`] of `value` at all (state, step),
    /// in lexicographic order of `Policy::as_slice`.
    pub optimal: Vec<Policy>,
}

/// Enumerates every deterministic oblivious policy, evaluating each exactly.
pub fn brute_force_optimal<M: StepModel>(model: &M, cap: u128) -> Result<BruteForceOptimum> {
    let ns = model.num_states();
    let na = model.num_actions();
    let horizon = model.horizon();
    let choices: Vec<Vec<usize>> = (0..ns)
        .map(|s| (0..na).filter(|&a| model.is_feasible(s, a)).collect())
        .collect();
    let count = (0..horizon)
        .flat_map(|_| choices.iter())
        .try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
        .unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::EnumerationCap { count, cap });
    }

    // digit k = step * ns + state, most significant first
    let for_each_policy = |mut visit: Box<dyn FnMut(&Policy) + '_>| {
        let slots = horizon * ns;
        let mut digits = vec![0usize; slots];
        loop {
            let policy = Policy::from_fn(ns, na, horizon, |s, step| {
                choices[s][digits[step * ns + s]]
            });
            visit(&policy);
            let mut k = slots;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                digits[k] += 1;
                if digits[k] < choices[k % ns].len() {
                    break;
                }
                digits[k] = 0;
            }
        }
    };

    let mut best = vec![f64::NEG_INFINITY; horizon * ns];
    for_each_policy(Box::new(|policy| {
        let v = policy_value_unchecked(model, policy);
        for (b, x) in best.iter_mut().zip(&v.values) {
            *b = b.max(*x);
        }
    }));
    let mut optimal = Vec::new();
    for_each_policy(Box::new(|policy| {
        let v = policy_value_unchecked(model, policy);
        if v.values.iter().zip(&best).all(|(x, b)| *x >= b - ORACLE_TOL) {
            optimal.push(policy.clone());
        }
    }));
    Ok(BruteForceOptimum {
        value: ValueTable {
            num_states: ns,
            horizon,
            values: best,
        },
        optimal,
    })
}
