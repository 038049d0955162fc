//! Ready-made games: seeded random instances and two small bundled scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GameSpec, GameSpecData};
use crate::error::Result;

fn normalized(weights: Vec<f64>) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

fn random_row(rng: &mut ChaCha8Rng, len: usize, sparsity: f64) -> Vec<f64> {
    let keep = rng.random_range(0..len);
    let weights = (0..len)
        .map(|i| {
            let w: f64 = rng.random_range(0.05..1.0);
            if i != keep && rng.random_bool(sparsity) {
                0.0
            } else {
                w
            }
        })
        .collect();
    normalized(weights)
}

/// A random game. Each kernel row zeroes entries with probability `sparsity`
/// (at least one entry survives); rewards are uniform on [0,1].
pub fn random(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    discount: f64,
    sparsity: f64,
    seed: u64,
) -> Result<GameSpec> {
    GameSpec::new(random_data(num_states, num_actions, horizon, discount, sparsity, seed))
}

pub fn random_data(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    discount: f64,
    sparsity: f64,
    seed: u64,
) -> GameSpecData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sparsity = sparsity.clamp(0.0, 1.0);
    let initial_dist = normalized((0..num_states).map(|_| rng.random_range(0.05..1.0)).collect());
    let reward = (0..num_states)
        .map(|_| {
            (0..num_actions)
                .map(|_| (0..num_states).map(|_| rng.random::<f64>()).collect())
                .collect()
        })
        .collect();
    let base_kernels = (0..num_actions)
        .map(|_| {
            (0..num_states)
                .map(|_| {
                    (0..num_actions)
                        .map(|_| random_row(&mut rng, num_states, sparsity))
                        .collect()
                })
                .collect()
        })
        .collect();
    GameSpecData {
        num_states,
        num_actions,
        horizon: horizon.max(1),
        discount,
        initial_dist,
        reward,
        base_kernels,
        feasible_actions: None,
    }
}

/// Same as [`random`] but every base kernel is a copy of the first, so the
/// game reduces to a single-agent MDP.
pub fn random_null_coupling(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    discount: f64,
    seed: u64,
) -> Result<GameSpec> {
    let mut data = random_data(num_states, num_actions, horizon, discount, 0.0, seed);
    let first = data.base_kernels[0].clone();
    data.base_kernels.iter_mut().for_each(|k| *k = first.clone());
    GameSpec::new(data)
}

/// Single-agent reference game (all base kernels equal).
///
/// States are stock levels 0..=2; action 0 harvests the current level
/// (paying 0.575, 0.875 or 0.975) and mostly clears the stock, action 1
/// invests (paying 0.45 per level reached and pushing the stock up). The optimal action is the same in every
/// state at each step: invest for the first four steps, harvest at the last.
pub fn stock_harvest() -> GameSpecData {
    let harvest_pay = [0.575, 0.875, 0.975];
    let harvest = [[1.0, 0.0, 0.0], [0.9, 0.1, 0.0], [0.7, 0.3, 0.0]];
    let invest = [[0.2, 0.6, 0.2], [0.05, 0.35, 0.6], [0.0, 0.1, 0.9]];
    let kernel: Vec<Vec<Vec<f64>>> = (0..3)
        .map(|s| vec![harvest[s].to_vec(), invest[s].to_vec()])
        .collect();
    let reward = (0..3)
        .map(|s| vec![vec![harvest_pay[s]; 3], vec![0.0, 0.45, 0.9]])
        .collect();
    GameSpecData {
        num_states: 3,
        num_actions: 2,
        horizon: 5,
        discount: 0.9,
        initial_dist: vec![0.5, 0.3, 0.2],
        reward,
        base_kernels: vec![kernel.clone(), kernel],
        feasible_actions: None,
    }
}

/// Security investment game.
///
/// States are security levels (0 compromised, 1 exposed, 2 secure); actions
/// are 0 = skip, 1 = invest. Landing in a better level pays more and
/// investing costs 0.1. When more of the population invests, attack
/// pressure falls and every agent's kernel shifts toward secure levels.
pub fn security_investment() -> GameSpecData {
    let level_value = [0.1, 0.55, 0.95];
    let cost = [0.0, 0.1];
    let reward = (0..3)
        .map(|_| {
            (0..2)
                .map(|a| level_value.iter().map(|v| v - cost[a]).collect())
                .collect()
        })
        .collect();
    // [b][s][a][s']; b = 0: population skips (high pressure), b = 1: invests.
    let base_kernels = vec![
        vec![
            vec![vec![0.85, 0.10, 0.05], vec![0.45, 0.35, 0.20]],
            vec![vec![0.60, 0.30, 0.10], vec![0.25, 0.45, 0.30]],
            vec![vec![0.35, 0.35, 0.30], vec![0.10, 0.30, 0.60]],
        ],
        vec![
            vec![vec![0.60, 0.30, 0.10], vec![0.20, 0.40, 0.40]],
            vec![vec![0.30, 0.50, 0.20], vec![0.05, 0.35, 0.60]],
            vec![vec![0.10, 0.30, 0.60], vec![0.00, 0.15, 0.85]],
        ],
    ];
    GameSpecData {
        num_states: 3,
        num_actions: 2,
        horizon: 5,
        discount: 0.9,
        initial_dist: vec![0.3, 0.5, 0.2],
        reward,
        base_kernels,
        feasible_actions: None,
    }
}

/// Demand response game.
///
/// States are local price tiers (0 low, 1 mid, 2 high); actions are
/// consumption levels 0..=2. Consumption pays a utility that is eroded by the
/// price tier reached. Higher population consumption pulls every agent's
/// kernel toward high-price tiers.
pub fn demand_response() -> GameSpecData {
    let price = [0.0, 0.5, 1.0];
    let reward = (0..3)
        .map(|_| {
            (0..3)
                .map(|a| {
                    let a = a as f64;
                    price.iter().map(|p| 0.3 + 0.25 * a - 0.2 * a * p).collect()
                })
                .collect()
        })
        .collect();
    let pull = [[0.6, 0.3, 0.1], [0.3, 0.4, 0.3], [0.1, 0.3, 0.6]];
    let base_kernels = (0..3)
        .map(|b| {
            (0..3)
                .map(|s| {
                    (0..3)
                        .map(|a| {
                            (0..3)
                                .map(|next| {
                                    let stay = if next == s { 0.5 } else { 0.0 };
                                    stay + 0.4 * pull[b][next] + 0.1 * pull[a][next]
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    GameSpecData {
        num_states: 3,
        num_actions: 3,
        horizon: 4,
        discount: 0.9,
        initial_dist: vec![0.4, 0.4, 0.2],
        reward,
        base_kernels,
        feasible_actions: None,
    }
}
