use mfpsrl_core::equilibrium::{
    azuma_envelope, best_response_policy, exploitability, value_gap_trace, value_gap_trace_for_run,
    verify_mfe,
};
use mfpsrl_core::game::generators;
use mfpsrl_core::learner::SampledModel;
use mfpsrl_core::mean_field::{forward_state_flow, induced_action_dist};
use mfpsrl_core::planner::{brute_force_optimal, policy_value, DEFAULT_ENUMERATION_CAP};
use mfpsrl_core::simulator::{run, SimConfig};
use mfpsrl_core::{ActionDist, Error, GameSpec, GameSpecData, Policy};
use proptest::prelude::*;

fn normalize(w: &[f64]) -> ActionDist {
    let t: f64 = w.iter().sum();
    ActionDist::new(w.iter().map(|x| x / t).collect()).unwrap()
}

/// Coupled random game where `dominant` pays 1 and every other action pays 0.
fn dominant_data(dominant: usize, horizon: usize, discount: f64) -> GameSpecData {
    let mut data = generators::random_data(3, 2, horizon, discount, 0.3, 17);
    for per_action in data.reward.iter_mut() {
        for (a, row) in per_action.iter_mut().enumerate() {
            row.iter_mut().for_each(|r| *r = if a == dominant { 1.0 } else { 0.0 });
        }
    }
    data
}

/// Population distribution that a policy induces on a null-coupling game.
fn self_consistent_alpha(spec: &GameSpec, policy: &Policy) -> Vec<ActionDist> {
    let any_alpha = vec![ActionDist::uniform(spec.num_actions()).unwrap(); spec.horizon()];
    let flow = forward_state_flow(spec, policy, &any_alpha, spec.initial_dist()).unwrap();
    flow.iter()
        .enumerate()
        .map(|(j, f)| induced_action_dist(policy, f, j).unwrap())
        .collect()
}

#[test]
fn dominant_best_response_ignores_alpha() {
    let spec = GameSpec::new(dominant_data(1, 3, 0.6)).unwrap();
    for w in [[1.0, 0.0], [0.0, 1.0], [0.3, 0.7]] {
        let alpha = vec![normalize(&w); 3];
        let (policy, q) = best_response_policy(&spec, &alpha).unwrap();
        assert_eq!(policy, Policy::from_fn(3, 2, 3, |_, _| 1));
        assert!(policy.check_against(&spec).is_ok());
        assert_eq!(q.horizon(), 3);
    }
}

#[test]
fn best_response_is_in_enumerated_optimal_set() {
    for seed in 0..30u64 {
        let spec = generators::random(2, 2, 3, 0.7, 0.2, seed).unwrap();
        let alpha: Vec<ActionDist> = (0..3)
            .map(|j| normalize(&[1.0 + (seed + j) as f64 % 3.0, 1.0]))
            .collect();
        let (policy, _) = best_response_policy(&spec, &alpha).unwrap();
        let brute =
            brute_force_optimal(&spec.with_alpha(&alpha).unwrap(), DEFAULT_ENUMERATION_CAP).unwrap();
        assert!(brute.optimal.contains(&policy), "seed {seed}");
    }
}

#[test]
fn null_coupling_best_response_independent_of_alpha() {
    let spec = generators::random_null_coupling(3, 3, 4, 0.9, 2).unwrap();
    let a = vec![ActionDist::point_mass(3, 0).unwrap(); 4];
    let b = vec![normalize(&[0.2, 0.5, 0.3]); 4];
    assert_eq!(
        best_response_policy(&spec, &a).unwrap().0,
        best_response_policy(&spec, &b).unwrap().0
    );
}

#[test]
fn exact_solution_of_reference_game_is_an_equilibrium() {
    let spec = GameSpec::new(generators::stock_harvest()).unwrap();
    let uniform = vec![ActionDist::uniform(2).unwrap(); 5];
    let model = spec.with_alpha(&uniform).unwrap();
    let brute = brute_force_optimal(&model, DEFAULT_ENUMERATION_CAP).unwrap();
    assert_eq!(brute.optimal.len(), 1, "reference game has a unique optimum");
    let optimum = brute.optimal[0].clone();
    assert_eq!(optimum, Policy::from_fn(3, 2, 5, |_, j| usize::from(j < 4)));

    let alpha = self_consistent_alpha(&spec, &optimum);
    let report = verify_mfe(&spec, &optimum, &alpha, spec.initial_dist(), None, 1e-9).unwrap();
    assert!(report.is_equilibrium, "{report}");
    assert!(report.policy_in_best_response_set);
    assert!(report.policy_gap.abs() <= 1e-12);
    assert!(report.induced_alpha_residual <= 1e-12);
    assert_eq!(report.state_flow_residual, 0.0);

    let observed = report.state_flow.clone();
    let again = verify_mfe(&spec, &optimum, &alpha, spec.initial_dist(), Some(&observed), 1e-9).unwrap();
    assert_eq!(again.state_flow_residual, 0.0);
}

#[test]
fn suboptimal_policy_fails_with_exact_gap() {
    let spec = GameSpec::new(generators::stock_harvest()).unwrap();
    let optimum = Policy::from_fn(3, 2, 5, |_, j| usize::from(j < 4));
    let lazy = Policy::from_fn(3, 2, 5, |_, _| 0);
    let alpha = self_consistent_alpha(&spec, &lazy);
    let model = spec.with_alpha(&alpha).unwrap();
    let v_opt = policy_value(&model, &optimum).unwrap();
    let v_lazy = policy_value(&model, &lazy).unwrap();
    let mut expected: f64 = 0.0;
    for j in 0..5 {
        for s in 0..3 {
            expected = expected.max(v_opt.get(j, s) - v_lazy.get(j, s));
        }
    }
    let report = verify_mfe(&spec, &lazy, &alpha, spec.initial_dist(), None, 1e-9).unwrap();
    assert!(expected > 0.1);
    assert!((report.policy_gap - expected).abs() < 1e-12);
    assert!(!report.policy_in_best_response_set);
    assert!(!report.is_equilibrium);
    assert!(report.induced_alpha_residual <= 1e-12);
}

#[test]
fn inconsistent_alpha_fails() {
    let spec = GameSpec::new(generators::stock_harvest()).unwrap();
    let optimum = Policy::from_fn(3, 2, 5, |_, j| usize::from(j < 4));
    let mut alpha = self_consistent_alpha(&spec, &optimum);
    let swapped: Vec<f64> = alpha[0].probs().iter().rev().copied().collect();
    alpha[0] = ActionDist::new(swapped).unwrap();
    let report = verify_mfe(&spec, &optimum, &alpha, spec.initial_dist(), None, 1e-9).unwrap();
    assert!((report.induced_alpha_residual - 2.0).abs() < 1e-12);
    assert!(!report.is_equilibrium);
}

#[test]
fn verdict_is_monotone_in_tolerance() {
    let spec = GameSpec::new(generators::security_investment()).unwrap();
    let policy = Policy::from_fn(3, 2, 5, |s, j| (s + j) % 2);
    let alpha = vec![normalize(&[0.4, 0.6]); 5];
    let mut passed = false;
    for tol in [0.0, 1e-6, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0] {
        let ok = verify_mfe(&spec, &policy, &alpha, spec.initial_dist(), None, tol)
            .unwrap()
            .is_equilibrium;
        assert!(!passed || ok, "passed at a smaller tolerance but failed at {tol}");
        passed |= ok;
    }
    assert!(passed);
}

#[test]
fn exploitability_examples() {
    let spec = GameSpec::new(generators::demand_response()).unwrap();
    let alpha = vec![normalize(&[1.0, 2.0, 3.0]); 4];
    let (best, _) = best_response_policy(&spec, &alpha).unwrap();
    assert!(exploitability(&spec, &best, &alpha).unwrap().abs() <= 1e-12);

    let spec = GameSpec::new(dominant_data(1, 1, 0.0)).unwrap();
    let alpha = vec![ActionDist::uniform(2).unwrap()];
    let dominated = Policy::from_fn(3, 2, 1, |_, _| 0);
    assert_eq!(exploitability(&spec, &dominated, &alpha).unwrap(), 1.0);
}

#[test]
fn value_gap_vanishes_on_true_model() {
    let spec = GameSpec::new(generators::stock_harvest()).unwrap();
    let alpha = vec![ActionDist::uniform(2).unwrap(); 5];
    let (best, _) = best_response_policy(&spec, &alpha).unwrap();
    let truth = SampledModel::from_spec(&spec, &alpha[0]).unwrap();
    let trace = value_gap_trace(&spec, &alpha, &vec![truth; 12], &vec![best; 12], 0.05).unwrap();
    assert!(trace.gaps.iter().all(|g| g.abs() <= 1e-12));
    assert_eq!(trace.violations(), 0);
    assert_eq!(trace.envelope[3], azuma_envelope(5, 4, 0.05));
    assert!((trace.envelope[0] - 5.0 * (2.0 * (20.0f64).ln()).sqrt()).abs() < 1e-12);
}

#[test]
fn value_gap_requires_retained_models() {
    let spec = GameSpec::new(generators::stock_harvest()).unwrap();
    let cfg = SimConfig { num_agents: 3, num_episodes: 2, window: 1, ..SimConfig::default() };
    let result = run(&cfg, &spec).unwrap();
    assert_eq!(
        value_gap_trace_for_run(&result, &spec, 0.05).unwrap_err(),
        Error::ModelsNotRetained
    );
    let alpha = vec![ActionDist::uniform(2).unwrap(); 5];
    assert!(value_gap_trace(&spec, &alpha, &[], &[], 1.5).is_err());
}

#[test]
fn value_gap_on_learning_run() {
    let spec = GameSpec::new(generators::stock_harvest()).unwrap();
    let cfg = SimConfig {
        num_agents: 50,
        num_episodes: 300,
        seed: 0,
        epsilon: 0.05,
        window: 10,
        retain_models: true,
        ..SimConfig::default()
    };
    let result = run(&cfg, &spec).unwrap();
    assert!(result.convergence.episode.is_some());
    let trace = value_gap_trace_for_run(&result, &spec, 0.05).unwrap();
    assert_eq!(trace.gaps.len(), 300);
    assert!(trace.gaps.iter().all(|g| (0.0..=5.0).contains(g)));
    let cesaro = trace.cesaro();
    let half = cesaro.len() / 2;
    assert!(
        cesaro[half..].windows(2).all(|w| w[1] <= w[0]),
        "running average rose in the final half"
    );
    let (first, second) = trace.half_means();
    assert!(second < first);
}

proptest! {
    #[test]
    fn exploitability_nonnegative(
        seed in any::<u64>(),
        actions in proptest::collection::vec(0usize..2, 9),
        w in proptest::collection::vec(0.01f64..1.0, 2),
    ) {
        let spec = generators::random(3, 2, 3, 0.8, 0.3, seed).unwrap();
        let policy = Policy::from_fn(3, 2, 3, |s, j| actions[j * 3 + s]);
        let alpha = vec![normalize(&w); 3];
        prop_assert!(exploitability(&spec, &policy, &alpha).unwrap() >= -1e-12);
        let (best, _) = best_response_policy(&spec, &alpha).unwrap();
        prop_assert!(best.check_against(&spec).is_ok());
    }
}
