//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p mfpsrl-cli --test acceptance` (add `--release` for
//! representative timings).

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use mfpsrl_cli::export::ALL_FILES;
use mfpsrl_core::equilibrium::{exploitability, value_gap_trace_for_run, verify_mfe};
use mfpsrl_core::game::{generators, sample_index};
use mfpsrl_core::learner::init_belief;
use mfpsrl_core::mean_field::induced_action_dist;
use mfpsrl_core::planner::{
    backward_induction, brute_force_optimal, lower_myopic_policy, policy_value, DEFAULT_ENUMERATION_CAP,
};
use mfpsrl_core::simulator::{run, RunResult, SimConfig};
use mfpsrl_core::{l1_distance, ActionDist, GameSpec, Policy, StateDist, StepModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_alpha(rng: &mut ChaCha8Rng, num_actions: usize, horizon: usize) -> Vec<ActionDist> {
    (0..horizon)
        .map(|_| {
            let w: Vec<f64> = (0..num_actions).map(|_| rng.random_range(0.01..1.0)).collect();
            let t: f64 = w.iter().sum();
            ActionDist::new(w.iter().map(|x| x / t).collect()).unwrap()
        })
        .collect()
}

fn random_policy(rng: &mut ChaCha8Rng, ns: usize, na: usize, horizon: usize) -> Policy {
    Policy::from_fn(ns, na, horizon, |_, _| rng.random_range(0..na))
}

fn planner_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut outside = 0;
    for i in 0..200u64 {
        let discount = [0.0, 0.5, 0.9][(i % 3) as usize];
        let spec = generators::random(2, 2, 3, discount, 0.3, 1000 + i).unwrap();
        let alpha = random_alpha(&mut rng, 2, 3);
        let model = spec.with_alpha(&alpha).unwrap();
        let q = backward_induction(&model);
        let oracle = brute_force_optimal(&model, DEFAULT_ENUMERATION_CAP).unwrap();
        for s in 0..2 {
            worst = worst.max((q.best_value(0, s) - oracle.value.get(0, s)).abs());
        }
        if !oracle.optimal.contains(&lower_myopic_policy(&q)) {
            outside += 1;
        }
    }
    let elapsed = started.elapsed();
    outcome(
        worst <= 1e-12 && outside == 0 && elapsed < Duration::from_secs(10),
        format!(
            "200 instances: max |V - V_oracle| = {worst:e}, lower-myopic outside optimal set: {outside}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn bellman_residual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let ns = rng.random_range(1..=4);
        let na = rng.random_range(1..=3);
        let horizon = rng.random_range(1..=5);
        let discount = rng.random_range(0.0..1.0);
        let spec = generators::random(ns, na, horizon, discount, 0.4, 2000 + i).unwrap();
        let alpha = random_alpha(&mut rng, na, horizon);
        let model = spec.with_alpha(&alpha).unwrap();
        let policy = random_policy(&mut rng, ns, na, horizon);
        let v = policy_value(&model, &policy).unwrap();
        let mut row = vec![0.0; ns];
        for step in 0..horizon {
            for s in 0..ns {
                let a = policy.action(s, step);
                model.transition_row(step, s, a, &mut row);
                let mut rhs = 0.0;
                for (n, p) in row.iter().enumerate() {
                    let next = if step + 1 < horizon { v.get(step + 1, n) } else { 0.0 };
                    rhs += p * (model.reward(s, a, n) + discount * next);
                }
                worst = worst.max((v.get(step, s) - rhs).abs());
            }
        }
    }
    outcome(worst < 1e-12, format!("100 triples: max Bellman residual = {worst:e}"))
}

fn reference_config(seed: u64, retain_models: bool) -> SimConfig {
    SimConfig {
        num_agents: 50,
        num_episodes: 300,
        seed,
        epsilon: 0.05,
        window: 10,
        prior_strength: 1.0,
        retain_models,
        ..SimConfig::default()
    }
}

fn single_agent_reduction() -> Outcome {
    let spec = GameSpec::new(generators::stock_harvest()).unwrap();
    assert!(spec.is_null_coupling());
    let started = Instant::now();
    let result = run(&reference_config(0, false), &spec).unwrap();
    let exploit = exploitability(&spec, &result.final_policy, &result.convergence.final_alpha).unwrap();
    let report = verify_mfe(
        &spec,
        &result.final_policy,
        &result.convergence.final_alpha,
        spec.initial_dist(),
        Some(&result.final_states),
        0.05,
    )
    .unwrap();
    let elapsed = started.elapsed();
    let k = result.convergence.episode;
    outcome(
        k.is_some() && exploit <= 0.05 && report.is_equilibrium && elapsed < Duration::from_secs(60),
        format!(
            "K_eps = {k:?}, exploitability = {exploit:e}, MFE at 0.05: {} (alpha residual {:e}), {:.2}s",
            report.is_equilibrium,
            report.induced_alpha_residual,
            elapsed.as_secs_f64()
        ),
    )
}

fn coupled_convergence() -> Outcome {
    let spec = GameSpec::new(generators::security_investment()).unwrap();
    let gamma = spec.discount();
    let value_scale = (1.0 - gamma.powi(spec.horizon() as i32)) / (1.0 - gamma);
    let started = Instant::now();
    let mut converged = 0;
    let mut exploit_sum = 0.0;
    for seed in 0..20 {
        let config = SimConfig {
            num_agents: 100,
            num_episodes: 500,
            seed,
            epsilon: 0.1,
            window: 10,
            ..SimConfig::default()
        };
        let result = run(&config, &spec).unwrap();
        if result.convergence.episode.is_some() {
            converged += 1;
            exploit_sum += exploitability(&spec, &result.final_policy, &result.convergence.final_alpha).unwrap();
        }
    }
    let elapsed = started.elapsed();
    let mean = if converged > 0 { exploit_sum / converged as f64 } else { f64::INFINITY };
    let bound = 0.1 * value_scale;
    outcome(
        converged >= 18 && mean <= bound && elapsed < Duration::from_secs(300),
        format!(
            "{converged}/20 seeds converged, mean exploitability = {mean:e} (bound {bound:.4}), {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn posterior_concentration() -> Outcome {
    let truth = [0.3, 0.7];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut belief = init_belief(2, 1, 1.0).unwrap();
    let mut errors = Vec::new();
    for n in 1..=10_000 {
        belief.update(0, 0, 0.0, sample_index(&truth, &mut rng)).unwrap();
        if n == 100 || n == 10_000 {
            errors.push(l1_distance(&belief.posterior_mean(0, 0).unwrap(), &truth).unwrap());
        }
    }
    let (small, large) = (errors[0], errors[1]);
    let ratio = large / small;
    outcome(
        large <= 0.05 && ratio <= 0.25,
        format!("error(1e2) = {small:.5}, error(1e4) = {large:.5}, ratio = {ratio:.4}"),
    )
}

fn value_gap_diagnostic() -> Outcome {
    let spec = GameSpec::new(generators::stock_harvest()).unwrap();
    let mut within = 0;
    let mut decreasing = 0;
    for seed in 0..20 {
        let result: RunResult = run(&reference_config(seed, true), &spec).unwrap();
        let trace = value_gap_trace_for_run(&result, &spec, 0.05).unwrap();
        if trace.violations() == 0 {
            within += 1;
        }
        let (first, second) = trace.half_means();
        if second < first {
            decreasing += 1;
        }
    }
    outcome(
        within >= 19 && decreasing >= 18,
        format!("envelope respected {within}/20, final-half mean below first-half {decreasing}/20"),
    )
}

fn determinism() -> Outcome {
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/stock_harvest.toml");
    let tmp = tempfile::tempdir().unwrap();
    let mut stdouts = Vec::new();
    for name in ["a", "b"] {
        let output = Command::new(env!("CARGO_BIN_EXE_mfpsrl"))
            .args(["run", "--retain-models", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(tmp.path().join(name))
            .output()
            .unwrap();
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
        let text = String::from_utf8(output.stdout).unwrap();
        stdouts.push(text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n"));
    }
    let differing: Vec<&str> = ALL_FILES
        .into_iter()
        .filter(|f| fs::read(tmp.path().join("a").join(f)).unwrap() != fs::read(tmp.path().join("b").join(f)).unwrap())
        .collect();
    outcome(
        differing.is_empty() && stdouts[0] == stdouts[1],
        format!(
            "{} artifacts compared, differing: {differing:?}, stdout identical: {}",
            ALL_FILES.len(),
            stdouts[0] == stdouts[1]
        ),
    )
}

fn induced_alpha_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad_sum = 0;
    let mut bad_point = 0;
    for _ in 0..1000 {
        let ns = rng.random_range(1..=6);
        let na = rng.random_range(1..=4);
        let horizon = rng.random_range(1..=4);
        let policy = random_policy(&mut rng, ns, na, horizon);
        let step = rng.random_range(0..horizon);
        // Dyadic masses keep every partial sum exact, so "sums to 1" is tested bit-for-bit.
        let mut ticks = vec![0u32; ns];
        for _ in 0..1024 {
            ticks[rng.random_range(0..ns)] += 1;
        }
        let f = StateDist::new(ticks.iter().map(|&t| t as f64 / 1024.0).collect()).unwrap();
        let alpha = induced_action_dist(&policy, &f, step).unwrap();
        if alpha.probs().iter().sum::<f64>() != 1.0 {
            bad_sum += 1;
        }
        let s = rng.random_range(0..ns);
        let point = induced_action_dist(&policy, &StateDist::point_mass(ns, s).unwrap(), step).unwrap();
        if point != ActionDist::point_mass(na, policy.action(s, step)).unwrap() {
            bad_point += 1;
        }
    }
    outcome(
        bad_sum == 0 && bad_point == 0,
        format!("1000 pairs: sum != 1 in {bad_sum}, point mass mismatch in {bad_point}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("planner oracle equivalence", planner_oracle),
        ("policy-evaluation Bellman residual", bellman_residual),
        ("single-agent reduction", single_agent_reduction),
        ("coupled-game convergence", coupled_convergence),
        ("posterior concentration", posterior_concentration),
        ("value-gap diagnostic", value_gap_diagnostic),
        ("determinism", determinism),
        ("induced action distribution identity", induced_alpha_identity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("{tag} criterion {} ({name}): {}", i + 1, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
