use std::io::Write;
use std::path::Path;
use std::time::Instant;

use mfpsrl_core::equilibrium::{exploitability, verify_mfe, MfeReport};
use mfpsrl_core::simulator::{final_window_states, run};
use mfpsrl_core::{ActionDist, GameSpec};

use crate::export::{self, RunMeta, VALUE_GAP_DELTA};
use crate::scenario::{Overrides, ScenarioFile};
use crate::CliError;

fn out_err(e: std::io::Error) -> CliError {
    CliError::Runtime(format!("writing output: {e}"))
}

fn fmt_probs(p: &[f64]) -> String {
    let cells: Vec<String> = p.iter().map(|v| v.to_string()).collect();
    format!("[{}]", cells.join(", "))
}

/// Loads the scenario, runs the simulation and writes the exports into `out_dir`.
pub fn cmd_run(scenario: &Path, out_dir: &Path, overrides: &Overrides, out: &mut dyn Write) -> Result<(), CliError> {
    if overrides.episodes == Some(0) {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }
    let file = ScenarioFile::read(scenario)?;
    let (spec, mut config) = file.build()?;
    if !overrides.is_empty() {
        config = file.sim.resolve(overrides);
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }

    let started = Instant::now();
    let result = run(&config, &spec).map_err(|e| CliError::Runtime(e.to_string()))?;
    let elapsed = started.elapsed();

    let meta = RunMeta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        generator: file.game.name().to_string(),
        seed: config.seed,
        config: config.clone(),
        value_gap_delta: VALUE_GAP_DELTA,
        game: spec.data().clone(),
    };
    let gap = export::export_results(&result, &meta, out_dir)?;
    let exploit = exploitability(&spec, &result.final_policy, &result.convergence.final_alpha)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    writeln!(out, "generator: {}", meta.generator).map_err(out_err)?;
    writeln!(out, "agents: {}", config.num_agents).map_err(out_err)?;
    writeln!(out, "episodes: {}", config.num_episodes).map_err(out_err)?;
    writeln!(out, "seed: {}", config.seed).map_err(out_err)?;
    match result.convergence.episode {
        Some(k) => writeln!(out, "k_epsilon: {k}"),
        None => writeln!(out, "k_epsilon: none"),
    }
    .map_err(out_err)?;
    for (j, a) in result.convergence.final_alpha.iter().enumerate() {
        writeln!(out, "final_alpha[{}]: {}", j + 1, fmt_probs(a.probs())).map_err(out_err)?;
    }
    writeln!(out, "exploitability: {exploit}").map_err(out_err)?;
    if let Some(gap) = gap {
        let (first, second) = gap.half_means();
        writeln!(out, "azuma_violations: {}", gap.violations()).map_err(out_err)?;
        writeln!(out, "value_gap_half_means: {first} {second}").map_err(out_err)?;
    }
    writeln!(out, "# elapsed_seconds: {:.3}", elapsed.as_secs_f64()).map_err(out_err)?;
    Ok(())
}

/// Everything `verify` reconstructs from a run directory.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub meta: RunMeta,
    pub spec: GameSpec,
    pub final_alpha: Vec<ActionDist>,
    pub epsilon: f64,
    pub window: usize,
    pub policy: mfpsrl_core::Policy,
    pub final_states: Vec<mfpsrl_core::StateDist>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Runtime(format!("{}: not a run directory", dir.display())));
    }
    let meta = export::read_meta(dir)?;
    let spec = GameSpec::new(meta.game.clone())
        .map_err(|e| CliError::Runtime(format!("{}: {e}", export::RUN_META)))?;
    let (ns, na, h) = (spec.num_states(), spec.num_actions(), spec.horizon());
    let conv = export::read_convergence(dir)?;
    let corrupt = |msg: String| CliError::Runtime(format!("{}: {msg}", export::CONVERGENCE));
    if conv.final_alpha.len() != h {
        return Err(corrupt(format!("expected {h} steps, found {}", conv.final_alpha.len())));
    }
    let final_alpha = conv
        .final_alpha
        .into_iter()
        .map(|row| {
            if row.len() != na {
                return Err(corrupt(format!("expected {na} actions per step")));
            }
            ActionDist::new(row).map_err(|e| corrupt(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let policy = export::read_policy(dir, ns, na, h)?;
    let state_trace = export::read_state_trace(dir, ns, h)?;
    if conv.window == 0 || conv.window > state_trace.len() {
        return Err(corrupt(format!(
            "window {} does not fit {} recorded episodes",
            conv.window,
            state_trace.len()
        )));
    }
    let final_states = final_window_states(&state_trace, conv.window)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", export::STATE_TRACE)))?;
    Ok(LoadedRun {
        meta,
        spec,
        final_alpha,
        epsilon: conv.epsilon,
        window: conv.window,
        policy,
        final_states,
    })
}

/// Checks the exported (π̂, α̂, f̂) for equilibrium; the tolerance defaults to the run's ε.
pub fn cmd_verify(run_dir: &Path, tol: Option<f64>, out: &mut dyn Write) -> Result<MfeReport, CliError> {
    if let Some(t) = tol {
        if t.is_nan() || t < 0.0 {
            return Err(CliError::Usage(format!("--tol must be non-negative, got {t}")));
        }
    }
    let loaded = load_run(run_dir)?;
    let tol = tol.unwrap_or(loaded.epsilon);
    let report = verify_mfe(
        &loaded.spec,
        &loaded.policy,
        &loaded.final_alpha,
        loaded.spec.initial_dist(),
        Some(&loaded.final_states),
        tol,
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(out, "{report}").map_err(out_err)?;
    if report.is_equilibrium {
        Ok(report)
    } else {
        Err(CliError::VerificationFailed)
    }
}
