//! Run artifacts: five CSV/JSON traces plus `run_meta.json`.
//!
//! Episodes and steps are 1-based in every file; states and actions are
//! 0-based. Floats are written in their shortest round-trip form.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use mfpsrl_core::equilibrium::{value_gap_trace_for_run, ValueGapTrace};
use mfpsrl_core::simulator::{RunResult, SimConfig};
use mfpsrl_core::{ActionDist, GameSpecData, Policy, StateDist};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const ALPHA_TRACE: &str = "alpha_trace.csv";
pub const STATE_TRACE: &str = "state_trace.csv";
pub const CONVERGENCE: &str = "convergence.json";
pub const VALUE_GAP: &str = "value_gap.csv";
pub const POLICY_FINAL: &str = "policy_final.csv";
pub const RUN_META: &str = "run_meta.json";

pub const ALL_FILES: [&str; 6] = [ALPHA_TRACE, STATE_TRACE, CONVERGENCE, VALUE_GAP, POLICY_FINAL, RUN_META];

/// Confidence level for the exported Azuma envelope.
pub const VALUE_GAP_DELTA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub version: String,
    pub generator: String,
    pub seed: u64,
    pub config: SimConfig,
    pub value_gap_delta: f64,
    pub game: GameSpecData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFile {
    /// 1-based episode after which α stays within ε; `null` if never.
    pub k_epsilon: Option<usize>,
    pub epsilon: f64,
    pub window: usize,
    /// Final-window average α̂, one row per step.
    pub final_alpha: Vec<Vec<f64>>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(|e| io_err(path, e))?;
    Ok(w)
}

fn finish_csv(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<(), CliError> {
    let mut inner = w.into_inner().map_err(|e| io_err(path, e))?;
    inner.flush().map_err(|e| io_err(path, e))
}

fn write_trace(path: &Path, index: &str, trace: &[Vec<&[f64]>]) -> Result<(), CliError> {
    let mut w = csv_writer(path, &["episode", "step", index, "probability"])?;
    for (k, steps) in trace.iter().enumerate() {
        for (j, probs) in steps.iter().enumerate() {
            for (i, p) in probs.iter().enumerate() {
                w.write_record([
                    (k + 1).to_string(),
                    (j + 1).to_string(),
                    i.to_string(),
                    p.to_string(),
                ])
                .map_err(|e| io_err(path, e))?;
            }
        }
    }
    finish_csv(path, w)
}

/// Writes all six artifacts. Returns the value-gap trace when models were retained.
pub fn export_results(run: &RunResult, meta: &RunMeta, dir: &Path) -> Result<Option<ValueGapTrace>, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let spec = mfpsrl_core::GameSpec::new(meta.game.clone())
        .map_err(|e| CliError::Runtime(format!("run metadata: {e}")))?;

    let alpha: Vec<Vec<&[f64]>> = run
        .alpha_trace
        .iter()
        .map(|ep| ep.iter().map(ActionDist::probs).collect())
        .collect();
    write_trace(&dir.join(ALPHA_TRACE), "action", &alpha)?;
    let states: Vec<Vec<&[f64]>> = run
        .state_trace
        .iter()
        .map(|ep| ep.iter().map(StateDist::probs).collect())
        .collect();
    write_trace(&dir.join(STATE_TRACE), "state", &states)?;

    let convergence = ConvergenceFile {
        k_epsilon: run.convergence.episode,
        epsilon: run.convergence.epsilon,
        window: run.convergence.window,
        final_alpha: run.convergence.final_alpha.iter().map(|a| a.probs().to_vec()).collect(),
    };
    write_json(&dir.join(CONVERGENCE), &convergence)?;

    let gap_path = dir.join(VALUE_GAP);
    let mut w = csv_writer(&gap_path, &["episode", "gap", "prefix_sum", "azuma_envelope"])?;
    let trace = if run.sampled_models.is_some() {
        let trace = value_gap_trace_for_run(run, &spec, meta.value_gap_delta)
            .map_err(|e| CliError::Runtime(format!("value gap: {e}")))?;
        for k in 0..trace.gaps.len() {
            w.write_record([
                (k + 1).to_string(),
                trace.gaps[k].to_string(),
                trace.prefix_sums[k].to_string(),
                trace.envelope[k].to_string(),
            ])
            .map_err(|e| io_err(&gap_path, e))?;
        }
        Some(trace)
    } else {
        None
    };
    finish_csv(&gap_path, w)?;

    let policy_path = dir.join(POLICY_FINAL);
    let mut w = csv_writer(&policy_path, &["state", "step", "action"])?;
    let policy = &run.final_policy;
    for s in 0..policy.num_states() {
        for j in 0..policy.horizon() {
            w.write_record([s.to_string(), (j + 1).to_string(), policy.action(s, j).to_string()])
                .map_err(|e| io_err(&policy_path, e))?;
        }
    }
    finish_csv(&policy_path, w)?;

    write_json(&dir.join(RUN_META), meta)?;
    Ok(trace)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

pub fn read_meta(dir: &Path) -> Result<RunMeta, CliError> {
    read_json(&dir.join(RUN_META))
}

pub fn read_convergence(dir: &Path) -> Result<ConvergenceFile, CliError> {
    read_json(&dir.join(CONVERGENCE))
}

fn csv_reader(path: &Path, header: &[&str]) -> Result<csv::Reader<File>, CliError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let found = r.headers().map_err(|e| io_err(path, e))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(io_err(path, format!("expected header {}", header.join(","))));
    }
    Ok(r)
}

fn field<T: std::str::FromStr>(path: &Path, row: &csv::StringRecord, col: usize) -> Result<T, CliError> {
    let line = row.position().map_or(0, |p| p.line());
    row.get(col)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| io_err(path, format!("line {line}: bad value in column {}", col + 1)))
}

/// Reads a trace file into `[episode][step][index]`, requiring every cell to be present.
fn read_trace(path: &Path, index: &str, dim: usize, horizon: usize) -> Result<Vec<Vec<Vec<f64>>>, CliError> {
    let mut r = csv_reader(path, &["episode", "step", index, "probability"])?;
    let mut cells: Vec<Vec<Vec<Option<f64>>>> = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| io_err(path, e))?;
        let k: usize = field(path, &row, 0)?;
        let j: usize = field(path, &row, 1)?;
        let i: usize = field(path, &row, 2)?;
        let p: f64 = field(path, &row, 3)?;
        if k == 0 || j == 0 || j > horizon || i >= dim {
            return Err(io_err(path, format!("index out of range: episode {k}, step {j}, {index} {i}")));
        }
        if cells.len() < k {
            cells.resize(k, vec![vec![None; dim]; horizon]);
        }
        let cell = &mut cells[k - 1][j - 1][i];
        if cell.replace(p).is_some() {
            return Err(io_err(path, format!("duplicate row: episode {k}, step {j}, {index} {i}")));
        }
    }
    cells
        .into_iter()
        .map(|steps| {
            steps
                .into_iter()
                .map(|row| row.into_iter().collect::<Option<Vec<f64>>>())
                .collect::<Option<Vec<_>>>()
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| io_err(path, "incomplete trace"))
}

pub fn read_alpha_trace(dir: &Path, num_actions: usize, horizon: usize) -> Result<Vec<Vec<ActionDist>>, CliError> {
    let path = dir.join(ALPHA_TRACE);
    read_trace(&path, "action", num_actions, horizon)?
        .into_iter()
        .map(|ep| ep.into_iter().map(ActionDist::new).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| io_err(&path, e))
}

pub fn read_state_trace(dir: &Path, num_states: usize, horizon: usize) -> Result<Vec<Vec<StateDist>>, CliError> {
    let path = dir.join(STATE_TRACE);
    read_trace(&path, "state", num_states, horizon)?
        .into_iter()
        .map(|ep| ep.into_iter().map(StateDist::new).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| io_err(&path, e))
}

pub fn read_policy(dir: &Path, num_states: usize, num_actions: usize, horizon: usize) -> Result<Policy, CliError> {
    let path = dir.join(POLICY_FINAL);
    let mut r = csv_reader(&path, &["state", "step", "action"])?;
    let mut table = vec![None; num_states * horizon];
    for row in r.records() {
        let row = row.map_err(|e| io_err(&path, e))?;
        let s: usize = field(&path, &row, 0)?;
        let j: usize = field(&path, &row, 1)?;
        let a: usize = field(&path, &row, 2)?;
        if s >= num_states || j == 0 || j > horizon || a >= num_actions {
            return Err(io_err(&path, format!("out of range: state {s}, step {j}, action {a}")));
        }
        table[(j - 1) * num_states + s] = Some(a);
    }
    let table: Vec<usize> = table
        .into_iter()
        .collect::<Option<_>>()
        .ok_or_else(|| io_err(&path, "policy table incomplete"))?;
    Ok(Policy::from_fn(num_states, num_actions, horizon, |s, j| table[j * num_states + s]))
}

/// Value-gap rows as written: (episode, gap, prefix_sum, azuma_envelope).
pub fn read_value_gap(dir: &Path) -> Result<Vec<(usize, f64, f64, f64)>, CliError> {
    let path = dir.join(VALUE_GAP);
    let mut r = csv_reader(&path, &["episode", "gap", "prefix_sum", "azuma_envelope"])?;
    r.records()
        .map(|row| {
            let row = row.map_err(|e| io_err(&path, e))?;
            Ok((
                field(&path, &row, 0)?,
                field(&path, &row, 1)?,
                field(&path, &row, 2)?,
                field(&path, &row, 3)?,
            ))
        })
        .collect()
}
