//! Scenario files: a `[game]` table (explicit or generated) plus a `[sim]` table.
//!
//! ```toml
//! [game]
//! generator = "security_investment"
//!
//! [sim]
//! agents = 100
//! episodes = 500
//! seed = 7
//! epsilon = 0.1
//! ```

use std::fs;
use std::path::Path;

use mfpsrl_core::game::generators;
use mfpsrl_core::simulator::{SimConfig, DEFAULT_EPSILON, DEFAULT_WINDOW};
use mfpsrl_core::{Error, GameSpec, GameSpecData};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GameSource {
    Explicit(GameSpecData),
    Random {
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        discount: f64,
        seed: u64,
        #[serde(default)]
        sparsity: f64,
    },
    SecurityInvestment,
    DemandResponse,
    StockHarvest,
}

impl GameSource {
    pub fn name(&self) -> &'static str {
        match self {
            GameSource::Explicit(_) => "explicit",
            GameSource::Random { .. } => "random",
            GameSource::SecurityInvestment => "security_investment",
            GameSource::DemandResponse => "demand_response",
            GameSource::StockHarvest => "stock_harvest",
        }
    }

    pub fn data(&self) -> Result<GameSpecData, CliError> {
        Ok(match self {
            GameSource::Explicit(data) => data.clone(),
            GameSource::Random {
                num_states,
                num_actions,
                horizon,
                discount,
                seed,
                sparsity,
            } => {
                if *num_states == 0 || *num_actions == 0 || *horizon == 0 {
                    return Err(CliError::Scenario(
                        "game: random generator needs positive num_states, num_actions and horizon".into(),
                    ));
                }
                if !(0.0..=1.0).contains(sparsity) {
                    return Err(CliError::Scenario(format!(
                        "game.sparsity must lie in [0,1], got {sparsity}"
                    )));
                }
                generators::random_data(*num_states, *num_actions, *horizon, *discount, *sparsity, *seed)
            }
            GameSource::SecurityInvestment => generators::security_investment(),
            GameSource::DemandResponse => generators::demand_response(),
            GameSource::StockHarvest => generators::stock_harvest(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub agents: usize,
    pub episodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Defaults to min(10, episodes).
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default = "default_prior")]
    pub prior_strength: f64,
    #[serde(default)]
    pub reward_learning: bool,
    #[serde(default)]
    pub carry_over: bool,
    #[serde(default)]
    pub retain_models: bool,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_prior() -> f64 {
    1.0
}

/// Command-line overrides layered on top of the `[sim]` table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub episodes: Option<usize>,
    pub agents: Option<usize>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub window: Option<usize>,
    pub retain_models: bool,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        *self == Overrides::default()
    }
}

impl SimSection {
    pub fn resolve(&self, overrides: &Overrides) -> SimConfig {
        let episodes = overrides.episodes.unwrap_or(self.episodes);
        let window = overrides
            .window
            .or(self.window)
            .unwrap_or_else(|| DEFAULT_WINDOW.min(episodes).max(1));
        SimConfig {
            num_agents: overrides.agents.unwrap_or(self.agents),
            num_episodes: episodes,
            seed: overrides.seed.unwrap_or(self.seed),
            epsilon: overrides.epsilon.unwrap_or(self.epsilon),
            window,
            prior_strength: self.prior_strength,
            reward_learning: self.reward_learning,
            carry_over_states: self.carry_over,
            retain_models: self.retain_models || overrides.retain_models,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub game: GameSource,
    pub sim: SimSection,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Scenario(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Scenario(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Scenario(msg) => CliError::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Builds and validates the game; the `[sim]` table is checked as written.
    pub fn build(&self) -> Result<(GameSpec, SimConfig), CliError> {
        let spec = GameSpec::new(self.game.data()?).map_err(|e| match e {
            Error::InvalidSpec(report) => CliError::Scenario(format!("game: {report}")),
            other => CliError::Scenario(format!("game: {other}")),
        })?;
        let config = self.sim.resolve(&Overrides::default());
        config
            .validate()
            .map_err(|e| CliError::Scenario(format!("sim: {e}")))?;
        Ok((spec, config))
    }
}

pub fn load_scenario(path: &Path) -> Result<(GameSpec, SimConfig), CliError> {
    ScenarioFile::read(path)?.build()
}
