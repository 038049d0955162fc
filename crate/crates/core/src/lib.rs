//! Posterior-sampling learners in action-coupled mean-field games.
//!
//! A population of agents repeatedly samples a transition model from its
//! Dirichlet posterior, plans by backward induction, and acts greedily with
//! lower-myopic tie-breaking. The population's per-step action distribution
//! feeds back into everyone's dynamics. The [`equilibrium`] module checks
//! whether a converged policy and action distribution form a mean-field
//! equilibrium of the true game.

pub mod dist;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod learner;
pub mod mean_field;
pub mod planner;
pub mod simulator;

pub use dist::{l1_distance, ActionDist, StateDist};
pub use error::{Error, Result};
pub use game::{validate_spec, CoupledModel, GameSpec, GameSpecData, StepModel, ValidationReport};
pub use planner::{Policy, QTable, ValueTable};
