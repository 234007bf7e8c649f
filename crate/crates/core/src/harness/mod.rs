//! Scenario generation, knowledge-base persistence and the experiment runner.

pub mod config;
pub mod experiment;
pub mod kb_io;
pub mod scenario;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, ArmOutcome, ArmVariant, ExperimentOutcome, StatsReport};
pub use kb_io::{build_kb, load_kb, save_kb};
pub use scenario::{gen_scenario, BaseFunction, Category, Scenario, ScenarioSpec};
