//! Scenario configuration, target generation, baseline orchestration, and
//! report serialization behind the `retro` CLI.

pub mod cli;
pub mod config;
pub mod generate;
pub mod methods;
pub mod report;
pub mod run;

pub use cli::cli;
pub use config::{ConfigError, ScenarioConfig};
pub use generate::{generate_target, parse_replay};
pub use methods::{Method, MethodOutcome, Scenario, ScheduledUpdate};
pub use report::{RunReport, CSV_HEADER};
pub use run::{run_scenario, HarnessError};
