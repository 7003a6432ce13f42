//! Configuration, orchestration and result emission for the ladder
//! experiments.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::{emit_config, parse_config, InitialState, Mode, RunSpec};
pub use error::CliError;
pub use experiment::{run_experiment, Bundle};
pub use output::emit_results;
