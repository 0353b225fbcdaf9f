//! Command-line experiment runner for `fedwarm-core`: TOML configs with
//! presets, CSV round logs and run comparison.

pub mod compare;
pub mod config;
pub mod error;
pub mod gradcheck;
pub mod presets;
pub mod run;

pub use compare::compare;
pub use config::{ExperimentConfig, Mode};
pub use error::{CliError, CliResult};
pub use gradcheck::{gradcheck, GradcheckReport};
pub use run::{run_experiment, RunOutcome};
