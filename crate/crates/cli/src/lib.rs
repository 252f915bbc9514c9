//! Library side of the `saa` command: run records, result tables and the
//! subcommand implementations.

pub mod record;
pub mod report;
pub mod run;

pub use record::{OutcomeRecord, RunRecord};
pub use report::Format;
pub use run::{exit, CliError, SolveOptions};
