//! Command-line plumbing around `mixaug-core`: manifests, config files,
//! canonical reports and the `mixaug` subcommands.

pub mod app;
pub mod error;
pub mod manifest;
pub mod report;
pub mod settings;

pub use app::run;
pub use error::{CliError, CliResult};
