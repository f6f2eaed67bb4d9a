//! Command line front end: argument parsing, the run pipelines and the
//! versioned result document.

pub mod config;
pub mod document;
pub mod error;
pub mod run;

pub use config::{Cli, Command, RunConfig};
pub use document::{save_result, ResultDocument, SCHEMA};
pub use error::CliError;
pub use run::{execute, run};
