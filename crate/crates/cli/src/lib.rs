//! Command-line runner and HTTP API for the breadthcloud pipeline.

pub mod cli;
pub mod config;
pub mod error;
pub mod server;
pub mod workspace;

pub use config::RunConfig;
pub use error::CliError;
pub use workspace::{CloudParams, RunSelection, Workspace};
