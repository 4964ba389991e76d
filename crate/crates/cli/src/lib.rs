//! Configuration loading, subcommands and report writing for the `capmarket`
//! binary.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{run, Cli, Command, GlobalArgs, Outcome};
pub use config::{load_config, ConfigDocument, Format, RunConfig};
pub use report::{Cell, Table};
