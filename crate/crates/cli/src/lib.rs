//! Command-line front end: argument parsing, config files and the data
//! products consumed by the plotting scripts.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use args::{Cli, Command};
pub use error::CliError;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve(a) => commands::cmd_solve(a),
        Command::Demo(a) => commands::cmd_demo(a),
        Command::Bench(a) => commands::cmd_bench(a),
        Command::Workspace(a) => commands::cmd_workspace(a),
    }
}
