//! Library half of the `nabla-bvp` command-line tool: config loading and the
//! four subcommands, each returning its process exit code.

pub mod commands;
pub mod config;

pub use commands::{cmd_certify, cmd_green, cmd_solve, cmd_verify, CliError, SolverOverrides};
