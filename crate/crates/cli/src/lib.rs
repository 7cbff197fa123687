//! Command-line front end for `torque-track`: JSON scenarios, trace
//! output, parameter sweeps and dynamics self-checks.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod sweep;
pub mod validate;

pub use error::CliError;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
