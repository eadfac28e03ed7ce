//! Command-line front end: configuration files, run drivers and output
//! writers around the `leapfrog` library.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use error::CliError;
