//! Command-line front end: flat config files in, CSV out.

// `!(x > 0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

pub use config::{parse_config, Config, ConfigError, Mode, Parsed};
pub use run::{run, RunError};

/// Exit status for a configuration problem.
pub const EXIT_CONFIG: i32 = 1;
/// Exit status for a numerical failure.
pub const EXIT_NUMERIC: i32 = 2;
