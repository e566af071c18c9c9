//! Configuration, experiment drivers, trace output and verification suites
//! for the `boids` command-line tool.

pub mod checks;
pub mod commands;
pub mod config;
pub mod output;

pub use config::UsageError;

/// Environment variable overriding the default output directory.
pub const OUT_DIR_ENV: &str = "BOIDS_OUT_DIR";
