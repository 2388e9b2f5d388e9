//! Experiment runner for the `ulab` library: configuration files, table
//! caching, CSV output and the fixed experiment suites.

pub mod config;
pub mod experiment;
pub mod suite;
