//! Command-line driver: configuration loading, run orchestration and CSV output.

pub mod app;
pub mod output;
pub mod suites;
