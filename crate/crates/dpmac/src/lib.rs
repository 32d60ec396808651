//! Command-line front end and std-side plumbing for `dpmac-core`: parallel
//! replications, CSV/JSON output with run manifests, and parameter ranges.

pub mod cli;
pub mod output;
pub mod ranges;
pub mod runner;

pub use runner::run;
