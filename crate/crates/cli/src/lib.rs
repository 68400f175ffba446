//! Implementation of the `contact-rl` command-line front end: single
//! experiment runs, grid sweeps over arms/difficulties/seeds, and
//! aggregation of metrics CSVs into mean ± confidence-interval curves.

pub mod commands;
pub mod curves;
pub mod grid;

pub use commands::{cmd_curves, cmd_grid, cmd_run, RunOverrides};
