//! Command implementations behind the `brinkmann` binary.

pub mod commands;
pub mod metric_file;
pub mod output;
