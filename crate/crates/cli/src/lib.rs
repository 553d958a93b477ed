//! Library surface of the `flowsect` CLI: config loading, report rendering
//! and the command implementations, so the pipeline is drivable from tests
//! as well as from the binary.

pub mod commands;
pub mod config;
pub mod expr;
pub mod report;
