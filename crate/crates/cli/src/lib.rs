//! Config-driven runner for the `infogeo` checks.
//!
//! Exit-code contract of the binary: 0 when every check passes, 1 when at
//! least one mathematical check fails, 2 on any infrastructure error
//! (unreadable or invalid config, numerical failure, unwritable output).

pub mod checks;
pub mod config;
pub mod report;
pub mod sweep;
