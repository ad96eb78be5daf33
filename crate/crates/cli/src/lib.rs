//! Experiment driver: config handling, subcommands and artifact output.

pub mod commands;
pub mod config;
pub mod output;
