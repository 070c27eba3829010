//! Command-line front end for `snn-core`: CSV and TOML formats, parallel
//! study drivers and the `snn` binary's subcommands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod output;
pub mod runner;
