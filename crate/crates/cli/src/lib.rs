//! `voicing` command-line front end. The binary is a thin wrapper over
//! [`run`]; tests drive the same entry point.

pub mod args;
pub mod commands;
pub mod config;
pub mod demo;

pub use commands::{exit_code, run, Status};
