//! Library side of the experiment runner: resolved configuration, artifact
//! writers, and the drivers behind each subcommand. The binary in `main.rs`
//! is a thin argument-parsing shell over this.

pub mod config;
pub mod experiments;
pub mod output;
