//! Workspace-backed pipeline driving the `pathmine` binary.
//!
//! Each subcommand reads its inputs from a workspace directory, writes its
//! artifacts atomically and records input/output hashes in
//! `manifest.json`, so rerunning an unchanged stage is a no-op.

pub mod commands;
pub mod error;
pub mod workspace;

pub use error::{CliError, CliResult, ExitKind};
