//! Front end for the observer-synthesis pipeline: estimate the Lipschitz constant, solve the
//! design LMIs, co-simulate, and summarize. Every command reads one JSON [`RunConfig`] and
//! writes its artifacts into the configured output directory.

pub mod commands;
pub mod config;

use thiserror::Error;

pub use commands::{cmd_design, cmd_lipschitz, cmd_report, cmd_run, cmd_simulate};
pub use config::{DesignSection, LipschitzSection, LoadedConfig, ModeKind, RunConfig};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VALIDATION: u8 = 2;
    pub const ESTIMATION: u8 = 3;
    pub const INFEASIBLE: u8 = 4;
    pub const UNKNOWN: u8 = 5;
    pub const NON_FINITE: u8 = 6;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(exit::VALIDATION, message)
    }
}
