//! Block-diagonal affine matrix-inequality feasibility: an in-repo spectral-max solver
//! and an SDPA sparse-format bridge for external solvers.

mod problem;
mod sdpa;
mod solver;

use thiserror::Error;

pub use problem::{Block, BlockBuilder, SdpProblem, Strictness, SymSparse, Variable, VariableGroup};
pub use sdpa::{export_sdpa, import_sdpa, import_sdpa_solution, write_sdpa};
pub use solver::{
    evaluate_solution, solve_feasibility, InfeasibilityCertificate, SdpSolution, SolveOptions, SolveStatus,
};

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    MalformedProblem(String),
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse failure at line {line}, column {column}: {message}")]
    ParseFailure { line: usize, column: usize, message: String },
}
