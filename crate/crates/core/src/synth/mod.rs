//! LMI assembly for the observer design, gain recovery and Riccati-inequality certificates.

mod certify;
mod lmi;

use thiserror::Error;

use crate::model::LipschitzSystem;
use crate::sdp::{solve_feasibility, SdpError, SdpSolution, SolveOptions, SolveStatus};

pub use certify::{check_ari, recover_gains, spectral_abscissa, DesignCertificate, ObserverGains};
pub use lmi::{
    assemble_lmi_generalized, assemble_lmi_generalized_with, assemble_lmi_lipschitz, assemble_lmi_lipschitz_with,
    default_margin, evaluate_lmi_blocks, DesignMode, DesignOptions, LmiDesignProblem, LmiLayout, LmiVariables,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("weight W is numerically singular (eigenvalues in [{min_eig:e}, {max_eig:e}])")]
    SingularWeight { min_eig: f64, max_eig: f64 },
    #[error("P is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("the LMIs are infeasible (dual certificate value {certificate_value:e})")]
    Infeasible { certificate_value: f64, solution: Box<SdpSolution> },
    #[error("solver budget exhausted without a decision (largest block eigenvalue {max_block_eig:e})")]
    Unknown { max_block_eig: f64, solution: Box<SdpSolution> },
}

#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub gains: ObserverGains,
    pub certificate: DesignCertificate,
    pub solution: SdpSolution,
    pub lmi: LmiDesignProblem,
}

/// Assembles, solves and certifies in one go.
pub fn design(
    sys: &LipschitzSystem,
    mode: &DesignMode,
    options: &DesignOptions,
    solver: &SolveOptions,
) -> Result<DesignOutcome, SynthError> {
    let lmi = match mode {
        DesignMode::Lipschitz { ell } => assemble_lmi_lipschitz_with(sys, *ell, options)?,
        DesignMode::Generalized { v, w } => assemble_lmi_generalized_with(sys, v, w, options)?,
    };
    let solution = solve_feasibility(&lmi.problem, solver)?;
    design_from_solution(sys, lmi, solution)
}

/// Recovers gains from a solver result (in-repo or imported from an external solver).
pub fn design_from_solution(
    sys: &LipschitzSystem,
    lmi: LmiDesignProblem,
    solution: SdpSolution,
) -> Result<DesignOutcome, SynthError> {
    match solution.status {
        SolveStatus::Feasible => {
            let vars = lmi.layout.extract(&solution.theta);
            let (gains, certificate) = recover_gains(sys, &vars, &lmi.mode)?;
            Ok(DesignOutcome { gains, certificate, solution, lmi })
        }
        SolveStatus::Infeasible => Err(SynthError::Infeasible {
            certificate_value: solution.certificate.as_ref().map_or(f64::NAN, |c| c.value),
            solution: Box::new(solution),
        }),
        SolveStatus::Unknown => {
            Err(SynthError::Unknown { max_block_eig: solution.max_block_eig, solution: Box::new(solution) })
        }
    }
}
