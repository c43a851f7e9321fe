//! Lipschitz constants of the nonlinearity: estimation, sampled verification, and
//! generalized (weighted) Lipschitz pairs.

mod estimate;
mod generalized;
mod verify;

use thiserror::Error;

pub use estimate::{estimate_lipschitz, jacobian_gain, EstimateConfig, EstimateMethod, LipschitzEstimate};
pub use generalized::{
    search_generalized_lipschitz, validate_generalized, GeneralizedLipschitzPair, GeneralizedSearchConfig,
};
pub use verify::{
    mean_value_residual, verify_innovation_lipschitz, verify_lipschitz, LipschitzCheck, VerifyConfig,
};

#[derive(Debug, Error)]
pub enum LipschitzError {
    #[error("Jacobian evaluator returned non-finite values at {point:?}")]
    NonFiniteJacobian { point: Vec<f64> },
    #[error("Lipschitz inequality cannot hold: f differs by {gap:e} at a pair with identical H-image")]
    LipschitzViolated { x: Vec<f64>, x_hat: Vec<f64>, gap: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no validated generalized Lipschitz pair found: {0}")]
    SearchFailed(String),
}

/// Chunk size for data-parallel pair sampling. Each chunk owns a ChaCha stream so results
/// do not depend on the worker count.
pub(crate) const PAIR_CHUNK: usize = 4096;
