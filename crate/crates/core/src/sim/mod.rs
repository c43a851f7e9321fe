//! Co-simulation of the plant with the proposed observer and two baselines.

mod export;
mod integrate;
mod metrics;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Vector;

pub use export::{write_plot_columns, write_trajectory_csv};
pub use integrate::{rk4_step, simulate, simulate_arcak, simulate_luenberger, simulate_sweep};
pub use metrics::{metrics, Metrics, MetricsSummary};

/// Any state component beyond this magnitude counts as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("state left the finite range at t = {time} (component {index})")]
    NonFiniteState { time: f64, index: usize },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-output noise standard deviation: one value for all outputs or one per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSigma {
    Uniform(f64),
    PerOutput(Vec<f64>),
}

impl NoiseSigma {
    pub fn resolve(&self, ny: usize) -> Result<Vec<f64>, SimError> {
        let v = match self {
            NoiseSigma::Uniform(s) => vec![*s; ny],
            NoiseSigma::PerOutput(v) if v.len() == ny => v.clone(),
            NoiseSigma::PerOutput(v) => {
                return Err(SimError::InvalidConfig(format!("{} noise levels for {ny} outputs", v.len())))
            }
        };
        if v.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(SimError::InvalidConfig("noise levels must be finite and ≥ 0".into()));
        }
        Ok(v)
    }
}

/// Initial observer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObserverInit {
    /// `z(0) = −L y(0)`, so `x̂(0) = 0`; baselines start from `x̂(0) = 0` too.
    FromOutput,
    /// `z(0)` given; baselines start from the matching estimate `z(0) + L y(0)`.
    Explicit { z0: Vec<f64> },
    /// `x̂(0)` given; the proposed observer uses `z(0) = x̂(0) − L y(0)`.
    Estimate { x_hat0: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub noise_sigma: NoiseSigma,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub observer_init: ObserverInit,
}

impl SimConfig {
    /// Defaults for SIDARTHE-V: `dt = 0.01`, `T = 200`, `σ = 1e-4`, 1% undetected infected.
    pub fn sidarthe_default() -> Self {
        let mut x0 = vec![0.0; 9];
        x0[0] = 0.99;
        x0[1] = 0.01;
        Self {
            dt: 0.01,
            horizon: 200.0,
            noise_sigma: NoiseSigma::Uniform(1e-4),
            seed: 0,
            x0,
            observer_init: ObserverInit::FromOutput,
        }
    }

    pub fn steps(&self) -> Result<usize, SimError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SimError::InvalidConfig(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(SimError::InvalidConfig(format!("horizon {} must be at least dt = {}", self.horizon, self.dt)));
        }
        Ok((self.horizon / self.dt).round() as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub estimates: Vec<Vector>,
    /// Observer internal state `z`; only the proposed observer has one.
    pub internal: Option<Vec<Vector>>,
    /// Measured (noisy) outputs.
    pub outputs: Vec<Vector>,
    pub noise_seed: u64,
    pub noise_sigma: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn error(&self, i: usize) -> Vector {
        &self.states[i] - &self.estimates[i]
    }
}
