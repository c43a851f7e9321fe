use serde::{Deserialize, Serialize};

use crate::linalg::Mat;

use super::{SimError, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// `100·‖e‖/‖x‖`; `None` where `‖x‖ = 0`.
    pub percent_error: Vec<Option<f64>>,
    /// `eᵀPe` when `P` was supplied.
    pub lyapunov: Option<Vec<f64>>,
    pub final_error: f64,
    pub zero_state_samples: Vec<usize>,
    pub summary: MetricsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub samples: usize,
    pub final_time: f64,
    pub initial_error: f64,
    pub final_error: f64,
    /// `‖e(T)‖/‖e(0)‖`; absent when `e(0) = 0`.
    pub relative_final_error: Option<f64>,
    /// Mean percent error over the second half of the horizon.
    pub steady_percent_error: Option<f64>,
    pub max_percent_error: Option<f64>,
    pub zero_state_count: usize,
    /// Largest step-to-step increase of `eᵀPe`, when `P` was supplied.
    pub lyapunov_max_increase: Option<f64>,
    pub lyapunov_initial: Option<f64>,
}

pub fn metrics(traj: &Trajectory, p: Option<&Mat>) -> Result<Metrics, SimError> {
    if traj.is_empty() {
        return Err(SimError::EmptyTrajectory);
    }
    if let Some(p) = p {
        let n = traj.states[0].len();
        if p.shape() != (n, n) {
            return Err(SimError::InvalidConfig(format!("P must be {n}x{n}")));
        }
    }
    let len = traj.len();
    let mut percent_error = Vec::with_capacity(len);
    let mut zero_state_samples = Vec::new();
    let mut lyapunov = p.map(|_| Vec::with_capacity(len));
    for i in 0..len {
        let e = traj.error(i);
        let xn = traj.states[i].norm();
        if xn == 0.0 {
            zero_state_samples.push(i);
            percent_error.push(None);
        } else {
            percent_error.push(Some(100.0 * e.norm() / xn));
        }
        if let (Some(p), Some(v)) = (p, lyapunov.as_mut()) {
            v.push(e.dot(&(p * &e)));
        }
    }
    let initial_error = traj.error(0).norm();
    let final_error = traj.error(len - 1).norm();
    let second_half: Vec<f64> = percent_error[len / 2..].iter().flatten().copied().collect();
    let steady = (!second_half.is_empty()).then(|| second_half.iter().sum::<f64>() / second_half.len() as f64);
    let max_pe = percent_error.iter().flatten().copied().reduce(f64::max);
    let lyapunov_max_increase = lyapunov
        .as_ref()
        .map(|v| v.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max));
    let summary = MetricsSummary {
        samples: len,
        final_time: traj.times[len - 1],
        initial_error,
        final_error,
        relative_final_error: (initial_error > 0.0).then(|| final_error / initial_error),
        steady_percent_error: steady,
        max_percent_error: max_pe,
        zero_state_count: zero_state_samples.len(),
        lyapunov_max_increase,
        lyapunov_initial: lyapunov.as_ref().map(|v| v[0]),
    };
    Ok(Metrics { percent_error, lyapunov, final_error, zero_state_samples, summary })
}
