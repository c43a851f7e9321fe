use std::sync::Arc;

use crate::linalg::Mat;

use super::{build_system, LipschitzSystem, ModelError, SisInfection, StateDomain};

/// Networked SIS epidemic over `n` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SisNetworkParams {
    /// Infection susceptibilities (diagonal of `B`).
    pub betas: Vec<f64>,
    /// Healing rates (diagonal of `D`).
    pub deltas: Vec<f64>,
    /// Weighted adjacency `W`, entries ≥ 0.
    pub weights: Mat,
    pub measured_nodes: Vec<usize>,
    pub allow_self_loops: bool,
}

impl SisNetworkParams {
    pub fn nodes(&self) -> usize {
        self.betas.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.nodes();
        if self.deltas.len() != n {
            return Err(ModelError::DimensionMismatch {
                first: "betas",
                second: "deltas",
                detail: format!("{n} susceptibilities but {} healing rates", self.deltas.len()),
            });
        }
        if self.weights.nrows() != n || self.weights.ncols() != n {
            return Err(ModelError::DimensionMismatch {
                first: "betas",
                second: "W",
                detail: format!("W is {}x{}, expected {n}x{n}", self.weights.nrows(), self.weights.ncols()),
            });
        }
        let rates = self.betas.iter().enumerate().map(|(i, &v)| (format!("beta[{i}]"), v));
        let heals = self.deltas.iter().enumerate().map(|(i, &v)| (format!("delta[{i}]"), v));
        for (name, value) in rates.chain(heals) {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        for i in 0..n {
            for j in 0..n {
                let w = self.weights[(i, j)];
                if !(w.is_finite() && w >= 0.0) {
                    return Err(ModelError::InvalidParameter { name: format!("W[{i}][{j}]"), value: w });
                }
            }
            if !self.allow_self_loops && self.weights[(i, i)] != 0.0 {
                return Err(ModelError::InvalidNetwork(format!("self loop at node {i}")));
            }
        }
        if self.measured_nodes.is_empty() {
            return Err(ModelError::EmptyMeasurement);
        }
        if let Some(&bad) = self.measured_nodes.iter().find(|&&i| i >= n) {
            return Err(ModelError::InvalidNetwork(format!("measured node {bad} does not exist")));
        }
        Ok(())
    }
}

/// `A = BW − D`, `G = H = I`, `f(v) = −diag(v) B W v`, `C` selecting the measured nodes.
/// The domain is the unit box.
pub fn build_networked_sis(p: &SisNetworkParams) -> Result<LipschitzSystem, ModelError> {
    p.validate()?;
    let n = p.nodes();
    let b = Mat::from_diagonal(&nalgebra::DVector::from_column_slice(&p.betas));
    let d = Mat::from_diagonal(&nalgebra::DVector::from_column_slice(&p.deltas));
    let bw = &b * &p.weights;
    let a = &bw - d;
    let mut c = Mat::zeros(p.measured_nodes.len(), n);
    for (row, &node) in p.measured_nodes.iter().enumerate() {
        c[(row, node)] = 1.0;
    }
    build_system(
        a,
        Mat::identity(n, n),
        Mat::identity(n, n),
        c,
        Arc::new(SisInfection::new(bw)),
        StateDomain::unit_box(n),
    )
}
