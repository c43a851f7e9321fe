use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::Mat;

use super::{build_system, BilinearProducts, LipschitzSystem, ModelError, StateDomain};

/// State ordering used throughout: Susceptible, Infected, Diagnosed, Ailing, Recognized,
/// Threatened, Healed, Extinct, Vaccinated.
pub const SIDARTHE_V_COMPARTMENTS: [&str; 9] = ["S", "I", "D", "A", "R", "T", "H", "E", "V"];

const S: usize = 0;
const I: usize = 1;
const D: usize = 2;
const A: usize = 3;
const R: usize = 4;
const T: usize = 5;
const H: usize = 6;
const E: usize = 7;
const V: usize = 8;

/// Transition rates of the SIDARTHE-V model, per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidartheVParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub theta: f64,
    pub zeta: f64,
    pub eta: f64,
    pub mu: f64,
    pub nu: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub lambda: f64,
    pub rho: f64,
    pub kappa: f64,
    pub xi: f64,
    pub sigma: f64,
    pub phi: f64,
}

impl SidartheVParams {
    /// Rates fitted to the late phase of the Italian COVID-19 outbreak, with a
    /// vaccination rate of 0.05.
    pub fn reference() -> Self {
        Self {
            alpha: 0.3872,
            beta: 0.0053,
            gamma: 0.1485,
            delta: 0.0050,
            epsilon: 0.2988,
            theta: 0.3700,
            zeta: 0.0025,
            eta: 0.0018,
            mu: 0.1200,
            nu: 0.0200,
            tau1: 0.0050,
            tau2: 0.1700,
            lambda: 0.1128,
            rho: 0.0320,
            kappa: 0.0200,
            xi: 0.0120,
            sigma: 0.0240,
            phi: 0.0500,
        }
    }

    pub fn zero() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            delta: 0.0,
            epsilon: 0.0,
            theta: 0.0,
            zeta: 0.0,
            eta: 0.0,
            mu: 0.0,
            nu: 0.0,
            tau1: 0.0,
            tau2: 0.0,
            lambda: 0.0,
            rho: 0.0,
            kappa: 0.0,
            xi: 0.0,
            sigma: 0.0,
            phi: 0.0,
        }
    }

    fn named(&self) -> [(&'static str, f64); 18] {
        [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("theta", self.theta),
            ("zeta", self.zeta),
            ("eta", self.eta),
            ("mu", self.mu),
            ("nu", self.nu),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("lambda", self.lambda),
            ("rho", self.rho),
            ("kappa", self.kappa),
            ("xi", self.xi),
            ("sigma", self.sigma),
            ("phi", self.phi),
        ]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in self.named() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::InvalidParameter { name: name.to_string(), value });
            }
        }
        Ok(())
    }
}

/// SIDARTHE-V on the unit box `[0, 1]^9`.
///
/// The contact terms `S·I, S·D, S·A, S·R` form `f(Hx)` with `H = [I₅ 0]`; everything
/// else is linear and lands in `A`. The output matrix measures the daily new
/// diagnoses `εI + (θ+μ)A`, the compartments D, R, T, E, V and the total population.
pub fn build_sidarthe_v(p: &SidartheVParams) -> Result<LipschitzSystem, ModelError> {
    p.validate()?;

    let mut a = Mat::zeros(9, 9);
    a[(S, S)] = -p.phi;
    a[(I, I)] = -(p.epsilon + p.zeta + p.lambda);
    a[(D, I)] = p.epsilon;
    a[(D, D)] = -(p.eta + p.rho);
    a[(A, I)] = p.zeta;
    a[(A, A)] = -(p.theta + p.mu + p.kappa);
    a[(R, D)] = p.eta;
    a[(R, A)] = p.theta;
    a[(R, R)] = -(p.nu + p.xi + p.tau1);
    a[(T, A)] = p.mu;
    a[(T, R)] = p.nu;
    a[(T, T)] = -(p.sigma + p.tau2);
    a[(H, I)] = p.lambda;
    a[(H, D)] = p.rho;
    a[(H, A)] = p.kappa;
    a[(H, R)] = p.xi;
    a[(H, T)] = p.sigma;
    a[(E, R)] = p.tau1;
    a[(E, T)] = p.tau2;
    a[(V, S)] = p.phi;

    let contact = [p.alpha, p.beta, p.gamma, p.delta];
    let mut g = Mat::zeros(9, 4);
    for (col, &rate) in contact.iter().enumerate() {
        g[(S, col)] = -rate;
        g[(I, col)] = rate;
    }

    let mut h = Mat::zeros(5, 9);
    for i in 0..5 {
        h[(i, i)] = 1.0;
    }

    let mut c = Mat::zeros(7, 9);
    c[(0, I)] = p.epsilon;
    c[(0, A)] = p.theta + p.mu;
    for (row, col) in [(1, D), (2, R), (3, T), (4, E), (5, V)] {
        c[(row, col)] = 1.0;
    }
    for col in 0..9 {
        c[(6, col)] = 1.0;
    }

    let f = BilinearProducts::new(5, vec![(0, 1), (0, 2), (0, 3), (0, 4)]).expect("indices below 5");
    build_system(a, g, h, c, Arc::new(f), StateDomain::unit_box(9))
}
