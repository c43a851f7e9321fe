//! Systems of the form `ẋ = Ax + G f(Hx)`, `y = Cx`.

mod detect;
mod domain;
mod file;
mod nonlinearity;
mod sidarthe;
mod sis;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{all_finite, Mat, Vector};

pub use detect::{check_detectable_pair, DetectabilityReport, PbhMode, DEFAULT_PBH_RELATIVE_THRESHOLD};
pub use domain::{DomainKind, StateDomain};
pub use file::{load_model_file, DomainSpec, GenericParams, ModelFile};
pub use nonlinearity::{
    BilinearProducts, ClosureNonlinearity, LinearMap, Nonlinearity, NonlinearitySpec, SisInfection,
};
pub use sidarthe::{build_sidarthe_v, SidartheVParams, SIDARTHE_V_COMPARTMENTS};
pub use sis::{build_networked_sis, SisNetworkParams};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch between {first} and {second}: {detail}")]
    DimensionMismatch { first: &'static str, second: &'static str, detail: String },
    #[error("parameter {name} = {value} is invalid (must be finite and nonnegative)")]
    InvalidParameter { name: String, value: f64 },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("measured node set is empty")]
    EmptyMeasurement,
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("matrix {0} has non-finite entries")]
    NonFiniteMatrix(&'static str),
    #[error("nonlinearity is not finite at a sampled domain point")]
    NonFiniteNonlinearity,
    #[error("unknown or malformed nonlinearity: {0}")]
    BadNonlinearity(String),
    #[error("cannot read model file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse model file {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nf: usize,
    pub k: usize,
}

/// Validated quadruple `(A, G, H, C)` with its nonlinearity and state domain.
#[derive(Debug, Clone)]
pub struct LipschitzSystem {
    a: Mat,
    g: Mat,
    h: Mat,
    c: Mat,
    f: Arc<dyn Nonlinearity>,
    domain: StateDomain,
}

/// Number of domain samples used to spot-check that `f` and its Jacobian are finite.
const FINITENESS_SPOT_CHECKS: usize = 16;

pub fn build_system(
    a: Mat,
    g: Mat,
    h: Mat,
    c: Mat,
    f: Arc<dyn Nonlinearity>,
    domain: StateDomain,
) -> Result<LipschitzSystem, ModelError> {
    let mismatch = |first, second, detail: String| ModelError::DimensionMismatch { first, second, detail };
    if !a.is_square() {
        return Err(mismatch("A", "A", format!("A is {}x{}, expected square", a.nrows(), a.ncols())));
    }
    let nx = a.nrows();
    if g.nrows() != nx {
        return Err(mismatch("A", "G", format!("G has {} rows, expected {nx}", g.nrows())));
    }
    if h.ncols() != nx {
        return Err(mismatch("A", "H", format!("H has {} columns, expected {nx}", h.ncols())));
    }
    if c.ncols() != nx {
        return Err(mismatch("A", "C", format!("C has {} columns, expected {nx}", c.ncols())));
    }
    if f.input_dim() != h.nrows() {
        return Err(mismatch("H", "f", format!("f takes {} inputs but H has {} rows", f.input_dim(), h.nrows())));
    }
    if f.output_dim() != g.ncols() {
        return Err(mismatch("G", "f", format!("f returns {} values but G has {} columns", f.output_dim(), g.ncols())));
    }
    if domain.dim() != nx {
        return Err(mismatch("A", "domain", format!("domain has dimension {}, expected {nx}", domain.dim())));
    }
    for (name, m) in [("A", &a), ("G", &g), ("H", &h), ("C", &c)] {
        if !all_finite(m) {
            return Err(ModelError::NonFiniteMatrix(name));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..FINITENESS_SPOT_CHECKS {
        let v = &h * domain.sample(&mut rng);
        if !f.eval(&v).iter().all(|x| x.is_finite()) || !all_finite(&f.jacobian(&v)) {
            return Err(ModelError::NonFiniteNonlinearity);
        }
    }
    Ok(LipschitzSystem { a, g, h, c, f, domain })
}

impl LipschitzSystem {
    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn g(&self) -> &Mat {
        &self.g
    }

    pub fn h(&self) -> &Mat {
        &self.h
    }

    pub fn c(&self) -> &Mat {
        &self.c
    }

    pub fn nonlinearity(&self) -> &Arc<dyn Nonlinearity> {
        &self.f
    }

    pub fn domain(&self) -> &StateDomain {
        &self.domain
    }

    pub fn dims(&self) -> Dims {
        Dims { nx: self.a.nrows(), ny: self.c.nrows(), nf: self.g.ncols(), k: self.h.nrows() }
    }

    /// Same system on a different domain.
    pub fn with_domain(&self, domain: StateDomain) -> Result<Self, ModelError> {
        build_system(self.a.clone(), self.g.clone(), self.h.clone(), self.c.clone(), self.f.clone(), domain)
    }

    /// Same system with the nonlinearity replaced.
    pub fn with_nonlinearity(&self, f: Arc<dyn Nonlinearity>) -> Result<Self, ModelError> {
        build_system(self.a.clone(), self.g.clone(), self.h.clone(), self.c.clone(), f, self.domain.clone())
    }

    /// `f(v)` for an argument `v` in the nonlinearity's input space.
    pub fn eval_f(&self, v: &Vector) -> Vector {
        self.f.eval(v)
    }

    /// `Ax + G f(Hx)`.
    pub fn eval_dynamics(&self, x: &Vector) -> Vector {
        &self.a * x + &self.g * self.f.eval(&(&self.h * x))
    }

    pub fn output(&self, x: &Vector) -> Vector {
        &self.c * x
    }
}
