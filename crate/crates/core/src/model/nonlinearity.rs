use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::{Mat, Vector};

/// A nonlinearity `f: R^k -> R^{n_f}` together with its closed-form Jacobian.
pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, v: &Vector) -> Vector;
    /// `n_f × k` Jacobian at `v`.
    fn jacobian(&self, v: &Vector) -> Mat;
    /// Registry description, when the nonlinearity can be written to a model file.
    fn descriptor(&self) -> Option<NonlinearitySpec> {
        None
    }
}

/// Registry entries accepted by generic model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum NonlinearitySpec {
    /// `f_i(v) = v[a_i] * v[b_i]`.
    BilinearProducts { pairs: Vec<(usize, usize)> },
    /// `f(v) = F v` with a constant row-major matrix.
    Linear { matrix: Vec<Vec<f64>> },
}

/// Products of pairs of input coordinates, the mass-action form of compartmental models.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearProducts {
    input_dim: usize,
    pairs: Vec<(usize, usize)>,
}

impl BilinearProducts {
    /// Returns `None` when a pair indexes past `input_dim`.
    pub fn new(input_dim: usize, pairs: Vec<(usize, usize)>) -> Option<Self> {
        if pairs.iter().any(|&(a, b)| a >= input_dim || b >= input_dim) {
            return None;
        }
        Some(Self { input_dim, pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

impl Nonlinearity for BilinearProducts {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.pairs.len()
    }

    fn eval(&self, v: &Vector) -> Vector {
        Vector::from_iterator(self.pairs.len(), self.pairs.iter().map(|&(a, b)| v[a] * v[b]))
    }

    fn jacobian(&self, v: &Vector) -> Mat {
        let mut jac = Mat::zeros(self.pairs.len(), self.input_dim);
        for (row, &(a, b)) in self.pairs.iter().enumerate() {
            jac[(row, a)] += v[b];
            jac[(row, b)] += v[a];
        }
        jac
    }

    fn descriptor(&self) -> Option<NonlinearitySpec> {
        Some(NonlinearitySpec::BilinearProducts { pairs: self.pairs.clone() })
    }
}

/// `f(v) = F v`. Covers the degenerate linear and zero cases.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    matrix: Mat,
}

impl LinearMap {
    pub fn new(matrix: Mat) -> Self {
        Self { matrix }
    }

    pub fn zero(input_dim: usize, output_dim: usize) -> Self {
        Self::new(Mat::zeros(output_dim, input_dim))
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self::new(Mat::identity(dim, dim) * scale)
    }
}

impl Nonlinearity for LinearMap {
    fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn eval(&self, v: &Vector) -> Vector {
        &self.matrix * v
    }

    fn jacobian(&self, _v: &Vector) -> Mat {
        self.matrix.clone()
    }

    fn descriptor(&self) -> Option<NonlinearitySpec> {
        Some(NonlinearitySpec::Linear { matrix: crate::linalg::to_rows(&self.matrix) })
    }
}

/// Infection term of networked SIS dynamics, `f(v) = -diag(v) B W v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SisInfection {
    bw: Mat,
}

impl SisInfection {
    /// `bw` is the product `B W`.
    pub fn new(bw: Mat) -> Self {
        assert!(bw.is_square());
        Self { bw }
    }
}

impl Nonlinearity for SisInfection {
    fn input_dim(&self) -> usize {
        self.bw.nrows()
    }

    fn output_dim(&self) -> usize {
        self.bw.nrows()
    }

    fn eval(&self, v: &Vector) -> Vector {
        let pressure = &self.bw * v;
        -v.component_mul(&pressure)
    }

    fn jacobian(&self, v: &Vector) -> Mat {
        let n = self.bw.nrows();
        let pressure = &self.bw * v;
        let mut jac = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = -v[i] * self.bw[(i, j)];
            }
            jac[(i, i)] -= pressure[i];
        }
        jac
    }
}

type EvalFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type JacobianFn = dyn Fn(&Vector) -> Mat + Send + Sync;

/// A nonlinearity given by user closures. Not serializable.
#[derive(Clone)]
pub struct ClosureNonlinearity {
    input_dim: usize,
    output_dim: usize,
    eval: Arc<EvalFn>,
    jacobian: Arc<JacobianFn>,
}

impl ClosureNonlinearity {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        eval: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        jacobian: impl Fn(&Vector) -> Mat + Send + Sync + 'static,
    ) -> Self {
        Self { input_dim, output_dim, eval: Arc::new(eval), jacobian: Arc::new(jacobian) }
    }
}

impl fmt::Debug for ClosureNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosureNonlinearity")
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .finish_non_exhaustive()
    }
}

impl Nonlinearity for ClosureNonlinearity {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn eval(&self, v: &Vector) -> Vector {
        (self.eval)(v)
    }

    fn jacobian(&self, v: &Vector) -> Mat {
        (self.jacobian)(v)
    }
}
