use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::linalg::{rows, spectral_norm, sym_eigenvalues, symmetrize, Mat};
use crate::model::LipschitzSystem;
use crate::sdp::{BlockBuilder, SdpProblem, Strictness, VariableGroup};

use super::SynthError;

/// Smallest strict margin, used when `‖A‖` is tiny.
const MARGIN_FLOOR: f64 = 1e-8;

/// Weight matrices below this relative conditioning are rejected as singular.
const SINGULAR_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignMode {
    Lipschitz {
        ell: f64,
    },
    Generalized {
        #[serde(with = "rows")]
        v: Mat,
        #[serde(with = "rows")]
        w: Mat,
    },
}

impl DesignMode {
    /// `(V, W)`; `(I, ℓ²I)` in Lipschitz mode.
    pub fn weights(&self, nf: usize, k: usize) -> (Mat, Mat) {
        match self {
            DesignMode::Lipschitz { ell } => (Mat::identity(nf, nf), Mat::identity(k, k) * (ell * ell)),
            DesignMode::Generalized { v, w } => (v.clone(), w.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignOptions {
    /// Box bound on every entry of `K`; `None` leaves `K` free.
    pub kappa_max: Option<f64>,
    /// Box bound on every entry of `P`.
    pub p_bound: Option<f64>,
    /// Strict margin; defaults to `1e-6·‖A‖₂` (at least `1e-8`).
    pub margin: Option<f64>,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self { kappa_max: Some(1e3), p_bound: None, margin: None }
    }
}

/// Positions of the matrix variables inside the assembled problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LmiLayout {
    pub p: VariableGroup,
    pub q: VariableGroup,
    pub r: VariableGroup,
    pub s: VariableGroup,
    pub k: VariableGroup,
}

/// Matrix values of the LMI decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiVariables {
    pub p: Mat,
    pub q: Mat,
    pub r: Mat,
    pub s: Mat,
    pub k: Mat,
}

impl LmiLayout {
    pub fn extract(&self, theta: &[f64]) -> LmiVariables {
        LmiVariables {
            p: self.p.extract(theta),
            q: self.q.extract(theta),
            r: self.r.extract(theta),
            s: self.s.extract(theta),
            k: self.k.extract(theta),
        }
    }

    /// Inverse of `extract` for exactly symmetric `P`, `Q`.
    pub fn flatten(&self, vars: &LmiVariables, n_vars: usize) -> Vec<f64> {
        let mut theta = vec![0.0; n_vars];
        for (group, m) in [(&self.p, &vars.p), (&self.q, &vars.q), (&self.r, &vars.r), (&self.s, &vars.s), (&self.k, &vars.k)] {
            for i in 0..group.rows {
                for j in 0..group.cols {
                    if !group.symmetric || i <= j {
                        theta[group.index(i, j)] = m[(i, j)];
                    }
                }
            }
        }
        theta
    }
}

#[derive(Debug, Clone)]
pub struct LmiDesignProblem {
    pub problem: SdpProblem,
    pub layout: LmiLayout,
    pub mode: DesignMode,
}

pub fn default_margin(a: &Mat) -> f64 {
    (1e-6 * spectral_norm(a)).max(MARGIN_FLOOR)
}

/// `W⁻¹`, inverted entrywise when `W` is diagonal.
fn weight_inverse(w: &Mat) -> Result<Mat, SynthError> {
    let eig = sym_eigenvalues(w);
    let (lo, hi) = (eig.first().copied().unwrap_or(1.0), eig.last().copied().unwrap_or(1.0));
    if !(lo > SINGULAR_RATIO * hi.max(1.0)) {
        return Err(SynthError::SingularWeight { min_eig: lo, max_eig: hi });
    }
    let n = w.nrows();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || w[(i, j)] == 0.0));
    if diagonal {
        return Ok(Mat::from_diagonal(&w.diagonal().map(|d| 1.0 / d)));
    }
    let chol = Cholesky::new(symmetrize(w)).ok_or(SynthError::SingularWeight { min_eig: lo, max_eig: hi })?;
    Ok(symmetrize(&chol.inverse()))
}

/// Dense LMI blocks at given variable values. With `constants = false` only the part
/// linear in the variables is produced, which yields exact per-variable coefficients.
pub(crate) fn lmi_blocks(
    sys: &LipschitzSystem,
    v: &Mat,
    w_inv: &Mat,
    vars: &LmiVariables,
    constants: bool,
) -> (Mat, Mat) {
    let (a, g, h, c) = (sys.a(), sys.g(), sys.h(), sys.c());
    let d = sys.dims();
    let (n, nf, k) = (d.nx, d.nf, d.k);

    let pm = &vars.p * a - &vars.r * c * a - &vars.s * c;
    let png = &vars.p * g - &vars.r * c * g;
    let mut b1 = Mat::zeros(n + nf, n + nf);
    b1.view_mut((0, 0), (n, n)).copy_from(&(&pm + pm.transpose() + &vars.q));
    b1.view_mut((0, n), (n, nf)).copy_from(&png);
    b1.view_mut((n, 0), (nf, n)).copy_from(&png.transpose());

    let kc = &vars.k * c;
    let mut b2 = Mat::zeros(n + k, n + k);
    b2.view_mut((0, 0), (n, n)).copy_from(&(-&vars.q));
    b2.view_mut((n, 0), (k, n)).copy_from(&(-&kc));
    b2.view_mut((0, n), (n, k)).copy_from(&(-kc.transpose()));
    if constants {
        b1.view_mut((n, n), (nf, nf)).copy_from(&(-v));
        let mut lower = b2.view_mut((n, 0), (k, n));
        lower += h;
        let mut upper = b2.view_mut((0, n), (n, k));
        upper += h.transpose();
        b2.view_mut((n, n), (k, k)).copy_from(&(-w_inv));
    }
    (b1, b2)
}

fn zero_vars(sys: &LipschitzSystem) -> LmiVariables {
    let d = sys.dims();
    LmiVariables {
        p: Mat::zeros(d.nx, d.nx),
        q: Mat::zeros(d.nx, d.nx),
        r: Mat::zeros(d.nx, d.ny),
        s: Mat::zeros(d.nx, d.ny),
        k: Mat::zeros(d.k, d.ny),
    }
}

fn validate_v(v: &Mat, nf: usize) -> Result<(), SynthError> {
    if v.shape() != (nf, nf) {
        return Err(SynthError::InvalidArgument(format!("V must be {nf}x{nf}")));
    }
    if nf > 0 && sym_eigenvalues(v)[0] <= 0.0 {
        return Err(SynthError::InvalidArgument("V must be positive definite".into()));
    }
    Ok(())
}

/// Feasibility problem for the weighted design: block 1
/// `[[sym(PA − RCA − SC) + Q, (P − RC)G], [·, −V]] ≺ 0`, block 2
/// `[[−Q, (H − KC)ᵀ], [H − KC, −W⁻¹]] ⪯ 0`, and `P ⪰ δI`, `Q ⪰ δI`.
pub fn assemble_lmi_generalized_with(
    sys: &LipschitzSystem,
    v: &Mat,
    w: &Mat,
    options: &DesignOptions,
) -> Result<LmiDesignProblem, SynthError> {
    let d = sys.dims();
    validate_v(v, d.nf)?;
    if w.shape() != (d.k, d.k) {
        return Err(SynthError::InvalidArgument(format!("W must be {0}x{0}", d.k)));
    }
    let w_inv = weight_inverse(w)?;
    let margin = options.margin.unwrap_or_else(|| default_margin(sys.a()));
    if !(margin.is_finite() && margin > 0.0) {
        return Err(SynthError::InvalidArgument(format!("margin {margin} must be positive")));
    }

    let mut problem = SdpProblem::new(margin);
    let layout = LmiLayout {
        p: problem.add_symmetric_matrix("P", d.nx),
        q: problem.add_symmetric_matrix("Q", d.nx),
        r: problem.add_matrix("R", d.nx, d.ny),
        s: problem.add_matrix("S", d.nx, d.ny),
        k: problem.add_matrix("K", d.k, d.ny),
    };
    if let Some(kappa) = options.kappa_max {
        for idx in layout.k.offset..layout.k.offset + layout.k.len() {
            problem.set_bounds(idx, Some(-kappa), Some(kappa))?;
        }
    }
    if let Some(pb) = options.p_bound {
        for idx in layout.p.offset..layout.p.offset + layout.p.len() {
            problem.set_bounds(idx, Some(-pb), Some(pb))?;
        }
    }

    let mut b1 = BlockBuilder::new(d.nx + d.nf, Strictness::Strict);
    let mut b2 = BlockBuilder::new(d.nx + d.k, Strictness::NonStrict);
    let mut bp = BlockBuilder::new(d.nx, Strictness::Strict);
    let mut bq = BlockBuilder::new(d.nx, Strictness::Strict);
    let (c1, c2) = lmi_blocks(sys, v, &w_inv, &zero_vars(sys), true);
    *b1.constant_mut() = c1;
    *b2.constant_mut() = c2;

    let groups = [&layout.p, &layout.q, &layout.r, &layout.s, &layout.k];
    for (gi, group) in groups.iter().enumerate() {
        for i in 0..group.rows {
            for j in 0..group.cols {
                if group.symmetric && j < i {
                    continue;
                }
                let var = group.index(i, j);
                let mut unit = zero_vars(sys);
                let target = match gi {
                    0 => &mut unit.p,
                    1 => &mut unit.q,
                    2 => &mut unit.r,
                    3 => &mut unit.s,
                    _ => &mut unit.k,
                };
                target[(i, j)] = 1.0;
                if group.symmetric {
                    target[(j, i)] = 1.0;
                }
                let (f1, f2) = lmi_blocks(sys, v, &w_inv, &unit, false);
                if f1.iter().any(|&x| x != 0.0) {
                    *b1.term_mut(var) = f1;
                }
                if f2.iter().any(|&x| x != 0.0) {
                    *b2.term_mut(var) = f2;
                }
                if gi <= 1 {
                    let mut e = Mat::zeros(d.nx, d.nx);
                    e[(i, j)] = -1.0;
                    e[(j, i)] = -1.0;
                    *(if gi == 0 { bp.term_mut(var) } else { bq.term_mut(var) }) = e;
                }
            }
        }
    }
    for b in [b1, b2, bp, bq] {
        problem.add_block(b)?;
    }
    Ok(LmiDesignProblem { problem, layout, mode: DesignMode::Generalized { v: v.clone(), w: w.clone() } })
}

pub fn assemble_lmi_generalized(sys: &LipschitzSystem, v: &Mat, w: &Mat) -> Result<LmiDesignProblem, SynthError> {
    assemble_lmi_generalized_with(sys, v, w, &DesignOptions::default())
}

/// The scalar case `V = I`, `W = ℓ²I`.
pub fn assemble_lmi_lipschitz_with(
    sys: &LipschitzSystem,
    ell: f64,
    options: &DesignOptions,
) -> Result<LmiDesignProblem, SynthError> {
    if !(ell.is_finite() && ell > 0.0) {
        return Err(SynthError::InvalidArgument(format!("Lipschitz constant {ell} must be positive")));
    }
    let d = sys.dims();
    let (v, w) = DesignMode::Lipschitz { ell }.weights(d.nf, d.k);
    let mut out = assemble_lmi_generalized_with(sys, &v, &w, options)?;
    out.mode = DesignMode::Lipschitz { ell };
    Ok(out)
}

pub fn assemble_lmi_lipschitz(sys: &LipschitzSystem, ell: f64) -> Result<LmiDesignProblem, SynthError> {
    assemble_lmi_lipschitz_with(sys, ell, &DesignOptions::default())
}

/// Dense LMI blocks (block 1, block 2) at the given variables, for direct evaluation.
pub fn evaluate_lmi_blocks(
    sys: &LipschitzSystem,
    mode: &DesignMode,
    vars: &LmiVariables,
) -> Result<(Mat, Mat), SynthError> {
    let d = sys.dims();
    let (v, w) = mode.weights(d.nf, d.k);
    let w_inv = weight_inverse(&w)?;
    Ok(lmi_blocks(sys, &v, &w_inv, vars, true))
}
