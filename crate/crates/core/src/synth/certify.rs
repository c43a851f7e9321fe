use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::linalg::{rows, sym_max_eigenvalue, sym_min_eigenvalue, symmetrize, Mat};
use crate::model::LipschitzSystem;

use super::lmi::{evaluate_lmi_blocks, LmiVariables};
use super::{DesignMode, SynthError};

/// Observer gains with the derived matrices `M = A − LCA − JC` and `N = I − LC`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObserverGains {
    #[serde(with = "rows")]
    j: Mat,
    #[serde(with = "rows")]
    l: Mat,
    #[serde(with = "rows")]
    k: Mat,
    #[serde(with = "rows")]
    m: Mat,
    #[serde(with = "rows")]
    n: Mat,
}

impl ObserverGains {
    pub fn new(sys: &LipschitzSystem, j: Mat, l: Mat, k: Mat) -> Result<Self, SynthError> {
        let d = sys.dims();
        let expect = |name: &str, m: &Mat, shape: (usize, usize)| {
            if m.shape() == shape {
                Ok(())
            } else {
                Err(SynthError::InvalidArgument(format!(
                    "{name} is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    shape.0,
                    shape.1
                )))
            }
        };
        expect("J", &j, (d.nx, d.ny))?;
        expect("L", &l, (d.nx, d.ny))?;
        expect("K", &k, (d.k, d.ny))?;
        if ![&j, &l, &k].iter().all(|m| crate::linalg::all_finite(m)) {
            return Err(SynthError::InvalidArgument("gains must be finite".into()));
        }
        let (a, c) = (sys.a(), sys.c());
        let m = a - &l * c * a - &j * c;
        let n = Mat::identity(d.nx, d.nx) - &l * c;
        Ok(Self { j, l, k, m, n })
    }

    pub fn j(&self) -> &Mat {
        &self.j
    }

    pub fn l(&self) -> &Mat {
        &self.l
    }

    pub fn k(&self) -> &Mat {
        &self.k
    }

    pub fn m(&self) -> &Mat {
        &self.m
    }

    pub fn n(&self) -> &Mat {
        &self.n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignCertificate {
    #[serde(with = "rows")]
    pub p: Mat,
    #[serde(with = "rows")]
    pub q: Mat,
    pub mode: DesignMode,
    pub ari_max_eig: f64,
    pub spectral_abscissa_m: f64,
    /// `−λ_max` over the two LMI blocks at the recovered variables.
    pub feasibility_margin: f64,
    pub p_min_eig: f64,
    pub q_min_eig: f64,
}

impl DesignCertificate {
    pub fn is_valid(&self) -> bool {
        self.p_min_eig > 0.0 && self.q_min_eig > 0.0 && self.ari_max_eig < 0.0 && self.spectral_abscissa_m < 0.0
    }
}

pub fn spectral_abscissa(m: &Mat) -> f64 {
    crate::linalg::spectral_abscissa(m)
}

/// Largest eigenvalue of `MᵀP + PM + PNGΣ⁻¹GᵀNᵀP + (H − KC)ᵀΩ(H − KC)` with
/// `(Σ, Ω) = (I, ℓ²I)` or `(V, W)`.
pub fn check_ari(sys: &LipschitzSystem, gains: &ObserverGains, p: &Mat, mode: &DesignMode) -> Result<f64, SynthError> {
    let d = sys.dims();
    if p.shape() != (d.nx, d.nx) {
        return Err(SynthError::InvalidArgument(format!("P must be {0}x{0}", d.nx)));
    }
    let (sigma, omega) = mode.weights(d.nf, d.k);
    let sigma_inv = match mode {
        DesignMode::Lipschitz { .. } => sigma,
        DesignMode::Generalized { .. } => Cholesky::new(symmetrize(&sigma))
            .ok_or_else(|| SynthError::InvalidArgument("V must be positive definite".into()))?
            .inverse(),
    };
    let png = p * gains.n() * sys.g();
    let reduced = sys.h() - gains.k() * sys.c();
    let pm = p * gains.m();
    let ari = &pm + pm.transpose() + &png * sigma_inv * png.transpose() + reduced.transpose() * omega * &reduced;
    Ok(sym_max_eigenvalue(&symmetrize(&ari)))
}

/// `J = P⁻¹S`, `L = P⁻¹R`, `K` passed through, plus the certificate for them.
pub fn recover_gains(
    sys: &LipschitzSystem,
    vars: &LmiVariables,
    mode: &DesignMode,
) -> Result<(ObserverGains, DesignCertificate), SynthError> {
    let p = symmetrize(&vars.p);
    let q = symmetrize(&vars.q);
    let chol = Cholesky::new(p.clone()).ok_or(SynthError::NotPositiveDefinite)?;
    let j = chol.solve(&vars.s);
    let l = chol.solve(&vars.r);
    let gains = ObserverGains::new(sys, j, l, vars.k.clone())?;
    let ari_max_eig = check_ari(sys, &gains, &p, mode)?;
    let (b1, b2) = evaluate_lmi_blocks(sys, mode, vars)?;
    let feasibility_margin = -sym_max_eigenvalue(&b1).max(sym_max_eigenvalue(&b2));
    let certificate = DesignCertificate {
        ari_max_eig,
        spectral_abscissa_m: spectral_abscissa(gains.m()),
        feasibility_margin,
        p_min_eig: sym_min_eigenvalue(&p),
        q_min_eig: sym_min_eigenvalue(&q),
        p,
        q,
        mode: mode.clone(),
    };
    Ok((gains, certificate))
}
