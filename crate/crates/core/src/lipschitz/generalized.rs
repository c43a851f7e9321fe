use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{rows, sym_min_eigenvalue, Mat};
use crate::model::LipschitzSystem;

use super::verify::{ratio, scan_pairs};
use super::{estimate_lipschitz, EstimateConfig, LipschitzCheck, LipschitzError, VerifyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneralizedSearchConfig {
    /// Restrict `W` to diagonal weights (the only mode with a per-direction construction).
    pub diag_only: bool,
    /// Ascent starts for the scalar-constant fallback.
    pub starts: usize,
    pub seed: u64,
    /// Domain samples used to measure per-direction Jacobian gains.
    pub gain_samples: usize,
    pub validation: VerifyConfig,
    /// Factor applied to `W` per shrink step.
    pub shrink: f64,
}

impl Default for GeneralizedSearchConfig {
    fn default() -> Self {
        Self {
            diag_only: true,
            starts: 16,
            seed: 2,
            gain_samples: 4096,
            validation: VerifyConfig { pairs: 100_000, seed: 3, slack: 1e-6 },
            shrink: 0.9,
        }
    }
}

/// Weights `(V, W)` with `‖f(Hx) − f(Hx̂)‖_V ≤ ‖H(x − x̂)‖_W` on the sampled pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedLipschitzPair {
    #[serde(with = "rows")]
    pub v: Mat,
    #[serde(with = "rows")]
    pub w: Mat,
    pub certificate_samples: usize,
    pub worst_ratio: f64,
}

fn weighted_norm(weight: &Mat, a: &nalgebra::DVector<f64>) -> f64 {
    a.dot(&(weight * a)).max(0.0).sqrt()
}

/// Samples `‖f(Hx) − f(Hx̂)‖_V / ‖H(x − x̂)‖_W`; `ok` when every ratio is at most `1 + slack`.
pub fn validate_generalized(
    sys: &LipschitzSystem,
    v: &Mat,
    w: &Mat,
    config: &VerifyConfig,
) -> Result<LipschitzCheck, LipschitzError> {
    let d = sys.dims();
    if v.shape() != (d.nf, d.nf) || w.shape() != (d.k, d.k) {
        return Err(LipschitzError::InvalidArgument(format!(
            "weights must be {0}x{0} and {1}x{1}",
            d.nf, d.k
        )));
    }
    if d.nf > 0 && sym_min_eigenvalue(v) <= 0.0 || d.k > 0 && sym_min_eigenvalue(w) <= 0.0 {
        return Err(LipschitzError::InvalidArgument("weights must be positive definite".into()));
    }
    let h = sys.h();
    let f = sys.nonlinearity();
    let raw = scan_pairs(sys.domain(), config, |x, x_hat| {
        let v_true = h * x;
        let df = f.eval(&v_true) - f.eval(&(h * x_hat));
        let dv = h * (x - x_hat);
        ratio(weighted_norm(v, &df), weighted_norm(w, &dv), v_true.norm())
    })?;
    Ok(raw.into_check(1.0 + config.slack))
}

/// Per-input gains `sup ‖∂f/∂v_j‖` and the mean Gram matrix `E[JᵀJ]` over domain samples.
fn sampled_gains(sys: &LipschitzSystem, config: &GeneralizedSearchConfig) -> Result<(Vec<f64>, Mat), LipschitzError> {
    let k = sys.dims().k;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut gains = vec![0.0_f64; k];
    let mut gram = Mat::zeros(k, k);
    let samples = config.gain_samples.max(1);
    for _ in 0..samples {
        let x = sys.domain().sample(&mut rng);
        let jac = sys.nonlinearity().jacobian(&(sys.h() * &x));
        if !crate::linalg::all_finite(&jac) {
            return Err(LipschitzError::NonFiniteJacobian { point: x.iter().copied().collect() });
        }
        for (j, gain) in gains.iter_mut().enumerate() {
            *gain = gain.max(jac.column(j).norm());
        }
        gram += jac.transpose() * &jac;
    }
    Ok((gains, gram / samples as f64))
}

fn shape_matrix(sys: &LipschitzSystem, config: &GeneralizedSearchConfig) -> Result<Mat, LipschitzError> {
    let (gains, gram) = sampled_gains(sys, config)?;
    let k = gains.len();
    if config.diag_only {
        // ‖J Δ‖ ≤ Σ g_j |Δ_j| ≤ sqrt(m Σ g_j² Δ_j²) with m the number of live directions.
        let live = gains.iter().filter(|&&g| g > 0.0).count().max(1) as f64;
        let squared: Vec<f64> = gains.iter().map(|g| live * g * g).collect();
        let floor = 1e-6 * squared.iter().copied().fold(0.0, f64::max).max(1e-6);
        Ok(Mat::from_diagonal(&nalgebra::DVector::from_iterator(k, squared.iter().map(|&s| s.max(floor)))))
    } else {
        let floor = 1e-6 * gram.diagonal().amax().max(1e-6);
        Ok(crate::linalg::symmetrize(&gram) + Mat::identity(k, k) * floor)
    }
}

/// Searches weights `(V, W)` for the generalized Lipschitz condition.
///
/// `V = I`; `W` starts from a sampled shape (diagonal per-direction gains by default),
/// is scaled up until sampling validates it, then scaled down while validation keeps
/// passing. If no scaling validates, the scalar pair `(I, ℓ²I)` from a fresh Lipschitz
/// estimate is tried before giving up.
pub fn search_generalized_lipschitz(
    sys: &LipschitzSystem,
    config: &GeneralizedSearchConfig,
) -> Result<GeneralizedLipschitzPair, LipschitzError> {
    if !(config.shrink > 0.0 && config.shrink < 1.0) {
        return Err(LipschitzError::InvalidArgument(format!("shrink factor {} must lie in (0, 1)", config.shrink)));
    }
    let d = sys.dims();
    let v = Mat::identity(d.nf, d.nf);
    let shape = shape_matrix(sys, config)?;
    let check = |scale: f64| validate_generalized(sys, &v, &(&shape * scale), &config.validation);

    let mut scale = 1.0;
    let mut passing = check(scale)?;
    let mut grow = 0;
    while !passing.ok && grow < 100 {
        scale *= 1.25;
        passing = check(scale)?;
        grow += 1;
    }
    if passing.ok {
        for _ in 0..200 {
            let trial = check(scale * config.shrink)?;
            if !trial.ok {
                break;
            }
            scale *= config.shrink;
            passing = trial;
        }
        return Ok(GeneralizedLipschitzPair {
            w: &shape * scale,
            v,
            certificate_samples: passing.pairs_checked,
            worst_ratio: passing.worst_ratio,
        });
    }

    let estimate = estimate_lipschitz(
        sys,
        sys.domain(),
        &EstimateConfig { starts: config.starts, seed: config.seed, ..Default::default() },
    )?;
    let ell = estimate.ell * (1.0 + config.validation.slack);
    let w = Mat::identity(d.k, d.k) * (ell * ell);
    let fallback = validate_generalized(sys, &v, &w, &config.validation)?;
    if fallback.ok {
        return Ok(GeneralizedLipschitzPair {
            v,
            w,
            certificate_samples: fallback.pairs_checked,
            worst_ratio: fallback.worst_ratio,
        });
    }
    Err(LipschitzError::SearchFailed(format!(
        "neither the sampled shape nor the scalar pair with ℓ = {} validated (worst ratio {})",
        estimate.ell, fallback.worst_ratio
    )))
}
