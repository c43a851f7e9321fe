use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{Mat, Vector};
use crate::model::{LipschitzSystem, Nonlinearity, StateDomain};

use super::{LipschitzError, PAIR_CHUNK};

/// Pairs whose denominator falls below this (relative) are treated as coincident.
const COINCIDENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub pairs: usize,
    pub seed: u64,
    pub slack: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { pairs: 100_000, seed: 1, slack: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCheck {
    pub ok: bool,
    pub worst_ratio: f64,
    /// `(x, x̂)` attaining `worst_ratio`; `None` when every pair was skipped.
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
    pub pairs_checked: usize,
}

pub(crate) enum PairOutcome {
    Ratio(f64),
    Skip,
    Violation(f64),
}

/// Draws `pairs` pairs `(x, x̂)` from `domain` and folds `judge` over them.
pub(crate) fn scan_pairs<F>(domain: &StateDomain, config: &VerifyConfig, judge: F) -> Result<LipschitzCheckRaw, LipschitzError>
where
    F: Fn(&Vector, &Vector) -> PairOutcome + Sync,
{
    let chunks = config.pairs.div_ceil(PAIR_CHUNK);
    let partials: Vec<LipschitzCheckRaw> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(chunk as u64);
            let count = PAIR_CHUNK.min(config.pairs - chunk * PAIR_CHUNK);
            let mut acc = LipschitzCheckRaw::default();
            for _ in 0..count {
                let x = domain.sample(&mut rng);
                let x_hat = domain.sample(&mut rng);
                match judge(&x, &x_hat) {
                    PairOutcome::Skip => {}
                    PairOutcome::Ratio(r) => {
                        acc.checked += 1;
                        if acc.worst.as_ref().is_none_or(|w| r > w.0) {
                            acc.worst = Some((r, x, x_hat));
                        }
                    }
                    PairOutcome::Violation(gap) => {
                        if acc.violation.is_none() {
                            acc.violation = Some((gap, x, x_hat));
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut total = LipschitzCheckRaw::default();
    for part in partials {
        total.checked += part.checked;
        if total.violation.is_none() {
            total.violation = part.violation;
        }
        if let Some(w) = part.worst {
            if total.worst.as_ref().is_none_or(|t| w.0 > t.0) {
                total.worst = Some(w);
            }
        }
    }
    if let Some((gap, x, x_hat)) = total.violation.take() {
        return Err(LipschitzError::LipschitzViolated {
            x: x.iter().copied().collect(),
            x_hat: x_hat.iter().copied().collect(),
            gap,
        });
    }
    Ok(total)
}

#[derive(Default)]
pub(crate) struct LipschitzCheckRaw {
    pub checked: usize,
    pub worst: Option<(f64, Vector, Vector)>,
    pub violation: Option<(f64, Vector, Vector)>,
}

impl LipschitzCheckRaw {
    pub(crate) fn into_check(self, bound: f64) -> LipschitzCheck {
        let worst_ratio = self.worst.as_ref().map_or(0.0, |w| w.0);
        LipschitzCheck {
            ok: worst_ratio <= bound,
            worst_ratio,
            worst_pair: self.worst.map(|(_, x, xh)| (x.iter().copied().collect(), xh.iter().copied().collect())),
            pairs_checked: self.checked,
        }
    }
}

pub(crate) fn ratio(numerator: f64, denominator: f64, scale: f64) -> PairOutcome {
    if denominator <= COINCIDENT_TOL * (1.0 + scale) {
        if numerator <= COINCIDENT_TOL * (1.0 + scale) {
            PairOutcome::Skip
        } else {
            PairOutcome::Violation(numerator)
        }
    } else {
        PairOutcome::Ratio(numerator / denominator)
    }
}

fn check_ell(ell: f64) -> Result<(), LipschitzError> {
    if !(ell.is_finite() && ell >= 0.0) {
        return Err(LipschitzError::InvalidArgument(format!("Lipschitz constant {ell} must be finite and ≥ 0")));
    }
    Ok(())
}

/// Samples `‖f(Hx) − f(Hx̂)‖ / ‖H(x − x̂)‖` over the system's domain.
pub fn verify_lipschitz(sys: &LipschitzSystem, ell: f64, config: &VerifyConfig) -> Result<LipschitzCheck, LipschitzError> {
    verify_innovation_lipschitz(sys, ell, &Mat::zeros(sys.dims().k, sys.dims().ny), config)
}

/// Samples `‖f(Hx) − f(Hx̂ + KC(x − x̂))‖ / ‖(H − KC)(x − x̂)‖` over the system's domain.
pub fn verify_innovation_lipschitz(
    sys: &LipschitzSystem,
    ell: f64,
    k_gain: &Mat,
    config: &VerifyConfig,
) -> Result<LipschitzCheck, LipschitzError> {
    check_ell(ell)?;
    let d = sys.dims();
    if k_gain.nrows() != d.k || k_gain.ncols() != d.ny {
        return Err(LipschitzError::InvalidArgument(format!(
            "K is {}x{}, expected {}x{}",
            k_gain.nrows(),
            k_gain.ncols(),
            d.k,
            d.ny
        )));
    }
    let h = sys.h();
    let kc = k_gain * sys.c();
    let reduced = h - &kc;
    let f = sys.nonlinearity();
    let raw = scan_pairs(sys.domain(), config, |x, x_hat| {
        let diff = x - x_hat;
        let v_true = h * x;
        let v_obs = h * x_hat + &kc * &diff;
        let numerator = (f.eval(&v_true) - f.eval(&v_obs)).norm();
        let denominator = (&reduced * &diff).norm();
        ratio(numerator, denominator, v_true.norm())
    })?;
    Ok(raw.into_check(ell * (1.0 + config.slack)))
}

/// `‖f(a) − f(b) − Df(c)(a − b)‖`: how far the pointwise mean-value identity misses at `c`.
pub fn mean_value_residual(f: &dyn Nonlinearity, a: &Vector, b: &Vector, c: &Vector) -> f64 {
    (f.eval(a) - f.eval(b) - f.jacobian(c) * (a - b)).norm()
}
