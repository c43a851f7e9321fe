use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::linalg::{spectral_norm, Mat};

/// PBH threshold on the smallest singular value, relative to `‖A‖₂`.
pub const DEFAULT_PBH_RELATIVE_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PbhMode {
    pub eigenvalue_re: f64,
    pub eigenvalue_im: f64,
    /// Smallest singular value of `[A − λI; C]`.
    pub sigma_min: f64,
}

impl PbhMode {
    pub fn eigenvalue(&self) -> Complex64 {
        Complex64::new(self.eigenvalue_re, self.eigenvalue_im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectabilityReport {
    pub detectable: bool,
    /// The examined mode with the smallest PBH singular value; `None` when every
    /// eigenvalue lies left of `−margin`.
    pub worst_mode: Option<PbhMode>,
    pub threshold: f64,
}

/// PBH detectability test of `(A, C)`.
///
/// Every eigenvalue with `Re λ ≥ −margin` must leave `[A − λI; C]` with full column
/// rank, judged by its smallest singular value against `1e-9·‖A‖₂`.
pub fn check_detectable_pair(a: &Mat, c: &Mat, margin: f64) -> DetectabilityReport {
    assert!(a.is_square(), "A must be square");
    assert_eq!(a.ncols(), c.ncols(), "C must have as many columns as A");
    let n = a.nrows();
    let threshold = DEFAULT_PBH_RELATIVE_THRESHOLD * spectral_norm(a);
    let mut worst: Option<PbhMode> = None;
    if n > 0 {
        for lambda in a.complex_eigenvalues().iter() {
            if lambda.re < -margin {
                continue;
            }
            let stacked = DMatrix::<Complex64>::from_fn(n + c.nrows(), n, |i, j| {
                if i < n {
                    let diag = if i == j { *lambda } else { Complex64::new(0.0, 0.0) };
                    Complex64::new(a[(i, j)], 0.0) - diag
                } else {
                    Complex64::new(c[(i - n, j)], 0.0)
                }
            });
            let sigma_min = stacked.singular_values().min();
            if worst.is_none_or(|w| sigma_min < w.sigma_min) {
                worst = Some(PbhMode { eigenvalue_re: lambda.re, eigenvalue_im: lambda.im, sigma_min });
            }
        }
    }
    let detectable = worst.is_none_or(|w| w.sigma_min > threshold);
    DetectabilityReport { detectable, worst_mode: worst, threshold }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_unobserved_mode_is_detectable() {
        let r = check_detectable_pair(&Mat::from_element(1, 1, -1.0), &Mat::zeros(1, 1), 0.0);
        assert!(r.detectable);
        assert!(r.worst_mode.is_none());
    }

    #[test]
    fn unstable_unobserved_mode_is_not() {
        let r = check_detectable_pair(&Mat::from_element(1, 1, 1.0), &Mat::zeros(1, 1), 0.0);
        assert!(!r.detectable);
        let w = r.worst_mode.unwrap();
        assert_eq!(w.eigenvalue(), Complex64::new(1.0, 0.0));
        assert!(w.sigma_min < 1e-15);
    }

    #[test]
    fn oscillating_pair_observed_through_one_coordinate() {
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let c = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(check_detectable_pair(&a, &c, 0.0).detectable);
        let blind = Mat::zeros(1, 2);
        assert!(!check_detectable_pair(&a, &blind, 0.0).detectable);
    }
}
