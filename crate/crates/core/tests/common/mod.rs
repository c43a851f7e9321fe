#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use observer_synth::model::{build_sidarthe_v, SidartheVParams};
use observer_synth::{LipschitzSystem, ObserverGains};

pub type Mat = DMatrix<f64>;

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending. Deliberately independent of
/// the library's eigen routine.
pub fn jacobi_eigenvalues(m: &Mat) -> Vec<f64> {
    let n = m.nrows();
    let mut a = (m + m.transpose()) * 0.5;
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-30 * (1.0 + a.norm_squared()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn jacobi_max(m: &Mat) -> f64 {
    jacobi_eigenvalues(m).last().copied().unwrap_or(f64::NEG_INFINITY)
}

pub fn sidarthe() -> LipschitzSystem {
    build_sidarthe_v(&SidartheVParams::reference()).unwrap()
}

/// The SIDARTHE-V right-hand side written out term by term.
pub fn sidarthe_rhs(p: &SidartheVParams, x: &[f64]) -> Vec<f64> {
    let [s, i, d, a, r, t, _h, _e, _v] = [x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8]];
    let infection = s * (p.alpha * i + p.beta * d + p.gamma * a + p.delta * r);
    vec![
        -infection - p.phi * s,
        infection - (p.epsilon + p.zeta + p.lambda) * i,
        p.epsilon * i - (p.eta + p.rho) * d,
        p.zeta * i - (p.theta + p.mu + p.kappa) * a,
        p.eta * d + p.theta * a - (p.nu + p.xi + p.tau1) * r,
        p.mu * a + p.nu * r - (p.sigma + p.tau2) * t,
        p.lambda * i + p.rho * d + p.kappa * a + p.xi * r + p.sigma * t,
        p.tau1 * r + p.tau2 * t,
        p.phi * s,
    ]
}

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn rows_to_mat(v: &serde_json::Value) -> Mat {
    let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone()).unwrap();
    Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

/// `(J, L, K)` as printed in the case study.
pub fn paper_gains() -> (Mat, Mat, Mat) {
    let text = std::fs::read_to_string(workspace_root().join("configs/paper_gains.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    (rows_to_mat(&v["j"]), rows_to_mat(&v["l"]), rows_to_mat(&v["k"]))
}

pub fn paper_observer(sys: &LipschitzSystem) -> ObserverGains {
    let (j, l, k) = paper_gains();
    ObserverGains::new(sys, j, l, k).unwrap()
}

pub fn vec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
