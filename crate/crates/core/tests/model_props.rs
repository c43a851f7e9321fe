mod common;

use std::sync::Arc;

use common::{sidarthe, sidarthe_rhs, vec, Mat};
use nalgebra::DVector;
use observer_synth::model::{
    build_networked_sis, build_system, check_detectable_pair, LinearMap, ModelError, SidartheVParams, SisNetworkParams,
    StateDomain,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn component_sum_vanishes_on_a_million_states() {
    let sys = sidarthe();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000_000 {
        let x = DVector::from_fn(9, |_, _| rng.random_range(0.0..=1.0));
        worst = worst.max(sys.eval_dynamics(&x).sum().abs());
    }
    assert!(worst <= 1e-12, "worst component sum {worst}");
}

#[test]
fn hand_evaluated_susceptible_rate() {
    let sys = sidarthe();
    let mut x = vec![0.0; 9];
    x[0] = 0.9;
    x[1] = 0.1;
    let dx = sys.eval_dynamics(&vec(&x));
    let expected = -0.9 * 0.3872 * 0.1 - 0.05 * 0.9;
    assert!((dx[0] - expected).abs() < 1e-15, "{} vs {expected}", dx[0]);
    assert!((expected + 0.079848).abs() < 1e-15);
    assert!(sys.eval_dynamics(&DVector::zeros(9)).iter().all(|&v| v == 0.0));
}

#[test]
fn sidarthe_detectability_matches_precomputed_pbh() {
    // Precomputed with an independent SVD: the three zero modes (H, E, V) give the
    // smallest stacked singular value 0.049705633260103965.
    let sys = sidarthe();
    let report = check_detectable_pair(sys.a(), sys.c(), 0.0);
    assert!(report.detectable);
    let worst = report.worst_mode.unwrap();
    assert!((worst.sigma_min - 0.049705633260103965).abs() < 1e-9, "{}", worst.sigma_min);
    assert!(worst.eigenvalue_re.abs() < 1e-12);
}

#[test]
fn spec_shape_errors() {
    let one = |v: f64| Mat::from_element(1, 1, v);
    let ok = build_system(one(-1.0), one(0.0), one(1.0), one(1.0), Arc::new(LinearMap::zero(1, 1)), StateDomain::unit_box(1));
    assert!(ok.is_ok());
    let bad = build_system(
        Mat::identity(2, 2),
        Mat::zeros(2, 1),
        Mat::zeros(1, 2),
        Mat::zeros(1, 3),
        Arc::new(LinearMap::zero(1, 1)),
        StateDomain::unit_box(2),
    );
    assert!(matches!(bad, Err(ModelError::DimensionMismatch { .. })));
}

#[test]
fn two_node_sis_substitution() {
    let params = SisNetworkParams {
        betas: vec![1.0, 1.0],
        deltas: vec![0.0, 0.0],
        weights: Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        measured_nodes: vec![0],
        allow_self_loops: false,
    };
    let sys = build_networked_sis(&params).unwrap();
    assert_eq!(sys.a(), &Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    let f = sys.eval_f(&vec(&[0.3, 0.7]));
    assert_eq!(f.as_slice(), &[-0.3 * 0.7, -0.7 * 0.3]);
}

fn orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Mat {
    let m = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn split_matches_unsplit_equations(x in proptest::collection::vec(0.0..=1.0f64, 9), scale in 0.0..2.0f64) {
        let mut p = SidartheVParams::reference();
        p.alpha *= scale;
        p.gamma *= scale;
        let sys = observer_synth::model::build_sidarthe_v(&p).unwrap();
        let split = sys.eval_dynamics(&vec(&x));
        let direct = sidarthe_rhs(&p, &x);
        for (a, b) in split.iter().zip(&direct) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!(split.sum().abs() <= 1e-12);
    }

    #[test]
    fn sis_matches_recomputation(n in 1usize..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let betas: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let deltas: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let w = Mat::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random_range(0.0..1.0) });
        let params = SisNetworkParams {
            betas: betas.clone(),
            deltas: deltas.clone(),
            weights: w.clone(),
            measured_nodes: vec![0],
            allow_self_loops: false,
        };
        let sys = build_networked_sis(&params).unwrap();
        let x = DVector::from_fn(n, |_, _| rng.random_range(0.0..=1.0));
        let b = Mat::from_diagonal(&DVector::from_vec(betas));
        let d = Mat::from_diagonal(&DVector::from_vec(deltas));
        let bw = &b * &w;
        let expected = -Mat::from_diagonal(&x) * &bw * &x + (&bw - &d) * &x;
        prop_assert!((sys.eval_dynamics(&x) - expected).amax() <= 1e-12);
    }

    #[test]
    fn detectability_survives_orthogonal_similarity(n in 1usize..=5, ny in 1usize..=3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Mat::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        // Sometimes blind the output to make undetectable pairs likely.
        let c = if rng.random_bool(0.3) {
            Mat::zeros(ny, n)
        } else {
            Mat::from_fn(ny, n, |_, _| rng.random_range(-1.0..1.0))
        };
        let t = orthogonal(n, &mut rng);
        let a2 = t.transpose() * &a * &t;
        let c2 = &c * &t;
        let r1 = check_detectable_pair(&a, &c, 0.0);
        let r2 = check_detectable_pair(&a2, &c2, 0.0);
        // Skip pairs sitting on the numerical knife edge.
        let near_edge = a.complex_eigenvalues().iter().any(|l| l.re.abs() < 1e-6)
            || [&r1, &r2].iter().any(|r| r.worst_mode.as_ref().is_some_and(|m| (m.sigma_min - r.threshold).abs() < 1e-6));
        prop_assume!(!near_edge);
        prop_assert_eq!(r1.detectable, r2.detectable);
    }
}
