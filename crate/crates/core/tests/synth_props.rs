mod common;

use std::sync::Arc;

use common::{jacobi_eigenvalues, jacobi_max, paper_observer, sidarthe, Mat};
use observer_synth::model::{build_system, check_detectable_pair, LinearMap, StateDomain};
use observer_synth::sdp::{SolveOptions, SolveStatus};
use observer_synth::synth::evaluate_lmi_blocks;
use observer_synth::{
    assemble_lmi_generalized, assemble_lmi_lipschitz, check_ari, design, recover_gains, solve_feasibility,
    spectral_abscissa, DesignMode, DesignOptions, LipschitzSystem, ObserverGains,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Trial {
    sys: LipschitzSystem,
    ell: f64,
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

/// Random detectable `(A, C)` with `n_x ≤ 4`; resamples until the PBH test passes.
fn random_trial(seed: u64) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let nx = rng.random_range(1..=4);
        let ny = rng.random_range(1..=nx);
        let nf = rng.random_range(1..=3);
        let k = rng.random_range(1..=3);
        let a = random_matrix(&mut rng, nx, nx, 1.5);
        let c = random_matrix(&mut rng, ny, nx, 1.0);
        if !check_detectable_pair(&a, &c, 0.0).detectable {
            continue;
        }
        let g = random_matrix(&mut rng, nx, nf, 0.5);
        let h = random_matrix(&mut rng, k, nx, 0.5);
        let ell = rng.random_range(0.05..1.0);
        let f = Arc::new(LinearMap::zero(k, nf));
        let sys = build_system(a, g, h, c, f, StateDomain::unit_box(nx)).unwrap();
        return Trial { sys, ell };
    }
}

/// The Riccati expression written out directly, with Jacobi for the spectrum.
fn ari_oracle(sys: &LipschitzSystem, gains: &ObserverGains, p: &Mat, ell: f64) -> f64 {
    let n = sys.dims().nx;
    let m = sys.a() - gains.l() * sys.c() * sys.a() - gains.j() * sys.c();
    let ng = (Mat::identity(n, n) - gains.l() * sys.c()) * sys.g();
    let red = sys.h() - gains.k() * sys.c();
    let ari = m.transpose() * p + p * &m + p * &ng * ng.transpose() * p + red.transpose() * &red * (ell * ell);
    jacobi_max(&ari)
}

type Outcome = (u64, SolveStatus, Option<(f64, f64)>);

#[test]
fn schur_equivalence_suite() {
    let outcomes: Vec<Outcome> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let t = random_trial(seed);
            let lmi = assemble_lmi_lipschitz(&t.sys, t.ell).unwrap();
            let sol = solve_feasibility(&lmi.problem, &SolveOptions { seed, ..Default::default() }).unwrap();
            let ari = (sol.status == SolveStatus::Feasible).then(|| {
                let vars = lmi.layout.extract(&sol.theta);
                let (gains, cert) = recover_gains(&t.sys, &vars, &lmi.mode).unwrap();
                let lib = check_ari(&t.sys, &gains, &cert.p, &lmi.mode).unwrap();
                (lib, ari_oracle(&t.sys, &gains, &cert.p, t.ell))
            });
            (seed, sol.status, ari)
        })
        .collect();
    let violations: Vec<_> = outcomes
        .iter()
        .filter_map(|(seed, _, ari)| ari.filter(|(lib, oracle)| !(*lib < 0.0 && *oracle < 0.0)).map(|a| (seed, a)))
        .collect();
    let feasible = outcomes.iter().filter(|o| o.1 == SolveStatus::Feasible).count();
    eprintln!("feasible {feasible} of {}", outcomes.len());
    assert!(violations.is_empty(), "{violations:?}");
    assert!(feasible >= 100, "only {feasible} feasible instances");
}

#[test]
fn shrinking_q_breaks_block_two() {
    let mut checked = 0;
    for seed in 0..40u64 {
        let t = random_trial(seed);
        let mode = DesignMode::Lipschitz { ell: t.ell };
        let Ok(out) = design(&t.sys, &mode, &DesignOptions::default(), &SolveOptions::default()) else {
            continue;
        };
        let mut vars = out.lmi.layout.extract(&out.solution.theta);
        let red = t.sys.h() - &vars.k * t.sys.c();
        let floor = red.transpose() * &red * (t.ell * t.ell);
        let eig = floor.clone().symmetric_eigen();
        let idx = eig.eigenvalues.imax();
        let top = eig.eigenvalues[idx];
        if top < 1e-6 {
            continue;
        }
        let u = eig.eigenvectors.column(idx).into_owned();
        vars.q = &floor - &u * u.transpose() * (0.5 * top);
        let (_, b2) = evaluate_lmi_blocks(&t.sys, &mode, &vars).unwrap();
        assert!(jacobi_max(&b2) > 1e-9, "seed {seed}: block 2 still feasible");
        checked += 1;
    }
    assert!(checked >= 20, "{checked}");
}

#[test]
fn recovered_gains_solve_the_substitution() {
    for seed in 0..30u64 {
        let t = random_trial(seed);
        let mode = DesignMode::Lipschitz { ell: t.ell };
        let Ok(out) = design(&t.sys, &mode, &DesignOptions::default(), &SolveOptions::default()) else {
            continue;
        };
        let vars = out.lmi.layout.extract(&out.solution.theta);
        let p = &out.certificate.p;
        let rel = |lhs: Mat, rhs: &Mat| (lhs - rhs).amax() / (1.0 + rhs.amax());
        assert!(rel(p * out.gains.j(), &vars.s) <= 1e-9);
        assert!(rel(p * out.gains.l(), &vars.r) <= 1e-9);
        assert_eq!(out.gains.k(), &vars.k);
        assert!(jacobi_eigenvalues(p)[0] > 0.0);
    }
}

#[test]
fn sidarthe_design_is_certified() {
    let sys = sidarthe();
    let lmi = assemble_lmi_lipschitz(&sys, 1.0).unwrap();
    let sizes: Vec<usize> = lmi.problem.blocks().iter().map(|b| b.size()).collect();
    assert_eq!(&sizes[..2], &[13, 14]);
    let out =
        design(&sys, &DesignMode::Lipschitz { ell: 1.0 }, &DesignOptions::default(), &SolveOptions::default()).unwrap();
    let c = &out.certificate;
    assert!(c.is_valid());
    assert!(c.ari_max_eig <= -1e-8, "{}", c.ari_max_eig);
    assert!(c.spectral_abscissa_m <= -1e-6, "{}", c.spectral_abscissa_m);
    assert!(jacobi_eigenvalues(&c.p)[0] >= 1e-8);
    assert!((ari_oracle(&sys, &out.gains, &c.p, 1.0) - c.ari_max_eig).abs() < 1e-9);
}

#[test]
fn printed_gains_give_a_hurwitz_m() {
    let sys = sidarthe();
    let gains = paper_observer(&sys);
    let m = sys.a() - gains.l() * sys.c() * sys.a() - gains.j() * sys.c();
    let alpha = spectral_abscissa(&m);
    // Reference value from an independent eigen-solver run on the same matrices.
    assert!((alpha - -1.150498164322546).abs() < 1e-9, "{alpha}");
    assert_eq!(gains.m(), &m);
}

#[test]
fn lipschitz_form_equals_scalar_weighted_form() {
    for seed in 0..20u64 {
        let t = random_trial(seed);
        let d = t.sys.dims();
        let v = Mat::identity(d.nf, d.nf);
        let w = Mat::identity(d.k, d.k) * (t.ell * t.ell);
        let lip = assemble_lmi_lipschitz(&t.sys, t.ell).unwrap();
        let gen = assemble_lmi_generalized(&t.sys, &v, &w).unwrap();
        assert_eq!(lip.problem, gen.problem);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gains = ObserverGains::new(
            &t.sys,
            random_matrix(&mut rng, d.nx, d.ny, 1.0),
            random_matrix(&mut rng, d.nx, d.ny, 1.0),
            random_matrix(&mut rng, d.k, d.ny, 1.0),
        )
        .unwrap();
        let b = random_matrix(&mut rng, d.nx, d.nx, 1.0);
        let p = &b * b.transpose() + Mat::identity(d.nx, d.nx);
        let a1 = check_ari(&t.sys, &gains, &p, &DesignMode::Lipschitz { ell: t.ell }).unwrap();
        let a2 = check_ari(&t.sys, &gains, &p, &DesignMode::Generalized { v, w }).unwrap();
        assert!((a1 - a2).abs() <= 1e-12 * (1.0 + a1.abs()), "{a1} vs {a2}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn m_and_n_follow_the_gain_identities(seed in any::<u64>()) {
        let t = random_trial(seed);
        let d = t.sys.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let j = random_matrix(&mut rng, d.nx, d.ny, 3.0);
        let l = random_matrix(&mut rng, d.nx, d.ny, 3.0);
        let k = random_matrix(&mut rng, d.k, d.ny, 3.0);
        let gains = ObserverGains::new(&t.sys, j.clone(), l.clone(), k).unwrap();
        let (a, c) = (t.sys.a(), t.sys.c());
        prop_assert_eq!(gains.m(), &(a - &l * c * a - &j * c));
        prop_assert_eq!(gains.n(), &(Mat::identity(d.nx, d.nx) - &l * c));
    }

    #[test]
    fn assembled_blocks_are_affine_and_match_direct_evaluation(seed in any::<u64>(), alpha in -2.0..3.0f64) {
        let t = random_trial(seed);
        let lmi = assemble_lmi_lipschitz(&t.sys, t.ell).unwrap();
        let n = lmi.problem.num_variables();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let th1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let th2: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = th1.iter().zip(&th2).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        for b in 0..lmi.problem.blocks().len() {
            let lhs = lmi.problem.block_matrix(b, &mix);
            let rhs = lmi.problem.block_matrix(b, &th1) * alpha + lmi.problem.block_matrix(b, &th2) * (1.0 - alpha);
            prop_assert!((&lhs - &rhs).amax() <= 1e-12 * (1.0 + rhs.amax()));
        }
        let vars = lmi.layout.extract(&th1);
        let (b1, b2) = evaluate_lmi_blocks(&t.sys, &lmi.mode, &vars).unwrap();
        prop_assert!((lmi.problem.block_matrix(0, &th1) - b1).amax() <= 1e-12);
        prop_assert!((lmi.problem.block_matrix(1, &th1) - b2).amax() <= 1e-12);
    }
}
