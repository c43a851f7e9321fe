mod common;

use common::{jacobi_max, Mat};
use observer_synth::sdp::{
    export_sdpa, import_sdpa, import_sdpa_solution, BlockBuilder, SdpProblem, SolveOptions, SolveStatus, Strictness,
};
use observer_synth::solve_feasibility;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const BOX: f64 = 10.0;
const STEP: f64 = 0.01;
const MARGIN: f64 = 1e-6;
const TOL: f64 = 1e-9;

/// One block `F0 + θ₁F1 + θ₂F2`, each stored as `[a, b, c]` for `[[a, b], [b, c]]`.
#[derive(Debug, Clone)]
struct Pencil {
    f: [[f64; 3]; 3],
    strict: bool,
}

impl Pencil {
    fn max_eig(&self, t1: f64, t2: f64) -> f64 {
        let e = |k: usize| self.f[0][k] + t1 * self.f[1][k] + t2 * self.f[2][k];
        let (a, b, c) = (e(0), e(1), e(2));
        0.5 * (a + c) + (0.25 * (a - c) * (a - c) + b * b).sqrt()
    }

    fn target(&self) -> f64 {
        if self.strict {
            -MARGIN
        } else {
            TOL
        }
    }

    fn spectral(k: [f64; 3]) -> f64 {
        let (a, b, c) = (k[0], k[1], k[2]);
        0.5 * (a + c).abs() + (0.25 * (a - c) * (a - c) + b * b).sqrt()
    }
}

fn random_pencil(rng: &mut ChaCha8Rng) -> Pencil {
    // Traceless directions with a positive-trace constant give certain infeasibility.
    let traceless = rng.random_bool(0.3);
    let strict = rng.random_bool(0.5);
    let mut sym = |traceless: bool| {
        let a = rng.random_range(-1.0..1.0);
        let b = rng.random_range(-1.0..1.0);
        let c = if traceless { -a } else { rng.random_range(-1.0..1.0) };
        [a, b, c]
    };
    let f1 = sym(traceless);
    let f2 = sym(traceless);
    let f0 = sym(false);
    Pencil { f: [f0, f1, f2], strict }
}

fn build(pencils: &[Pencil]) -> SdpProblem {
    build_with_margin(pencils, MARGIN)
}

fn build_with_margin(pencils: &[Pencil], margin: f64) -> SdpProblem {
    let mut p = SdpProblem::new(margin);
    for name in ["t1", "t2"] {
        let v = p.add_variable(name);
        p.set_bounds(v, Some(-BOX), Some(BOX)).unwrap();
    }
    for pen in pencils {
        let mut b = BlockBuilder::new(2, if pen.strict { Strictness::Strict } else { Strictness::NonStrict });
        let fill = |m: &mut Mat, k: [f64; 3]| {
            m[(0, 0)] = k[0];
            m[(0, 1)] = k[1];
            m[(1, 0)] = k[1];
            m[(1, 1)] = k[2];
        };
        fill(b.constant_mut(), pen.f[0]);
        fill(b.term_mut(0), pen.f[1]);
        fill(b.term_mut(1), pen.f[2]);
        p.add_block(b).unwrap();
    }
    p
}

enum Verdict {
    /// A grid point meets every block target; carries the best slack.
    Feasible(f64),
    /// Every point of the box misses some target.
    Infeasible,
    Inconclusive,
}

fn grid_oracle(pencils: &[Pencil]) -> Verdict {
    let n = (2.0 * BOX / STEP).round() as usize;
    let best = (0..=n)
        .into_par_iter()
        .map(|i| {
            let t1 = -BOX + i as f64 * STEP;
            let mut row_best = f64::INFINITY;
            for j in 0..=n {
                let t2 = -BOX + j as f64 * STEP;
                let worst = pencils.iter().map(|p| p.max_eig(t1, t2) - p.target()).fold(f64::NEG_INFINITY, f64::max);
                row_best = row_best.min(worst);
            }
            row_best
        })
        .reduce(|| f64::INFINITY, f64::min);
    // λ_max moves by at most (‖F1‖ + ‖F2‖)·h/2 between a point and its nearest grid node.
    let lip = pencils
        .iter()
        .map(|p| Pencil::spectral(p.f[1]) + Pencil::spectral(p.f[2]))
        .fold(0.0, f64::max);
    if best <= 0.0 {
        Verdict::Feasible(-best)
    } else if best > lip * STEP / 2.0 {
        Verdict::Infeasible
    } else {
        Verdict::Inconclusive
    }
}

#[test]
fn solver_never_contradicts_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut contradictions = Vec::new();
    let (mut feasible, mut infeasible, mut unknown) = (0, 0, 0);
    for case in 0..100 {
        let blocks = if rng.random_bool(0.25) { 2 } else { 1 };
        let pencils: Vec<Pencil> = (0..blocks).map(|_| random_pencil(&mut rng)).collect();
        let problem = build(&pencils);
        let sol = solve_feasibility(&problem, &SolveOptions::default()).unwrap();
        let oracle = grid_oracle(&pencils);
        match sol.status {
            SolveStatus::Feasible => {
                feasible += 1;
                let (t1, t2) = (sol.theta[0], sol.theta[1]);
                let recheck = pencils.iter().enumerate().all(|(b, p)| {
                    let m = problem.block_matrix(b, &sol.theta);
                    jacobi_max(&m) <= p.target() + 1e-12 && (p.max_eig(t1, t2) - jacobi_max(&m)).abs() < 1e-9
                });
                if !recheck || t1.abs() > BOX + TOL || t2.abs() > BOX + TOL {
                    contradictions.push(format!("case {case}: returned point fails the independent check"));
                }
                if matches!(oracle, Verdict::Infeasible) {
                    contradictions.push(format!("case {case}: Feasible but the grid proves infeasibility"));
                }
            }
            SolveStatus::Infeasible => {
                infeasible += 1;
                if let Verdict::Feasible(_) = oracle {
                    contradictions.push(format!("case {case}: Infeasible but the grid has a feasible point"));
                }
            }
            SolveStatus::Unknown => {
                unknown += 1;
                if let Verdict::Feasible(slack) = oracle {
                    if slack > 1e-3 {
                        contradictions.push(format!("case {case}: Unknown on a problem with slack {slack}"));
                    }
                }
            }
        }
    }
    eprintln!("feasible {feasible}, infeasible {infeasible}, unknown {unknown}");
    assert!(contradictions.is_empty(), "{contradictions:#?}");
    assert!(feasible >= 10 && infeasible >= 10, "feasible {feasible}, infeasible {infeasible}, unknown {unknown}");
}

#[test]
fn determinism_across_calls_and_threads() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let problem = build(&[random_pencil(&mut rng), random_pencil(&mut rng)]);
    let opts = SolveOptions { seed: 9, ..Default::default() };
    let solve = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| solve_feasibility(&problem, &opts).unwrap())
    };
    let a = solve(1);
    assert_eq!(a, solve(1));
    assert_eq!(a, solve(3));
}

#[test]
fn solution_round_trip_preserves_status() {
    let pen = Pencil { f: [[-1.0, 0.0, -1.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], strict: true };
    let problem = build(&[pen]);
    let sol = solve_feasibility(&problem, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Feasible);
    let text = sol.theta.iter().map(|t| format!("{t:?}")).collect::<Vec<_>>().join(" ");
    let back = import_sdpa_solution(&problem, &text).unwrap();
    assert_eq!(back.theta, sol.theta);
    assert_eq!(back.status, SolveStatus::Feasible);
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e3..1e3f64, Just(0.0), Just(1.0), Just(-0.1), -1e-8..1e-8f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn export_import_round_trip_is_exact(
        coeffs in proptest::collection::vec(finite(), 18),
        strict in proptest::collection::vec(any::<bool>(), 2),
        lo in proptest::option::of(-5.0..0.0f64),
        hi in proptest::option::of(0.0..5.0f64),
        margin in 0.0..1e-3f64,
    ) {
        let pencils: Vec<Pencil> = (0..2)
            .map(|b| {
                let c = &coeffs[9 * b..9 * b + 9];
                Pencil { f: [[c[0], c[1], c[2]], [c[3], c[4], c[5]], [c[6], c[7], c[8]]], strict: strict[b] }
            })
            .collect();
        let mut problem = build_with_margin(&pencils, margin);
        problem.set_bounds(0, lo, hi).unwrap();
        problem.set_bounds(1, None, hi).unwrap();
        let text = export_sdpa(&problem).unwrap();
        let back = import_sdpa(&text).unwrap();
        prop_assert_eq!(&back, &problem);
        prop_assert_eq!(export_sdpa(&back).unwrap(), text);
    }
}
