//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any criterion fails.

use std::f64::consts::TAU;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use observer_synth::lipschitz::mean_value_residual;
use observer_synth::model::{build_system, check_detectable_pair, LinearMap, Nonlinearity, StateDomain};
use observer_synth::sdp::{export_sdpa, import_sdpa, BlockBuilder, SdpProblem, Strictness};
use observer_synth::sim::{rk4_step, NoiseSigma};
use observer_synth::{
    assemble_lmi_lipschitz, build_sidarthe_v, check_ari, estimate_lipschitz, metrics, recover_gains, simulate,
    simulate_arcak, simulate_luenberger, solve_feasibility, EstimateConfig, LipschitzSystem, ObserverGains,
    SidartheVParams, SimConfig, SolveOptions, SolveStatus, Trajectory,
};
use observer_synth_cli::commands::GainsFile;
use observer_synth_cli::{cmd_design, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Mat = DMatrix<f64>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn sidarthe() -> LipschitzSystem {
    build_sidarthe_v(&SidartheVParams::reference()).unwrap()
}

fn rows(v: &serde_json::Value) -> Mat {
    let r: Vec<Vec<f64>> = serde_json::from_value(v.clone()).unwrap();
    Mat::from_fn(r.len(), r[0].len(), |i, j| r[i][j])
}

fn min_sym_eig(m: &Mat) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

fn abscissa(m: &Mat) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Shared state produced by the design criterion and reused downstream.
struct Designed {
    sys: LipschitzSystem,
    gains: ObserverGains,
    p: Mat,
}

fn criterion_1() -> Verdict {
    let sys = sidarthe();
    let cfg = EstimateConfig { grid_density: 10, ..Default::default() };
    let t = Instant::now();
    let simplex = estimate_lipschitz(&sys, &StateDomain::unit_simplex(9), &cfg).unwrap();
    let boxed = estimate_lipschitz(&sys, &StateDomain::unit_box(9), &cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = (simplex.ell - 1.0).abs() <= 5e-3 && (boxed.ell - 5f64.sqrt()).abs() <= 5e-3 && secs <= 60.0;
    verdict(
        pass,
        format!(
            "simplex ell {:.6}, box ell {:.6} (sqrt 5 = {:.6}), {} box evaluations, {secs:.2} s",
            simplex.ell,
            boxed.ell,
            5f64.sqrt(),
            boxed.samples_used
        ),
    )
}

fn criterion_2() -> (Verdict, Option<Designed>) {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(&configs().join("sidarthe.json")).unwrap();
    cfg.config.design.ell = Some(1.0);
    cfg.out_override = Some(out.path().to_path_buf());
    let t = Instant::now();
    let result = cmd_design(&cfg);
    let secs = t.elapsed().as_secs_f64();
    if let Err(e) = result {
        return (verdict(false, format!("cmd_design exited {}: {e}", e.code)), None);
    }
    let read = |f: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(out.path().join(f)).unwrap()).unwrap()
    };
    let cert = read("certificate.json");
    let ari = cert["ari_max_eig"].as_f64().unwrap();
    let alpha = cert["spectral_abscissa_m"].as_f64().unwrap();
    let p = rows(&cert["p"]);
    let p_min = min_sym_eig(&p);
    let g: GainsFile = serde_json::from_value(read("gains.json")).unwrap();
    let sys = sidarthe();
    let gains = ObserverGains::new(&sys, g.j, g.l, g.k).unwrap();
    let m = sys.a() - gains.l() * sys.c() * sys.a() - gains.j() * sys.c();
    let alpha_check = abscissa(&m);
    let pass = ari <= -1e-8 && alpha <= -1e-6 && alpha_check <= -1e-6 && p_min >= 1e-8 && secs <= 600.0;
    let v = verdict(
        pass,
        format!("ari_max_eig {ari:.4e}, spectral_abscissa_M {alpha:.4e}, min eig P {p_min:.4e}, {secs:.2} s"),
    );
    (v, Some(Designed { sys, gains, p }))
}

fn paper_gains(sys: &LipschitzSystem) -> ObserverGains {
    let text = std::fs::read_to_string(configs().join("paper_gains.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    ObserverGains::new(sys, rows(&v["j"]), rows(&v["l"]), rows(&v["k"])).unwrap()
}

fn criterion_3() -> Verdict {
    let sys = sidarthe();
    let g = paper_gains(&sys);
    let m = sys.a() - g.l() * sys.c() * sys.a() - g.j() * sys.c();
    let alpha = abscissa(&m);
    verdict(alpha < 0.0, format!("spectral abscissa of M with the printed J, L: {alpha:.12}"))
}

fn noiseless() -> SimConfig {
    let mut cfg = SimConfig::sidarthe_default();
    cfg.noise_sigma = NoiseSigma::Uniform(0.0);
    cfg
}

fn criterion_4(d: &Designed, accepted: &mut Vec<Trajectory>) -> Verdict {
    let traj = match simulate(&d.sys, &d.gains, &noiseless()) {
        Ok(t) => t,
        Err(e) => return verdict(false, e.to_string()),
    };
    let e0 = traj.error(0).norm();
    let best = (0..traj.len()).map(|i| traj.error(i).norm() / e0).fold(f64::INFINITY, f64::min);
    let v: Vec<f64> = (0..traj.len()).map(|i| traj.error(i).dot(&(&d.p * traj.error(i)))).collect();
    let rise = v.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let pass = best < 1e-3 && rise <= 1e-10 * v[0];
    accepted.push(traj);
    verdict(pass, format!("min ||e(t)||/||e(0)|| = {best:.3e} over T <= 200; largest step increase of V = {rise:.3e} (V(0) = {:.3e})", v[0]))
}

fn criterion_5(d: &Designed, accepted: &mut Vec<Trajectory>) -> Verdict {
    let cfg = SimConfig::sidarthe_default();
    let traj = match simulate(&d.sys, &d.gains, &cfg) {
        Ok(t) => t,
        Err(e) => return verdict(false, e.to_string()),
    };
    let steady = metrics(&traj, None).unwrap().summary.steady_percent_error.unwrap();
    let printed = simulate(&d.sys, &paper_gains(&d.sys), &cfg)
        .ok()
        .and_then(|t| metrics(&t, None).ok())
        .and_then(|m| m.summary.steady_percent_error);
    accepted.push(traj);
    for baseline in [
        simulate_luenberger(&d.sys, d.gains.l(), &cfg),
        simulate_arcak(&d.sys, d.gains.l(), d.gains.k(), &cfg),
    ]
    .into_iter()
    .flatten()
    {
        accepted.push(baseline);
    }
    verdict(
        (0.5..=5.0).contains(&steady),
        format!(
            "steady percent error {steady:.4}% at sigma = 1e-4 (band [0.5, 5]); printed gains give {}",
            printed.map_or("n/a".into(), |p| format!("{p:.4}%"))
        ),
    )
}

fn random_detectable(seed: u64) -> (LipschitzSystem, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let nx = rng.random_range(1..=4);
        let ny = rng.random_range(1..=nx);
        let (nf, k) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let mut m = |r: usize, c: usize, s: f64| Mat::from_fn(r, c, |_, _| rng.random_range(-s..s));
        let (a, c) = (m(nx, nx, 1.5), m(ny, nx, 1.0));
        if !check_detectable_pair(&a, &c, 0.0).detectable {
            continue;
        }
        let (g, h) = (m(nx, nf, 0.5), m(k, nx, 0.5));
        let ell = rng.random_range(0.05..1.0);
        let sys = build_system(a, g, h, c, Arc::new(LinearMap::zero(k, nf)), StateDomain::unit_box(nx)).unwrap();
        return (sys, ell);
    }
}

fn criterion_6() -> Verdict {
    use rayon::prelude::*;
    let results: Vec<Option<f64>> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let (sys, ell) = random_detectable(seed);
            let lmi = assemble_lmi_lipschitz(&sys, ell).unwrap();
            let sol = solve_feasibility(&lmi.problem, &SolveOptions { seed, ..Default::default() }).unwrap();
            (sol.status == SolveStatus::Feasible).then(|| {
                let vars = lmi.layout.extract(&sol.theta);
                let (gains, cert) = recover_gains(&sys, &vars, &lmi.mode).unwrap();
                check_ari(&sys, &gains, &cert.p, &lmi.mode).unwrap()
            })
        })
        .collect();
    let feasible = results.iter().flatten().count();
    let violations = results.iter().flatten().filter(|&&a| a >= 0.0).count();
    verdict(violations == 0, format!("200 systems, {feasible} solver-feasible, {violations} with check_ari >= 0"))
}

fn pencil_problem(rng: &mut ChaCha8Rng) -> (SdpProblem, [[f64; 3]; 3], bool) {
    let traceless = rng.random_bool(0.3);
    let strict = rng.random_bool(0.5);
    let mut sym = |tl: bool| {
        let a = rng.random_range(-1.0..1.0);
        let b = rng.random_range(-1.0..1.0);
        [a, b, if tl { -a } else { rng.random_range(-1.0..1.0) }]
    };
    let f = [sym(false), sym(traceless), sym(traceless)];
    let mut p = SdpProblem::new(1e-6);
    for name in ["t1", "t2"] {
        let v = p.add_variable(name);
        p.set_bounds(v, Some(-10.0), Some(10.0)).unwrap();
    }
    let mut b = BlockBuilder::new(2, if strict { Strictness::Strict } else { Strictness::NonStrict });
    for (slot, k) in f.iter().enumerate() {
        let m = if slot == 0 { b.constant_mut() } else { b.term_mut(slot - 1) };
        m[(0, 0)] = k[0];
        m[(0, 1)] = k[1];
        m[(1, 0)] = k[1];
        m[(1, 1)] = k[2];
    }
    p.add_block(b).unwrap();
    (p, f, strict)
}

fn lam_max(f: &[[f64; 3]; 3], t1: f64, t2: f64) -> f64 {
    let e = |k: usize| f[0][k] + t1 * f[1][k] + t2 * f[2][k];
    let (a, b, c) = (e(0), e(1), e(2));
    0.5 * (a + c) + (0.25 * (a - c) * (a - c) + b * b).sqrt()
}

fn criterion_7() -> Verdict {
    use rayon::prelude::*;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let problems: Vec<_> = (0..100).map(|_| pencil_problem(&mut rng)).collect();
    let h = 0.01;
    let mut contradictions = 0;
    let mut round_trip_failures = 0;
    let mut counts = [0usize; 3];
    for (problem, f, strict) in &problems {
        let target = if *strict { -1e-6 } else { 1e-9 };
        let sol = solve_feasibility(problem, &SolveOptions::default()).unwrap();
        let best = (0..=2000)
            .into_par_iter()
            .map(|i| {
                let t1 = -10.0 + i as f64 * h;
                (0..=2000).map(|j| lam_max(f, t1, -10.0 + j as f64 * h) - target).fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::INFINITY, f64::min);
        let norm = |k: [f64; 3]| 0.5 * (k[0] + k[2]).abs() + (0.25 * (k[0] - k[2]).powi(2) + k[1] * k[1]).sqrt();
        let slack = (norm(f[1]) + norm(f[2])) * h / 2.0;
        match sol.status {
            SolveStatus::Feasible => {
                counts[0] += 1;
                if best > slack || lam_max(f, sol.theta[0], sol.theta[1]) > target + 1e-12 {
                    contradictions += 1;
                }
            }
            SolveStatus::Infeasible => {
                counts[1] += 1;
                if best <= 0.0 {
                    contradictions += 1;
                }
            }
            SolveStatus::Unknown => counts[2] += 1,
        }
        let text = export_sdpa(problem).unwrap();
        match import_sdpa(&text) {
            Ok(back) if &back == problem && export_sdpa(&back).unwrap() == text => {}
            _ => round_trip_failures += 1,
        }
    }
    verdict(
        contradictions == 0 && round_trip_failures == 0,
        format!(
            "feasible {}, infeasible {}, unknown {}; {contradictions} contradictions; {round_trip_failures} round-trip mismatches",
            counts[0], counts[1], counts[2]
        ),
    )
}

fn criterion_8(d: &Designed) -> Verdict {
    let err = |dt: f64| {
        let mut x = DVector::from_element(1, 1.0);
        for _ in 0..(1.0 / dt).round() as usize {
            x = rk4_step(|v| -v, &x, dt);
        }
        (x[0] - (-1.0f64).exp()).abs()
    };
    let ratio = err(0.1) / err(0.05);

    let residual = |dt: f64| {
        let mut cfg = noiseless();
        cfg.dt = dt;
        cfg.horizon = 4.0;
        let traj = simulate(&d.sys, &d.gains, &cfg).unwrap();
        let ng = d.gains.n() * d.sys.g();
        let mut worst: f64 = 0.0;
        for t in [0.4, 1.0, 2.0, 3.0] {
            let i = (t / dt).round() as usize;
            let e = |k: usize| traj.error(k);
            let fd = (e(i - 2) - e(i - 1) * 8.0 + e(i + 1) * 8.0 - e(i + 2)) / (12.0 * dt);
            let (x, xh) = (&traj.states[i], &traj.estimates[i]);
            let v = d.sys.h() * xh + d.gains.k() * (d.sys.c() * x - d.sys.c() * xh);
            let rhs = d.gains.m() * e(i) + &ng * (d.sys.eval_f(&(d.sys.h() * x)) - d.sys.eval_f(&v));
            worst = worst.max((fd - rhs).amax());
        }
        worst
    };
    let order = (residual(0.02) / residual(0.01)).log2();
    verdict(
        (12.0..=20.0).contains(&ratio) && order >= 2.0,
        format!("RK4 halving ratio {ratio:.3}; error-dynamics consistency order {order:.3}"),
    )
}

#[derive(Debug)]
struct Rotor;

impl Nonlinearity for Rotor {
    fn input_dim(&self) -> usize {
        2
    }
    fn output_dim(&self) -> usize {
        2
    }
    fn eval(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![v[0].cos(), v[0].sin()])
    }
    fn jacobian(&self, v: &DVector<f64>) -> Mat {
        Mat::from_row_slice(2, 2, &[-v[0].sin(), 0.0, v[0].cos(), 0.0])
    }
}

fn criterion_9() -> Verdict {
    let a = DVector::from_vec(vec![TAU, 0.3]);
    let b = DVector::from_vec(vec![0.0, -1.2]);
    let lhs = (Rotor.eval(&a) - Rotor.eval(&b)).norm();
    let steps = 100_000;
    let closest = (0..=steps)
        .map(|i| mean_value_residual(&Rotor, &a, &b, &DVector::from_vec(vec![TAU * i as f64 / steps as f64, 0.0])))
        .fold(f64::INFINITY, f64::min);
    verdict(
        lhs < 1e-12 && closest > 1e-6,
        format!("||f(x) - f(x_hat)|| = {lhs:.1e}; smallest residual over {} grid points of c_1 = {closest:.6}", steps + 1),
    )
}

fn criterion_10(accepted: &[Trajectory]) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for t in accepted {
        let s0 = t.states[0].sum();
        for x in &t.states {
            worst = worst.max((x.sum() - s0).abs());
            samples += 1;
        }
    }
    verdict(
        !accepted.is_empty() && worst <= 1e-9,
        format!("{} trajectories, {samples} samples, largest component-sum drift {worst:.3e}", accepted.len()),
    )
}

fn main() -> ExitCode {
    let mut lines: Vec<(usize, &str, Verdict)> = Vec::new();
    let mut accepted = Vec::new();
    lines.push((1, "Lipschitz reproduction", criterion_1()));
    let (v2, designed) = criterion_2();
    lines.push((2, "Synthesis feasibility", v2));
    lines.push((3, "Printed-gain sanity", criterion_3()));
    match &designed {
        Some(d) => {
            lines.push((4, "Convergence", criterion_4(d, &mut accepted)));
            lines.push((5, "Noisy error band", criterion_5(d, &mut accepted)));
        }
        None => {
            lines.push((4, "Convergence", verdict(false, "no design available".into())));
            lines.push((5, "Noisy error band", verdict(false, "no design available".into())));
        }
    }
    lines.push((6, "Schur equivalence suite", criterion_6()));
    lines.push((7, "SDP oracle suite", criterion_7()));
    lines.push((
        8,
        "Numerical order checks",
        designed.as_ref().map_or_else(|| verdict(false, "no design available".into()), criterion_8),
    ));
    lines.push((9, "MVT counterexample regression", criterion_9()));
    lines.push((10, "Conservation", criterion_10(&accepted)));

    for (n, name, v) in &lines {
        println!("criterion {n:>2} [{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed: Vec<usize> = lines.iter().filter(|l| !l.2.pass).map(|l| l.0).collect();
    println!("{} of {} criteria pass", lines.len() - failed.len(), lines.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failing: {failed:?}");
        ExitCode::FAILURE
    }
}
