use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::linalg::{Mat, Vector};
use crate::model::LipschitzSystem;
use crate::synth::ObserverGains;

use super::{ObserverInit, SimConfig, SimError, Trajectory, DIVERGENCE_THRESHOLD};

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step(f: impl Fn(&Vector) -> Vector, x: &Vector, dt: f64) -> Vector {
    let k1 = f(x);
    let k2 = f(&(x + &k1 * (0.5 * dt)));
    let k3 = f(&(x + &k2 * (0.5 * dt)));
    let k4 = f(&(x + &k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

enum Observer<'a> {
    Proposed { gains: &'a ObserverGains, ml_plus_j: Mat, ng: Mat },
    Luenberger { l: &'a Mat },
    Arcak { l: &'a Mat, k: &'a Mat },
}

impl Observer<'_> {
    fn gain_l(&self) -> &Mat {
        match self {
            Observer::Proposed { gains, .. } => gains.l(),
            Observer::Luenberger { l } | Observer::Arcak { l, .. } => l,
        }
    }

    /// Derivative of the observer state given the output `y`.
    fn rhs(&self, sys: &LipschitzSystem, o: &Vector, y: &Vector) -> Vector {
        match self {
            Observer::Proposed { gains, ml_plus_j, ng } => {
                let x_hat = o + gains.l() * y;
                let v = sys.h() * &x_hat + gains.k() * (y - sys.c() * &x_hat);
                gains.m() * o + ml_plus_j * y + ng * sys.eval_f(&v)
            }
            Observer::Luenberger { l } => {
                sys.a() * o + sys.g() * sys.eval_f(&(sys.h() * o)) + *l * (y - sys.c() * o)
            }
            Observer::Arcak { l, k } => {
                let innovation = y - sys.c() * o;
                let v = sys.h() * o + *k * &innovation;
                sys.a() * o + sys.g() * sys.eval_f(&v) + *l * innovation
            }
        }
    }

    fn estimate(&self, o: &Vector, y: &Vector) -> Vector {
        match self {
            Observer::Proposed { gains, .. } => o + gains.l() * y,
            _ => o.clone(),
        }
    }
}

fn check_dims(sys: &LipschitzSystem, config: &SimConfig) -> Result<(usize, Vec<f64>), SimError> {
    let d = sys.dims();
    if config.x0.len() != d.nx {
        return Err(SimError::InvalidConfig(format!("x0 has {} entries, expected {}", config.x0.len(), d.nx)));
    }
    if config.x0.iter().any(|v| !v.is_finite()) {
        return Err(SimError::InvalidConfig("x0 must be finite".into()));
    }
    let init_len = match &config.observer_init {
        ObserverInit::FromOutput => d.nx,
        ObserverInit::Explicit { z0 } => z0.len(),
        ObserverInit::Estimate { x_hat0 } => x_hat0.len(),
    };
    if init_len != d.nx {
        return Err(SimError::InvalidConfig(format!("observer initial state has {init_len} entries, expected {}", d.nx)));
    }
    Ok((config.steps()?, config.noise_sigma.resolve(d.ny)?))
}

fn diverged(w: &Vector) -> Option<usize> {
    w.iter().position(|v| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD)
}

fn run(sys: &LipschitzSystem, observer: Observer, config: &SimConfig) -> Result<Trajectory, SimError> {
    let (steps, sigma) = check_dims(sys, config)?;
    let d = sys.dims();
    let n = d.nx;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draw = || -> Vector {
        Vector::from_iterator(d.ny, sigma.iter().map(|s| s * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)))
    };

    let x0 = Vector::from_column_slice(&config.x0);
    let mut noise = draw();
    let y0 = sys.c() * &x0 + &noise;
    let l = observer.gain_l();
    let proposed = matches!(observer, Observer::Proposed { .. });
    let o0 = match (&config.observer_init, proposed) {
        (ObserverInit::FromOutput, true) => -(l * &y0),
        (ObserverInit::FromOutput, false) => Vector::zeros(n),
        (ObserverInit::Explicit { z0 }, true) => Vector::from_column_slice(z0),
        (ObserverInit::Explicit { z0 }, false) => Vector::from_column_slice(z0) + l * &y0,
        (ObserverInit::Estimate { x_hat0 }, true) => Vector::from_column_slice(x_hat0) - l * &y0,
        (ObserverInit::Estimate { x_hat0 }, false) => Vector::from_column_slice(x_hat0),
    };
    let mut w = Vector::zeros(2 * n);
    w.rows_mut(0, n).copy_from(&x0);
    w.rows_mut(n, n).copy_from(&o0);

    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        estimates: Vec::with_capacity(steps + 1),
        internal: proposed.then(|| Vec::with_capacity(steps + 1)),
        outputs: Vec::with_capacity(steps + 1),
        noise_seed: config.seed,
        noise_sigma: sigma.clone(),
    };
    let record = |traj: &mut Trajectory, i: usize, w: &Vector, y: Vector| {
        let o = w.rows(n, n).into_owned();
        traj.times.push(i as f64 * config.dt);
        traj.states.push(w.rows(0, n).into_owned());
        traj.estimates.push(observer.estimate(&o, &y));
        if let Some(z) = traj.internal.as_mut() {
            z.push(o);
        }
        traj.outputs.push(y);
    };
    record(&mut traj, 0, &w, y0);

    for i in 1..=steps {
        // The plant output is evaluated at each stage; the noise sample is held over the step.
        let rhs = |state: &Vector| {
            let x = state.rows(0, n).into_owned();
            let o = state.rows(n, n).into_owned();
            let y = sys.c() * &x + &noise;
            let mut out = Vector::zeros(2 * n);
            out.rows_mut(0, n).copy_from(&sys.eval_dynamics(&x));
            out.rows_mut(n, n).copy_from(&observer.rhs(sys, &o, &y));
            out
        };
        w = rk4_step(rhs, &w, config.dt);
        if let Some(index) = diverged(&w) {
            return Err(SimError::NonFiniteState { time: i as f64 * config.dt, index });
        }
        noise = draw();
        let y = sys.c() * w.rows(0, n) + &noise;
        record(&mut traj, i, &w, y);
    }
    Ok(traj)
}

fn check_gain(name: &str, m: &Mat, shape: (usize, usize)) -> Result<(), SimError> {
    if m.shape() != shape {
        return Err(SimError::InvalidConfig(format!(
            "{name} is {}x{}, expected {}x{}",
            m.nrows(),
            m.ncols(),
            shape.0,
            shape.1
        )));
    }
    Ok(())
}

/// Plant with the proposed observer `ż = Mz + (ML + J)y + NGf(v)`, `x̂ = z + Ly`.
pub fn simulate(sys: &LipschitzSystem, gains: &ObserverGains, config: &SimConfig) -> Result<Trajectory, SimError> {
    let d = sys.dims();
    check_gain("J", gains.j(), (d.nx, d.ny))?;
    check_gain("K", gains.k(), (d.k, d.ny))?;
    check_gain("M", gains.m(), (d.nx, d.nx))?;
    let ml_plus_j = gains.m() * gains.l() + gains.j();
    let ng = gains.n() * sys.g();
    run(sys, Observer::Proposed { gains, ml_plus_j, ng }, config)
}

/// Plant with `x̂̇ = Ax̂ + Gf(Hx̂) + L(y − Cx̂)`.
pub fn simulate_luenberger(sys: &LipschitzSystem, l: &Mat, config: &SimConfig) -> Result<Trajectory, SimError> {
    let d = sys.dims();
    check_gain("L", l, (d.nx, d.ny))?;
    run(sys, Observer::Luenberger { l }, config)
}

/// Plant with `x̂̇ = Ax̂ + Gf(Hx̂ + K(y − Cx̂)) + L(y − Cx̂)`.
pub fn simulate_arcak(sys: &LipschitzSystem, l: &Mat, k: &Mat, config: &SimConfig) -> Result<Trajectory, SimError> {
    let d = sys.dims();
    check_gain("L", l, (d.nx, d.ny))?;
    check_gain("K", k, (d.k, d.ny))?;
    run(sys, Observer::Arcak { l, k }, config)
}

/// Runs one proposed-observer simulation per config in parallel.
pub fn simulate_sweep(
    sys: &LipschitzSystem,
    gains: &ObserverGains,
    configs: &[SimConfig],
) -> Vec<Result<Trajectory, SimError>> {
    configs.par_iter().map(|c| simulate(sys, gains, c)).collect()
}
