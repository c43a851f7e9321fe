use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{all_finite, Vector};
use crate::model::{DomainKind, LipschitzSystem, StateDomain};

use super::LipschitzError;

/// Grids larger than this are thinned so the lattice stays below it.
const MAX_GRID_POINTS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    /// Number of ascent starts taken from the best grid points, and again from random draws.
    pub starts: usize,
    /// Lattice points per active coordinate.
    pub grid_density: usize,
    pub seed: u64,
    pub ascent_iters: usize,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self { starts: 16, grid_density: 10, seed: 0, ascent_iters: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    MultiStartGradient,
    GridSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub ell: f64,
    pub argmax_point: Vec<f64>,
    pub method: EstimateMethod,
    pub samples_used: usize,
    pub domain_kind: DomainKind,
}

/// `σ_max(∂f/∂v)` at `v = Hx`.
pub fn jacobian_gain(sys: &LipschitzSystem, x: &Vector) -> Result<f64, LipschitzError> {
    let jac = sys.nonlinearity().jacobian(&(sys.h() * x));
    if !all_finite(&jac) {
        return Err(LipschitzError::NonFiniteJacobian { point: x.iter().copied().collect() });
    }
    Ok(crate::linalg::spectral_norm(&jac))
}

/// Coordinates of `x` that `H` actually reads.
fn active_coordinates(sys: &LipschitzSystem) -> Vec<usize> {
    let h = sys.h();
    (0..h.ncols()).filter(|&j| h.column(j).iter().any(|&v| v != 0.0)).collect()
}

struct Lattice {
    active: Vec<usize>,
    density: usize,
    points: usize,
}

impl Lattice {
    fn new(active: Vec<usize>, requested: usize) -> Self {
        let d = active.len() as u32;
        let mut density = requested;
        while density > 1 && density.checked_pow(d).is_none_or(|p| p > MAX_GRID_POINTS) {
            density -= 1;
        }
        let points = if density == 0 { 0 } else { density.pow(d) };
        Self { active, density, points }
    }

    fn point(&self, domain: &StateDomain, mut index: usize) -> Vector {
        let mut x = domain.lower().clone();
        for &coord in &self.active {
            let step = index % self.density;
            index /= self.density;
            let (lo, hi) = (domain.lower()[coord], domain.upper()[coord]);
            x[coord] = if self.density == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * step as f64 / (self.density - 1) as f64
            };
        }
        x
    }
}

/// Normalized projected gradient ascent of the Jacobian gain from `start`.
/// Returns the best point, its gain and the number of gain evaluations spent.
fn ascend(
    sys: &LipschitzSystem,
    domain: &StateDomain,
    active: &[usize],
    start: Vector,
    iters: usize,
) -> Result<(Vector, f64, usize), LipschitzError> {
    let diameter = (domain.upper() - domain.lower()).norm().max(1e-12);
    let fd_step = 1e-7 * diameter;
    let mut x = start;
    let mut value = jacobian_gain(sys, &x)?;
    let mut evals = 1;
    let mut step = 0.1 * diameter;
    for _ in 0..iters {
        let mut grad = Vector::zeros(x.len());
        for &j in active {
            let mut up = x.clone();
            let mut down = x.clone();
            up[j] += fd_step;
            down[j] -= fd_step;
            let up = domain.project(&up);
            let down = domain.project(&down);
            let span = up[j] - down[j];
            if span > 0.0 {
                grad[j] = (jacobian_gain(sys, &up)? - jacobian_gain(sys, &down)?) / span;
                evals += 2;
            }
        }
        let gnorm = grad.norm();
        if gnorm == 0.0 || !gnorm.is_finite() {
            break;
        }
        let direction = grad / gnorm;
        let mut improved = false;
        while step > 1e-12 * diameter {
            let candidate = domain.project(&(&x + &direction * step));
            let cv = jacobian_gain(sys, &candidate)?;
            evals += 1;
            if cv > value {
                x = candidate;
                value = cv;
                step *= 1.5;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((x, value, evals))
}

/// Lower estimate of `sup_{x ∈ domain} σ_max(∂f/∂v (Hx))`.
///
/// A lattice over the coordinates read by `H` (other coordinates at their lower bound)
/// is scanned exhaustively; the `starts` best lattice points and `starts` random domain
/// points then seed projected gradient ascent.
pub fn estimate_lipschitz(
    sys: &LipschitzSystem,
    domain: &StateDomain,
    config: &EstimateConfig,
) -> Result<LipschitzEstimate, LipschitzError> {
    if domain.dim() != sys.dims().nx {
        return Err(LipschitzError::InvalidArgument(format!(
            "domain dimension {} does not match the state dimension {}",
            domain.dim(),
            sys.dims().nx
        )));
    }
    let active = active_coordinates(sys);
    let lattice = Lattice::new(active.clone(), config.grid_density);

    let scanned: Vec<Option<f64>> = (0..lattice.points)
        .into_par_iter()
        .map(|i| {
            let x = lattice.point(domain, i);
            if domain.contains(&x) {
                jacobian_gain(sys, &x).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_, _>>()?;
    let mut samples_used = scanned.iter().filter(|v| v.is_some()).count();

    let mut ranked: Vec<(usize, f64)> =
        scanned.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut best_point = domain.project(&domain.lower().clone());
    let mut best = jacobian_gain(sys, &best_point)?;
    samples_used += 1;
    if let Some(&(i, v)) = ranked.first() {
        if v > best {
            best = v;
            best_point = lattice.point(domain, i);
        }
    }

    let mut seeds: Vec<Vector> = ranked.iter().take(config.starts).map(|&(i, _)| lattice.point(domain, i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    seeds.extend((0..config.starts).map(|_| domain.sample(&mut rng)));

    let climbs: Vec<(Vector, f64, usize)> = seeds
        .into_par_iter()
        .map(|start| ascend(sys, domain, &active, start, config.ascent_iters))
        .collect::<Result<_, _>>()?;
    for (x, v, evals) in climbs {
        samples_used += evals;
        if v > best {
            best = v;
            best_point = x;
        }
    }

    Ok(LipschitzEstimate {
        ell: best,
        argmax_point: best_point.iter().copied().collect(),
        method: if config.starts > 0 { EstimateMethod::MultiStartGradient } else { EstimateMethod::GridSample },
        samples_used,
        domain_kind: domain.kind(),
    })
}
