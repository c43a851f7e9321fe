use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{symmetrize, Mat};

use super::{SdpError, SdpProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Feasible,
    Infeasible,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// L-BFGS iterations per restart, summed over temperature stages.
    pub max_iter: usize,
    /// Overrides the problem's strict margin when set.
    pub margin: Option<f64>,
    pub seed: u64,
    /// Independent starts; start 0 is the origin projected onto the bounds.
    pub restarts: usize,
    /// Slack for non-strict blocks and bounds.
    pub tolerance: f64,
    pub initial_temperature: f64,
    pub min_temperature: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            margin: None,
            seed: 0,
            restarts: 4,
            tolerance: 1e-9,
            initial_temperature: 1.0,
            min_temperature: 1e-8,
        }
    }
}

/// PSD multipliers `Z_b` (trace one in total) with
/// `Σ_b ⟨Z_b, F_b(θ) + s_b I⟩ > 0` for every `θ` in the bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate {
    pub multipliers: Vec<Mat>,
    /// Lower bound of the certified combination over the bounds.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub theta: Vec<f64>,
    pub status: SolveStatus,
    /// Largest eigenvalue over all blocks (without strictness shift).
    pub max_block_eig: f64,
    pub block_max_eigs: Vec<f64>,
    pub iterations: usize,
    pub certificate: Option<InfeasibilityCertificate>,
}

/// Recomputes block eigenvalues at `theta` and classifies it as Feasible or Unknown.
pub fn evaluate_solution(problem: &SdpProblem, theta: Vec<f64>, tolerance: f64, iterations: usize) -> SdpSolution {
    let block_max_eigs = problem.block_max_eigenvalues(&theta);
    let max_block_eig = block_max_eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let status = if problem.satisfied_by(&theta, &block_max_eigs, tolerance) {
        SolveStatus::Feasible
    } else {
        SolveStatus::Unknown
    };
    SdpSolution { theta, status, max_block_eig, block_max_eigs, iterations, certificate: None }
}

struct Evaluation {
    /// `μ log Σ exp(λ/μ)` over the shifted eigenvalues of all blocks.
    value: f64,
    grad: Vec<f64>,
    /// Softmax-weighted eigenprojectors per block.
    weights: Vec<Mat>,
    /// Largest shifted eigenvalue.
    max_shifted: f64,
}

struct Objective<'a> {
    problem: &'a SdpProblem,
    shifts: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(problem: &'a SdpProblem, margin: f64) -> Self {
        let shifts = problem
            .blocks()
            .iter()
            .map(|b| match b.strictness() {
                super::Strictness::Strict => margin,
                super::Strictness::NonStrict => 0.0,
            })
            .collect();
        Self { problem, shifts }
    }

    fn evaluate(&self, theta: &[f64], mu: f64) -> Evaluation {
        let blocks = self.problem.blocks();
        let decomps: Vec<SymmetricEigen<f64, nalgebra::Dyn>> = (0..blocks.len())
            .map(|b| {
                let mut m = self.problem.block_matrix(b, theta);
                for i in 0..m.nrows() {
                    m[(i, i)] += self.shifts[b];
                }
                SymmetricEigen::new(symmetrize(&m))
            })
            .collect();
        let max_shifted =
            decomps.iter().flat_map(|d| d.eigenvalues.iter().copied()).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for d in &decomps {
            total += d.eigenvalues.iter().map(|&l| ((l - max_shifted) / mu).exp()).sum::<f64>();
        }
        let value = max_shifted + mu * total.ln();

        let mut grad = vec![0.0; theta.len()];
        let mut weights = Vec::with_capacity(blocks.len());
        for (b, d) in decomps.iter().enumerate() {
            let w: Vec<f64> = d.eigenvalues.iter().map(|&l| ((l - max_shifted) / mu).exp() / total).collect();
            let n = d.eigenvalues.len();
            let mut scaled = d.eigenvectors.clone();
            for (j, wj) in w.iter().enumerate() {
                scaled.column_mut(j).scale_mut(*wj);
            }
            let u = &scaled * d.eigenvectors.transpose();
            let u = if n > 0 { symmetrize(&u) } else { u };
            for (var, coef) in blocks[b].terms() {
                grad[*var] += coef.inner(&u);
            }
            weights.push(u);
        }
        Evaluation { value, grad, weights, max_shifted }
    }
}

struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    fn of(problem: &SdpProblem) -> Self {
        Self {
            lower: problem.variables().iter().map(|v| v.lower.unwrap_or(f64::NEG_INFINITY)).collect(),
            upper: problem.variables().iter().map(|v| v.upper.unwrap_or(f64::INFINITY)).collect(),
        }
    }

    fn project(&self, theta: &mut [f64]) {
        for (j, t) in theta.iter_mut().enumerate() {
            // max/min order keeps contradictory bounds (lower > upper) deterministic.
            *t = t.max(self.lower[j]).min(self.upper[j]);
        }
    }

    /// Zeroes gradient components that push against an active bound.
    fn free_gradient(&self, theta: &[f64], grad: &[f64]) -> Vec<f64> {
        grad.iter()
            .enumerate()
            .map(|(j, &g)| {
                let at_lower = theta[j] <= self.lower[j] && g > 0.0;
                let at_upper = theta[j] >= self.upper[j] && g < 0.0;
                if at_lower || at_upper {
                    0.0
                } else {
                    g
                }
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

const MEMORY: usize = 10;

/// Projected L-BFGS on the smoothed objective at fixed temperature.
/// Returns the number of iterations spent.
fn minimize_stage(
    objective: &Objective,
    bounds: &Bounds,
    theta: &mut Vec<f64>,
    mu: f64,
    budget: usize,
    stop_below: f64,
) -> (Evaluation, usize) {
    let mut eval = objective.evaluate(theta, mu);
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut iters = 0;
    while iters < budget {
        if eval.max_shifted < stop_below {
            break;
        }
        let pg = bounds.free_gradient(theta, &eval.grad);
        let gnorm = inf_norm(&pg);
        if gnorm <= 1e-12 * (1.0 + eval.value.abs()) {
            break;
        }
        // Two-loop recursion restricted to the free set.
        let mut q = pg.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = history.last().map_or(1.0 / gnorm.max(1e-300), |(s, y, _)| dot(s, y) / dot(y, y));
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut direction: Vec<f64> =
            q.iter().zip(&pg).map(|(&qi, &gi)| if gi == 0.0 { 0.0 } else { -qi }).collect();
        if dot(&direction, &pg) >= 0.0 {
            history.clear();
            direction = pg.iter().map(|g| -g / gnorm).collect();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = theta.iter().zip(&direction).map(|(t, d)| t + step * d).collect();
            bounds.project(&mut trial);
            let moved: Vec<f64> = trial.iter().zip(theta.iter()).map(|(a, b)| a - b).collect();
            let decrease = dot(&eval.grad, &moved);
            if decrease >= 0.0 && inf_norm(&moved) == 0.0 {
                break;
            }
            let candidate = objective.evaluate(&trial, mu);
            if candidate.value <= eval.value + 1e-4 * decrease.min(0.0) && candidate.value < eval.value {
                accepted = Some((trial, moved, candidate));
                break;
            }
            step *= 0.5;
        }
        iters += 1;
        let Some((trial, s, candidate)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        let y: Vec<f64> = candidate.grad.iter().zip(&eval.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == MEMORY {
                history.remove(0);
            }
            history.push((s, y, 1.0 / sy));
        }
        *theta = trial;
        eval = candidate;
    }
    (eval, iters)
}

/// Tries the softmax weights at `theta` as dual multipliers.
fn certificate(problem: &SdpProblem, objective: &Objective, eval: &Evaluation, bounds: &Bounds) -> Option<InfeasibilityCertificate> {
    // Σ_b ⟨Z_b, F_b0 + s_b I⟩ + Σ_j r_j θ_j with r_j = Σ_b ⟨Z_b, F_bj⟩ = grad_j.
    let mut value = 0.0;
    for (b, block) in problem.blocks().iter().enumerate() {
        let z = &eval.weights[b];
        value += block.constant().inner(z) + objective.shifts[b] * z.trace();
    }
    let mut norms = vec![0.0_f64; problem.num_variables()];
    for block in problem.blocks() {
        for (var, coef) in block.terms() {
            norms[*var] += coef.frobenius_norm();
        }
    }
    for (j, &r) in eval.grad.iter().enumerate() {
        if r > 0.0 && bounds.lower[j].is_finite() {
            value += r * bounds.lower[j];
        } else if r < 0.0 && bounds.upper[j].is_finite() {
            value += r * bounds.upper[j];
        } else if r.abs() > 1e-10 * (1.0 + norms[j]) {
            return None;
        }
    }
    (value > 1e-9).then(|| InfeasibilityCertificate { multipliers: eval.weights.clone(), value })
}

struct RunResult {
    theta: Vec<f64>,
    objective: f64,
    iterations: usize,
    certificate: Option<InfeasibilityCertificate>,
}

/// Feasible once every shifted eigenvalue is ≤ 0; runs stop slightly inside to absorb round-off.
fn feasibility_threshold(options: &SolveOptions) -> f64 {
    -1e-3 * options.tolerance.max(1e-15)
}

fn run(problem: &SdpProblem, options: &SolveOptions, margin: f64, start: Vec<f64>) -> RunResult {
    let objective = Objective::new(problem, margin);
    let bounds = Bounds::of(problem);
    let mut theta = start;
    bounds.project(&mut theta);
    let stop_below = feasibility_threshold(options);
    let mut mu = options.initial_temperature;
    let mut iterations = 0;
    let mut best = (theta.clone(), f64::INFINITY);
    loop {
        let budget = options.max_iter.saturating_sub(iterations);
        let (eval, used) = minimize_stage(&objective, &bounds, &mut theta, mu, budget, stop_below);
        iterations += used;
        if eval.max_shifted < best.1 {
            best = (theta.clone(), eval.max_shifted);
        }
        if eval.max_shifted < stop_below {
            break;
        }
        if let Some(cert) = certificate(problem, &objective, &eval, &bounds) {
            return RunResult { theta: best.0, objective: best.1, iterations, certificate: Some(cert) };
        }
        mu *= 0.5;
        if mu < options.min_temperature || iterations >= options.max_iter {
            break;
        }
    }
    RunResult { theta: best.0, objective: best.1, iterations, certificate: None }
}

/// Searches for `θ` making every block negative (semi)definite by minimizing a
/// log-sum-exp smoothing of the largest block eigenvalue.
///
/// Each restart anneals the temperature from `initial_temperature`, halving per stage.
/// Infeasible is only reported with a dual certificate; budget exhaustion gives Unknown.
pub fn solve_feasibility(problem: &SdpProblem, options: &SolveOptions) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let margin = options.margin.unwrap_or(problem.strict_margin());
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(SdpError::MalformedProblem(format!("margin {margin} must be finite and ≥ 0")));
    }
    let mut effective = problem.clone();
    effective.strict_margin = margin;
    let n = problem.num_variables();
    let restarts = options.restarts.max(1);
    let starts: Vec<Vec<f64>> = (0..restarts)
        .map(|r| {
            if r == 0 {
                vec![0.0; n]
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
                rng.set_stream(r as u64);
                (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
            }
        })
        .collect();
    let runs: Vec<RunResult> = starts.into_par_iter().map(|s| run(&effective, options, margin, s)).collect();

    let iterations = runs.iter().map(|r| r.iterations).sum();
    // Lowest objective wins; every feasible run scores the same, and ties go to the lower
    // restart index.
    let stop_below = feasibility_threshold(options);
    let score = |r: &RunResult| r.objective.max(stop_below);
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| score(a.1).total_cmp(&score(b.1)).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut solution = evaluate_solution(&effective, runs[best].theta.clone(), options.tolerance, iterations);
    if solution.status != SolveStatus::Feasible {
        if let Some(cert) = runs.iter().find_map(|r| r.certificate.clone()) {
            solution.status = SolveStatus::Infeasible;
            solution.certificate = Some(cert);
        }
    }
    Ok(solution)
}
