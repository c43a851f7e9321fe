use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::linalg::Vector;

use super::ModelError;

const MEMBERSHIP_TOL: f64 = 1e-12;
const MAX_REJECTIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Box,
    Simplex,
    BoxWithSimplexSlice,
}

/// Bounded state domain: a box, optionally cut by `Σ_{i ∈ slice} x_i ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDomain {
    kind: DomainKind,
    lower: Vector,
    upper: Vector,
    simplex_indices: Vec<usize>,
}

impl StateDomain {
    pub fn new(
        kind: DomainKind,
        lower: Vector,
        upper: Vector,
        simplex_indices: Option<Vec<usize>>,
    ) -> Result<Self, ModelError> {
        let n = lower.len();
        if upper.len() != n {
            return Err(ModelError::InvalidDomain(format!(
                "lower has {n} entries but upper has {}",
                upper.len()
            )));
        }
        for i in 0..n {
            if !(lower[i].is_finite() && upper[i].is_finite()) {
                return Err(ModelError::InvalidDomain(format!("bound {i} is not finite")));
            }
            if lower[i] > upper[i] {
                return Err(ModelError::InvalidDomain(format!(
                    "lower[{i}] = {} exceeds upper[{i}] = {}",
                    lower[i], upper[i]
                )));
            }
        }
        let simplex_indices = match (kind, simplex_indices) {
            (DomainKind::Box, None) => Vec::new(),
            (DomainKind::Box, Some(_)) => {
                return Err(ModelError::InvalidDomain("a box domain takes no simplex indices".into()))
            }
            (DomainKind::Simplex, None) => (0..n).collect(),
            (DomainKind::Simplex, Some(idx)) => {
                if idx != (0..n).collect::<Vec<_>>() {
                    return Err(ModelError::InvalidDomain(
                        "a simplex domain covers every coordinate; use box_with_simplex_slice".into(),
                    ));
                }
                idx
            }
            (DomainKind::BoxWithSimplexSlice, None) => {
                return Err(ModelError::InvalidDomain("simplex slice needs its index set".into()))
            }
            (DomainKind::BoxWithSimplexSlice, Some(mut idx)) => {
                idx.sort_unstable();
                idx.dedup();
                if idx.is_empty() {
                    return Err(ModelError::InvalidDomain("empty simplex slice".into()));
                }
                idx
            }
        };
        if let Some(&bad) = simplex_indices.iter().find(|&&i| i >= n) {
            return Err(ModelError::InvalidDomain(format!("simplex index {bad} out of range for dimension {n}")));
        }
        let floor: f64 = simplex_indices.iter().map(|&i| lower[i]).sum();
        if floor > 1.0 + MEMBERSHIP_TOL {
            return Err(ModelError::InvalidDomain(format!(
                "lower bounds on the simplex slice sum to {floor} > 1; domain is empty"
            )));
        }
        Ok(Self { kind, lower, upper, simplex_indices })
    }

    /// `[0, 1]^n`.
    pub fn unit_box(n: usize) -> Self {
        Self::new(DomainKind::Box, Vector::zeros(n), Vector::from_element(n, 1.0), None)
            .expect("unit box is valid")
    }

    /// `{x ∈ [0, 1]^n : Σ x_i ≤ 1}`.
    pub fn unit_simplex(n: usize) -> Self {
        Self::new(DomainKind::Simplex, Vector::zeros(n), Vector::from_element(n, 1.0), None)
            .expect("unit simplex is valid")
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &Vector {
        &self.lower
    }

    pub fn upper(&self) -> &Vector {
        &self.upper
    }

    pub fn simplex_indices(&self) -> &[usize] {
        &self.simplex_indices
    }

    fn slice_sum(&self, x: &Vector) -> f64 {
        self.simplex_indices.iter().map(|&i| x[i]).sum()
    }

    pub fn contains(&self, x: &Vector) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let in_box = (0..self.dim())
            .all(|i| x[i] >= self.lower[i] - MEMBERSHIP_TOL && x[i] <= self.upper[i] + MEMBERSHIP_TOL);
        in_box && (self.simplex_indices.is_empty() || self.slice_sum(x) <= 1.0 + MEMBERSHIP_TOL)
    }

    /// Euclidean projection onto the domain.
    pub fn project(&self, x: &Vector) -> Vector {
        let clamp = |i: usize, v: f64| v.clamp(self.lower[i], self.upper[i]);
        let mut out = Vector::from_iterator(self.dim(), (0..self.dim()).map(|i| clamp(i, x[i])));
        if self.simplex_indices.is_empty() || self.slice_sum(&out) <= 1.0 {
            return out;
        }
        // Σ clamp(x_i - τ) is nonincreasing in τ; bisect for the level that meets the cap.
        let shifted_sum = |tau: f64| -> f64 { self.simplex_indices.iter().map(|&i| clamp(i, x[i] - tau)).sum() };
        let mut lo = 0.0;
        let mut hi = self
            .simplex_indices
            .iter()
            .map(|&i| x[i] - self.lower[i])
            .fold(0.0_f64, f64::max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if shifted_sum(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for &i in &self.simplex_indices {
            out[i] = clamp(i, x[i] - hi);
        }
        out
    }

    /// Uniform sample. Slice coordinates are drawn uniformly from the cut simplex and
    /// rejected against the upper bounds.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let mut x = Vector::zeros(self.dim());
        for i in 0..self.dim() {
            x[i] = if self.lower[i] == self.upper[i] {
                self.lower[i]
            } else {
                rng.random_range(self.lower[i]..=self.upper[i])
            };
        }
        if self.simplex_indices.is_empty() {
            return x;
        }
        let budget = 1.0 - self.simplex_indices.iter().map(|&i| self.lower[i]).sum::<f64>();
        let m = self.simplex_indices.len();
        for _ in 0..MAX_REJECTIONS {
            let spacings: Vec<f64> = (0..=m).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = spacings.iter().sum();
            let mut accepted = true;
            for (slot, &i) in self.simplex_indices.iter().enumerate() {
                let value = self.lower[i] + budget * spacings[slot] / total;
                if value > self.upper[i] {
                    accepted = false;
                    break;
                }
                x[i] = value;
            }
            if accepted {
                return x;
            }
        }
        self.project(&x)
    }
}
