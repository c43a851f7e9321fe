use std::collections::BTreeMap;

use crate::linalg::{sym_max_eigenvalue, Mat};

use super::SdpError;

/// Relative asymmetry tolerated when a dense coefficient is converted.
const SYMMETRY_TOL: f64 = 1e-12;

/// Upper triangle (`i ≤ j`) of a symmetric matrix, sorted, without explicit zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymSparse {
    size: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymSparse {
    pub fn zeros(size: usize) -> Self {
        Self { size, entries: Vec::new() }
    }

    pub fn from_dense(m: &Mat) -> Result<Self, SdpError> {
        if !m.is_square() {
            return Err(SdpError::MalformedProblem(format!("coefficient is {}x{}, not square", m.nrows(), m.ncols())));
        }
        let n = m.nrows();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if !(a.is_finite() && b.is_finite()) {
                    return Err(SdpError::MalformedProblem(format!("non-finite coefficient at ({i}, {j})")));
                }
                if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                    return Err(SdpError::MalformedProblem(format!(
                        "asymmetric coefficient: ({i}, {j}) = {a} but ({j}, {i}) = {b}"
                    )));
                }
                if a != 0.0 {
                    entries.push((i, j, a));
                }
            }
        }
        Ok(Self { size: n, entries })
    }

    /// Builds from upper-triangular triplets; later duplicates overwrite earlier ones.
    pub fn from_entries(size: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self, SdpError> {
        let mut map = BTreeMap::new();
        for (i, j, v) in triplets {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            if j >= size {
                return Err(SdpError::MalformedProblem(format!("entry ({i}, {j}) outside a block of size {size}")));
            }
            if !v.is_finite() {
                return Err(SdpError::MalformedProblem(format!("non-finite entry at ({i}, {j})")));
            }
            map.insert((i, j), v);
        }
        let entries = map.into_iter().filter(|&(_, v)| v != 0.0).map(|((i, j), v)| (i, j, v)).collect();
        Ok(Self { size, entries })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `out += scale · self`.
    pub fn add_scaled_to(&self, scale: f64, out: &mut Mat) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += scale * v;
            if i != j {
                out[(j, i)] += scale * v;
            }
        }
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.size, self.size);
        self.add_scaled_to(1.0, &mut m);
        m
    }

    /// Frobenius inner product with a symmetric matrix.
    pub fn inner(&self, u: &Mat) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * u[(i, i)] } else { 2.0 * v * u[(i, j)] })
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// `F(θ) ≺ 0`, enforced as `F(θ) ⪯ −margin·I`.
    Strict,
    /// `F(θ) ⪯ 0`.
    NonStrict,
}

/// One diagonal block `F₀ + Σ θ_j F_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub(crate) size: usize,
    pub(crate) strictness: Strictness,
    pub(crate) constant: SymSparse,
    /// Sorted by variable index; zero coefficients omitted.
    pub(crate) terms: Vec<(usize, SymSparse)>,
}

impl Block {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn strictness(&self) -> Strictness {
        self.strictness
    }

    pub fn constant(&self) -> &SymSparse {
        &self.constant
    }

    pub fn terms(&self) -> &[(usize, SymSparse)] {
        &self.terms
    }
}

/// Dense accumulator for one block.
#[derive(Debug, Clone)]
pub struct BlockBuilder {
    size: usize,
    strictness: Strictness,
    constant: Mat,
    terms: BTreeMap<usize, Mat>,
}

impl BlockBuilder {
    pub fn new(size: usize, strictness: Strictness) -> Self {
        Self { size, strictness, constant: Mat::zeros(size, size), terms: BTreeMap::new() }
    }

    pub fn constant_mut(&mut self) -> &mut Mat {
        &mut self.constant
    }

    pub fn term_mut(&mut self, var: usize) -> &mut Mat {
        let size = self.size;
        self.terms.entry(var).or_insert_with(|| Mat::zeros(size, size))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Scalar variables `offset..offset+len` that make up one matrix variable. Symmetric
/// groups store the upper triangle row by row; the symmetry tie is that each stored
/// entry feeds both `(i, j)` and `(j, i)` of the matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableGroup {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub symmetric: bool,
    pub offset: usize,
}

impl VariableGroup {
    pub fn len(&self) -> usize {
        if self.symmetric {
            self.rows * (self.rows + 1) / 2
        } else {
            self.rows * self.cols
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scalar index of entry `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        if self.symmetric {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            // Rows before i hold n + (n-1) + ... + (n-i+1) entries.
            self.offset + i * self.rows - i * i.saturating_sub(1) / 2 + (j - i)
        } else {
            self.offset + i * self.cols + j
        }
    }

    /// Reassembles the matrix from a full variable assignment.
    pub fn extract(&self, theta: &[f64]) -> Mat {
        Mat::from_fn(self.rows, self.cols, |i, j| theta[self.index(i, j)])
    }
}

/// Feasibility problem: find `θ` with every block `F₀ + Σ θ_j F_j` negative
/// (semi)definite and `θ` inside its box bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SdpProblem {
    pub(crate) variables: Vec<Variable>,
    pub(crate) groups: Vec<VariableGroup>,
    pub(crate) blocks: Vec<Block>,
    pub(crate) strict_margin: f64,
}

impl SdpProblem {
    pub fn new(strict_margin: f64) -> Self {
        Self { strict_margin, ..Default::default() }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn groups(&self) -> &[VariableGroup] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Option<&VariableGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn strict_margin(&self) -> f64 {
        self.strict_margin
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn add_variable(&mut self, name: impl Into<String>) -> usize {
        self.variables.push(Variable { name: name.into(), lower: None, upper: None });
        self.variables.len() - 1
    }

    pub fn add_symmetric_matrix(&mut self, name: &str, n: usize) -> VariableGroup {
        let offset = self.variables.len();
        for i in 0..n {
            for j in i..n {
                self.add_variable(format!("{name}[{i},{j}]"));
            }
        }
        let group = VariableGroup { name: name.to_string(), rows: n, cols: n, symmetric: true, offset };
        self.groups.push(group.clone());
        group
    }

    pub fn add_matrix(&mut self, name: &str, rows: usize, cols: usize) -> VariableGroup {
        let offset = self.variables.len();
        for i in 0..rows {
            for j in 0..cols {
                self.add_variable(format!("{name}[{i},{j}]"));
            }
        }
        let group = VariableGroup { name: name.to_string(), rows, cols, symmetric: false, offset };
        self.groups.push(group.clone());
        group
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<f64>, upper: Option<f64>) -> Result<(), SdpError> {
        let v = self
            .variables
            .get_mut(var)
            .ok_or_else(|| SdpError::MalformedProblem(format!("variable {var} does not exist")))?;
        for b in [lower, upper].into_iter().flatten() {
            if b.is_nan() {
                return Err(SdpError::MalformedProblem(format!("NaN bound on {}", v.name)));
            }
        }
        v.lower = lower;
        v.upper = upper;
        Ok(())
    }

    pub fn add_block(&mut self, builder: BlockBuilder) -> Result<usize, SdpError> {
        let constant = SymSparse::from_dense(&builder.constant)?;
        let mut terms = Vec::with_capacity(builder.terms.len());
        for (var, coef) in builder.terms {
            if var >= self.variables.len() {
                return Err(SdpError::MalformedProblem(format!("block references unknown variable {var}")));
            }
            let sparse = SymSparse::from_dense(&coef)?;
            if !sparse.is_empty() {
                terms.push((var, sparse));
            }
        }
        self.blocks.push(Block { size: builder.size, strictness: builder.strictness, constant, terms });
        Ok(self.blocks.len() - 1)
    }

    pub(crate) fn push_block(&mut self, block: Block) {
        self.blocks.push(block);
    }

    pub(crate) fn push_group(&mut self, group: VariableGroup) {
        self.groups.push(group);
    }

    /// Checks internal consistency; problems built through the public API always pass.
    pub fn validate(&self) -> Result<(), SdpError> {
        if !(self.strict_margin.is_finite() && self.strict_margin >= 0.0) {
            return Err(SdpError::MalformedProblem(format!("strict margin {} must be ≥ 0", self.strict_margin)));
        }
        for (b, block) in self.blocks.iter().enumerate() {
            if block.constant.size != block.size {
                return Err(SdpError::MalformedProblem(format!("block {b}: constant has the wrong size")));
            }
            let mut last = None;
            for (var, coef) in &block.terms {
                if *var >= self.variables.len() {
                    return Err(SdpError::MalformedProblem(format!("block {b} references unknown variable {var}")));
                }
                if last.is_some_and(|l| l >= *var) {
                    return Err(SdpError::MalformedProblem(format!("block {b}: terms not sorted by variable")));
                }
                if coef.size != block.size {
                    return Err(SdpError::MalformedProblem(format!("block {b}: coefficient of {var} has the wrong size")));
                }
                last = Some(*var);
            }
        }
        for g in &self.groups {
            if g.symmetric && g.rows != g.cols {
                return Err(SdpError::MalformedProblem(format!("symmetric group {} is not square", g.name)));
            }
            if g.offset + g.len() > self.variables.len() {
                return Err(SdpError::MalformedProblem(format!("group {} runs past the variable list", g.name)));
            }
        }
        Ok(())
    }

    /// Diagonal shift applied to a block before testing `⪯ 0`.
    pub fn shift(&self, block: usize) -> f64 {
        match self.blocks[block].strictness {
            Strictness::Strict => self.strict_margin,
            Strictness::NonStrict => 0.0,
        }
    }

    /// `F₀ + Σ θ_j F_j` for block `b`, without the strictness shift.
    pub fn block_matrix(&self, b: usize, theta: &[f64]) -> Mat {
        let block = &self.blocks[b];
        let mut m = block.constant.to_dense();
        for (var, coef) in &block.terms {
            let t = theta[*var];
            if t != 0.0 {
                coef.add_scaled_to(t, &mut m);
            }
        }
        m
    }

    /// Largest eigenvalue of every block at `θ`.
    pub fn block_max_eigenvalues(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.blocks.len()).map(|b| sym_max_eigenvalue(&self.block_matrix(b, theta))).collect()
    }

    /// Largest bound violation of `θ` (zero when inside the box).
    pub fn bound_violation(&self, theta: &[f64]) -> f64 {
        self.variables
            .iter()
            .zip(theta)
            .map(|(v, &t)| {
                let below = v.lower.map_or(0.0, |l| l - t);
                let above = v.upper.map_or(0.0, |u| t - u);
                below.max(above).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Strict blocks need `λ_max ≤ −margin`, non-strict ones `λ_max ≤ tolerance`, and
    /// bounds must hold to `tolerance`.
    pub fn satisfied_by(&self, theta: &[f64], block_eigs: &[f64], tolerance: f64) -> bool {
        let blocks_ok = block_eigs.iter().enumerate().all(|(b, &lam)| match self.blocks[b].strictness {
            Strictness::Strict => lam + self.strict_margin <= 0.0,
            Strictness::NonStrict => lam <= tolerance,
        });
        blocks_ok && self.bound_violation(theta) <= tolerance
    }
}
