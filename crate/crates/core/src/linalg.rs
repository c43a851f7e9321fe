//! Small dense linear-algebra helpers shared by the design and analysis code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// `X + Xᵀ`.
pub fn sym(x: &Mat) -> Mat {
    x + x.transpose()
}

/// Averages `X` with its transpose; removes round-off asymmetry.
pub fn symmetrize(x: &Mat) -> Mat {
    (x + x.transpose()) * 0.5
}

pub fn is_symmetric(x: &Mat, tol: f64) -> bool {
    if !x.is_square() {
        return false;
    }
    let n = x.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = x[(i, j)];
            let b = x[(j, i)];
            if (a - b).abs() > tol * (1.0 + a.abs().max(b.abs())) {
                return false;
            }
        }
    }
    true
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(x: &Mat) -> Vec<f64> {
    if x.nrows() == 0 {
        return Vec::new();
    }
    let mut vals: Vec<f64> = SymmetricEigen::new(symmetrize(x)).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn sym_max_eigenvalue(x: &Mat) -> f64 {
    sym_eigenvalues(x).last().copied().unwrap_or(f64::NEG_INFINITY)
}

pub fn sym_min_eigenvalue(x: &Mat) -> f64 {
    sym_eigenvalues(x).first().copied().unwrap_or(f64::INFINITY)
}

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm(x: &Mat) -> f64 {
    if x.nrows() == 0 || x.ncols() == 0 {
        return 0.0;
    }
    x.singular_values().max()
}

/// Maximum real part over the eigenvalues of a square matrix.
pub fn spectral_abscissa(m: &Mat) -> f64 {
    assert!(m.is_square(), "spectral abscissa needs a square matrix");
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Builds a matrix from row-major nested vectors. Returns `None` on ragged input.
pub fn from_rows(rows: &[Vec<f64>], ncols_if_empty: usize) -> Option<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(ncols_if_empty, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Serde adapters writing matrices as row-major nested arrays.
pub mod rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{from_rows, to_rows, Mat};

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows, 0).ok_or_else(|| serde::de::Error::custom("ragged matrix rows"))
    }
}
