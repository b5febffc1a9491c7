//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{NeuError, Result};
use crate::geometry::Point;

/// Stacks points as the rows of a matrix.
pub fn rows_to_matrix(points: &[Point]) -> DMatrix<f64> {
    let n = points.len();
    let d = points.first().map_or(0, |p| p.len());
    DMatrix::from_fn(n, d, |i, j| points[i][j])
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Point> {
    m.row_iter().map(|r| r.transpose()).collect()
}

/// Least squares `min |A b - y|` through a Householder QR factorization.
///
/// Fails when a diagonal entry of `R` falls below `1e-12` times the largest.
pub fn lstsq(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (n, p) = a.shape();
    if n < p {
        return Err(NeuError::RankDeficient(format!("{n} observations for {p} coefficients")));
    }
    if p == 0 {
        return Ok(DVector::zeros(0));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if scale == 0.0 || (0..p).any(|i| r[(i, i)].abs() <= 1e-12 * scale) {
        return Err(NeuError::RankDeficient("design matrix does not have full column rank".into()));
    }
    let qty = qr.q().tr_mul(y);
    r.solve_upper_triangular(&qty)
        .ok_or_else(|| NeuError::RankDeficient("triangular solve failed".into()))
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues in decreasing order.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// 2-norm condition number through singular values; infinite when singular.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return f64::INFINITY;
    }
    let sv = a.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 || a.nrows() < a.ncols() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves a symmetric positive definite system, falling back to LU.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| NeuError::Numerical("singular linear system".into()))
}

/// Column means of a data matrix.
pub fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows().max(1) as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

pub fn center_columns(m: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        row -= mean.transpose();
    }
    out
}
