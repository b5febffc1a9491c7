//! Gaussian-kernel PCA.
//!
//! Scores only: the feature map has no usable pre-image, so reconstructions
//! are not offered.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{NeuError, Result};
use crate::geometry::Point;
use crate::linalg::sym_eigen_desc;

const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KpcaModel {
    pub sigma: f64,
    /// Top eigenvalues of the centered Gram matrix.
    pub eigenvalues: Vec<f64>,
    /// Fraction of the centered Gram trace per component.
    pub explained: Vec<f64>,
    /// One row per observation, one column per component.
    pub scores: DMatrix<f64>,
}

pub fn gaussian_kernel(a: &Point, b: &Point, sigma: f64) -> f64 {
    (-(a - b).norm_squared() / (2.0 * sigma * sigma)).exp()
}

pub fn gram_matrix(data: &[Point], sigma: f64) -> DMatrix<f64> {
    let n = data.len();
    DMatrix::from_fn(n, n, |i, j| gaussian_kernel(&data[i], &data[j], sigma))
}

/// `H K H` with `H = I - 11^T / n`.
pub fn double_center(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let nf = n as f64;
    let row_means: DVector<f64> = DVector::from_fn(n, |i, _| k.row(i).sum() / nf);
    let col_means: DVector<f64> = DVector::from_fn(n, |j, _| k.column(j).sum() / nf);
    let all = k.sum() / (nf * nf);
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - col_means[j] + all)
}

pub fn kpca(data: &[Point], k: usize, sigma: f64) -> Result<KpcaModel> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(NeuError::Config(format!("kernel width must be positive, got {sigma}")));
    }
    let n = data.len();
    if n < 2 {
        return Err(NeuError::Data("kernel PCA needs at least two observations".into()));
    }
    if k > n - 1 {
        return Err(NeuError::Config(format!("K = {k} exceeds n - 1 = {}", n - 1)));
    }
    // centering annihilates constants, so K - 1 (computed with expm1) centers
    // to the same matrix without cancellation for wide kernels
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        (-(&data[i] - &data[j]).norm_squared() / (2.0 * sigma * sigma)).exp_m1()
    });
    let centered = double_center(&shifted);
    let (values, vectors) = sym_eigen_desc(&centered);
    let scale = values[0].abs().max(1.0);
    if values.iter().any(|&v| v < -PSD_TOL * scale) {
        return Err(NeuError::Numerical("centered Gram matrix is not positive semi-definite".into()));
    }
    let trace: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let eigenvalues: Vec<f64> = values.iter().take(k).map(|v| v.max(0.0)).collect();
    let explained = eigenvalues
        .iter()
        .map(|v| if trace > 0.0 { v / trace } else { 0.0 })
        .collect();
    // score of observation i on component c: sqrt(lambda_c) * u_c[i]
    let scores = DMatrix::from_fn(n, k, |i, c| eigenvalues[c].sqrt() * vectors[(i, c)]);
    Ok(KpcaModel { sigma, eigenvalues, explained, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::pca;

    fn pts(v: &[[f64; 2]]) -> Vec<Point> {
        v.iter().map(|p| Point::from_column_slice(p)).collect()
    }

    #[test]
    fn three_point_gram_entries() {
        let data = pts(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]);
        let g = gram_matrix(&data, 1.0);
        assert_eq!(g[(0, 0)], 1.0);
        assert!((g[(0, 1)] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((g[(0, 2)] - (-2.0f64).exp()).abs() < 1e-15);
        assert!((g[(1, 2)] - (-2.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn duplicated_rows_have_identical_scores() {
        let data = pts(&[[0.0, 0.0], [1.0, 0.3], [1.0, 0.3], [-0.5, 2.0], [0.7, -1.0]]);
        let m = kpca(&data, 2, 0.8).unwrap();
        for c in 0..2 {
            assert!((m.scores[(1, c)] - m.scores[(2, c)]).abs() < 1e-10);
        }
    }

    #[test]
    fn wide_kernel_approaches_linear_pca() {
        let data = pts(&[[0.0, 0.1], [1.0, 0.4], [2.0, 1.1], [3.0, 0.9], [4.0, 2.2], [5.0, 2.0]]);
        let diameter = 6.0;
        let sigma = 1e6 * diameter;
        let m = kpca(&data, 1, sigma).unwrap();
        let lin = pca(&data, 1).unwrap();
        let lin_scores: Vec<f64> = data.iter().map(|y| lin.scores(y)[0]).collect();
        let kern: Vec<f64> = (0..data.len()).map(|i| m.scores[(i, 0)]).collect();
        // kernel scores are the linear ones divided by sigma, up to sign
        let ratio = kern[0] / lin_scores[0];
        for (k, l) in kern.iter().zip(&lin_scores) {
            assert!((k - ratio * l).abs() < 1e-6 * kern.iter().fold(0.0f64, |a, b| a.max(b.abs())));
        }
        assert!((ratio.abs() * sigma - 1.0).abs() < 1e-4);
    }

    #[test]
    fn eigenvalues_nonnegative_and_fractions_bounded() {
        let data = pts(&[[0.1, 0.2], [0.5, -0.3], [1.2, 0.8], [-0.7, 0.4], [0.0, 1.5], [2.0, 2.0]]);
        let m = kpca(&data, 4, 0.9).unwrap();
        assert!(m.eigenvalues.iter().all(|v| *v >= 0.0));
        assert!(m.explained.iter().sum::<f64>() <= 1.0 + 1e-12);
        assert!(kpca(&data, 2, 0.0).is_err());
    }
}
