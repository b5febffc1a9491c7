//! Principal components by deflation.
//!
//! With `Q` the centered data matrix, the k-th component maximizes
//! `|Q_k v|^2` over unit `v`, where `Q_k = Q - sum_{s<k} Q v_s v_s^T` removes
//! the directions already found. Each maximization is a power iteration on
//! `Q_k^T Q_k`, polished by a few shifted inverse-iteration steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{NeuError, Result};
use crate::geometry::Point;
use crate::linalg::{center_columns, column_means, rows_to_matrix, sym_eigen_desc};

#[derive(Debug, Clone, Copy)]
pub struct PcaOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relative eigengap (to the leading eigenvalue) below which a tie is reported.
    pub tie_tol: f64,
}

impl Default for PcaOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 10_000, tie_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// Unit components, strongest first.
    pub components: Vec<DVector<f64>>,
    /// Sample variances along each component.
    pub eigenvalues: Vec<f64>,
    /// Fraction of total variance per component.
    pub explained: Vec<f64>,
    pub total_variance: f64,
    /// Components `k` (0-based) whose eigenvalue is tied with the next one.
    pub ties: Vec<usize>,
}

impl PcaModel {
    pub fn is_regular(&self) -> bool {
        self.ties.is_empty()
    }

    pub fn cumulative_explained(&self, k: usize) -> f64 {
        self.explained.iter().take(k).sum()
    }

    /// Projection of `y` onto the affine span of the first `k` components.
    pub fn reconstruct(&self, y: &Point, k: usize) -> Point {
        let centered = y - &self.mean;
        let mut out = self.mean.clone();
        for v in self.components.iter().take(k) {
            out += v * v.dot(&centered);
        }
        out
    }

    pub fn scores(&self, y: &Point) -> Vec<f64> {
        let centered = y - &self.mean;
        self.components.iter().map(|v| v.dot(&centered)).collect()
    }
}

pub fn pca(data: &[Point], k: usize) -> Result<PcaModel> {
    pca_with(data, k, &PcaOptions::default())
}

pub fn pca_with(data: &[Point], k: usize, options: &PcaOptions) -> Result<PcaModel> {
    let n = data.len();
    if n < 2 {
        return Err(NeuError::Data("PCA needs at least two observations".into()));
    }
    let d = data[0].len();
    if data.iter().any(|p| p.len() != d) {
        return Err(NeuError::Data("observations have different dimensions".into()));
    }
    if k > (n - 1).min(d) {
        return Err(NeuError::Config(format!("K = {k} exceeds min(n - 1, D) = {}", (n - 1).min(d))));
    }
    let raw = rows_to_matrix(data);
    let mean = column_means(&raw);
    let q = center_columns(&raw, &mean);
    let denom = (n - 1) as f64;
    let total_variance = q.norm_squared() / denom;

    let mut components: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for _ in 0..k {
        let mut deflated = q.clone();
        for v in &components {
            deflated -= (&q * v) * v.transpose();
        }
        let gram = deflated.transpose() * &deflated;
        let v = leading_direction(&gram, &components, options);
        eigenvalues.push((&deflated * &v).norm_squared() / denom);
        components.push(v);
    }
    let explained = eigenvalues
        .iter()
        .map(|l| if total_variance > 0.0 { l / total_variance } else { 0.0 })
        .collect();

    let cov = q.transpose() * &q / denom;
    let (all, _) = sym_eigen_desc(&cov);
    let lead = all.get(0).copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
    let ties = (0..k)
        .filter(|&i| i + 1 < all.len() && (all[i] - all[i + 1]).abs() <= options.tie_tol * lead)
        .collect();

    Ok(PcaModel { mean, components, eigenvalues, explained, total_variance, ties })
}

/// Unit maximizer of `v^T G v`, orthogonal to `previous`.
fn leading_direction(gram: &DMatrix<f64>, previous: &[DVector<f64>], options: &PcaOptions) -> DVector<f64> {
    let d = gram.nrows();
    let orthogonalize = |mut v: DVector<f64>| {
        for _ in 0..2 {
            for u in previous {
                v -= u * u.dot(&v);
            }
        }
        v
    };
    // start from the strongest column of G, else any vector orthogonal to the previous ones
    let mut v = (0..d)
        .map(|j| gram.column(j).into_owned())
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or_else(|| DVector::zeros(d));
    v = orthogonalize(v);
    if v.norm() == 0.0 {
        return fallback_direction(d, &orthogonalize);
    }
    v.normalize_mut();

    for _ in 0..options.max_iter {
        let mut next = orthogonalize(gram * &v);
        let norm = next.norm();
        if norm == 0.0 {
            return v;
        }
        next /= norm;
        if next.dot(&v) < 0.0 {
            next = -next;
        }
        let change = (&next - &v).norm();
        v = next;
        if change < options.tol {
            break;
        }
    }

    // shifted inverse iteration: each accepted step must not lower the Rayleigh quotient
    let mut rq = v.dot(&(gram * &v));
    for _ in 0..3 {
        let shifted = gram - DMatrix::identity(d, d) * rq;
        let Some(w) = shifted.lu().solve(&v) else { break };
        let mut w = orthogonalize(w);
        let norm = w.norm();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        w /= norm;
        if w.dot(&v) < 0.0 {
            w = -w;
        }
        let new_rq = w.dot(&(gram * &w));
        if new_rq + 1e-14 * rq.abs().max(1.0) < rq {
            break;
        }
        let change = (&w - &v).norm();
        v = w;
        rq = new_rq;
        if change < 1e-15 {
            break;
        }
    }
    v
}

fn fallback_direction(
    d: usize,
    orthogonalize: &dyn Fn(DVector<f64>) -> DVector<f64>,
) -> DVector<f64> {
    (0..d)
        .map(|i| {
            let mut e = DVector::zeros(d);
            e[i] = 1.0;
            orthogonalize(e)
        })
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .map(|v| v.normalize())
        .unwrap_or_else(|| DVector::zeros(d))
}

/// `sum_i min_b |(Y_i - mean) - V b|^2` over the first `k_tilde` components.
pub fn pca_projection_loss(model: &PcaModel, k_tilde: usize, data: &[Point]) -> Result<f64> {
    if k_tilde > model.components.len() {
        return Err(NeuError::Config(format!(
            "requested {k_tilde} components, model has {}",
            model.components.len()
        )));
    }
    Ok(data.iter().map(|y| (y - model.reconstruct(y, k_tilde)).norm_squared()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn sample(seed: u64, n: usize, scales: &[f64]) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Point::from_iterator(
                    scales.len(),
                    scales.iter().map(|s| { let e: f64 = StandardNormal.sample(&mut rng); s * e }),
                )
            })
            .collect()
    }

    #[test]
    fn points_on_diagonal_line() {
        let data: Vec<Point> = (0..10).map(|i| Point::from_vec(vec![i as f64, i as f64])).collect();
        let m = pca(&data, 1).unwrap();
        let v = &m.components[0];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0].abs() - s).abs() < 1e-12 && (v[1].abs() - s).abs() < 1e-12);
        assert!((m.explained[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_sample_reports_tie() {
        let data = vec![
            Point::from_vec(vec![1.0, 0.0]),
            Point::from_vec(vec![-1.0, 0.0]),
            Point::from_vec(vec![0.0, 1.0]),
            Point::from_vec(vec![0.0, -1.0]),
        ];
        let m = pca(&data, 1).unwrap();
        assert!(!m.is_regular());
        assert_eq!(m.ties, vec![0]);
    }

    #[test]
    fn matches_eigendecomposition() {
        let data = sample(5, 60, &[3.0, 2.0, 1.5, 1.0, 0.5]);
        let m = pca(&data, 4).unwrap();
        let raw = rows_to_matrix(&data);
        let q = center_columns(&raw, &column_means(&raw));
        let (vals, vecs) = sym_eigen_desc(&(q.transpose() * &q / 59.0));
        for k in 0..4 {
            let oracle = vecs.column(k);
            let v = &m.components[k];
            let err = (v - oracle).amax().min((v + oracle).amax());
            assert!(err < 1e-8, "component {k}: {err}");
            assert!((m.eigenvalues[k] - vals[k]).abs() < 1e-9 * vals[0]);
        }
        for w in m.explained.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn full_rank_explains_everything() {
        let data = sample(6, 30, &[1.0, 2.0, 3.0]);
        let m = pca(&data, 3).unwrap();
        assert!((m.explained.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(pca_projection_loss(&m, 3, &data).unwrap() < 1e-20);
    }

    #[test]
    fn projection_loss_conventions() {
        let data = sample(7, 25, &[2.0, 1.0, 0.3]);
        let m = pca(&data, 2).unwrap();
        let total: f64 = data.iter().map(|y| (y - &m.mean).norm_squared()).sum();
        assert!((pca_projection_loss(&m, 0, &data).unwrap() - total).abs() < 1e-10);
        let v = DMatrix::from_columns(&m.components[..2]);
        let proj = DMatrix::identity(3, 3) - &v * v.transpose();
        let oracle: f64 = data.iter().map(|y| (&proj * (y - &m.mean)).norm_squared()).sum();
        assert!((pca_projection_loss(&m, 2, &data).unwrap() - oracle).abs() < 1e-10);
        assert!(pca_projection_loss(&m, 3, &data).is_err());
    }

    #[test]
    fn rejects_too_many_components() {
        let data = sample(8, 3, &[1.0, 1.0, 1.0, 1.0]);
        assert!(pca(&data, 3).is_err());
        assert!(pca(&data, 2).is_ok());
    }
}
