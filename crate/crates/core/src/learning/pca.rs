use nalgebra::DVector;

use super::{Hyper, InnerDiagnostic, ObjectiveLearningAlgorithm};
use crate::baselines::pca::{pca, PcaModel};
use crate::error::{NeuError, Result};
use crate::geometry::Point;
use crate::linalg::{center_columns, column_means, rows_to_matrix, sym_eigen_desc};

/// Principal components as an objective learning algorithm.
///
/// `gamma = [K]`; `beta` stacks the mean followed by the `K` components.
/// Both losses are the summed squared distance to the fitted affine span.
#[derive(Debug, Clone)]
pub struct PcaAlgorithm {
    pub factors: usize,
}

impl PcaAlgorithm {
    pub fn new(factors: usize) -> Self {
        Self { factors }
    }

    pub fn model_from_beta(beta: &DVector<f64>, dim: usize) -> (Point, Vec<Point>) {
        let mean = beta.rows(0, dim).into_owned();
        let k = beta.len() / dim - 1;
        let comps = (1..=k).map(|i| beta.rows(i * dim, dim).into_owned()).collect();
        (mean, comps)
    }

    fn beta_from_model(model: &PcaModel) -> DVector<f64> {
        let mut v: Vec<f64> = model.mean.iter().copied().collect();
        for c in &model.components {
            v.extend(c.iter());
        }
        DVector::from_vec(v)
    }
}

impl ObjectiveLearningAlgorithm for PcaAlgorithm {
    fn name(&self) -> String {
        format!("pca-{}", self.factors)
    }

    fn gamma_grid(&self) -> Vec<Hyper> {
        vec![vec![self.factors as f64]]
    }

    fn fit_inner(&self, gamma: &Hyper, train: &[Point]) -> Result<DVector<f64>> {
        let k = gamma.first().copied().unwrap_or(self.factors as f64);
        if k < 0.0 || k.fract() != 0.0 {
            return Err(NeuError::Config(format!("factor count must be a whole number, got {k}")));
        }
        Ok(Self::beta_from_model(&pca(train, k as usize)?))
    }

    fn loss_in(&self, beta: &DVector<f64>, _gamma: &Hyper, train: &[Point]) -> f64 {
        train.iter().map(|z| (z - self.pattern(beta, z)).norm_squared()).sum()
    }

    fn pattern(&self, beta: &DVector<f64>, z: &Point) -> Point {
        let (mean, comps) = Self::model_from_beta(beta, z.len());
        let centered = z - &mean;
        comps.iter().fold(mean, |acc, v| acc + v * v.dot(&centered))
    }

    fn inner_diagnostic(&self, gamma: &Hyper, train: &[Point]) -> InnerDiagnostic {
        let k = gamma.first().copied().unwrap_or(0.0) as usize;
        let eigengap = if train.len() < 2 {
            0.0
        } else {
            let raw = rows_to_matrix(train);
            let q = center_columns(&raw, &column_means(&raw));
            let (vals, _) = sym_eigen_desc(&(q.transpose() * &q));
            let lead = vals[0].abs().max(f64::MIN_POSITIVE);
            (0..k.min(vals.len().saturating_sub(1)))
                .map(|i| (vals[i] - vals[i + 1]) / lead)
                .fold(f64::INFINITY, f64::min)
        };
        InnerDiagnostic { gamma: gamma.clone(), condition: None, eigengap: Some(eigengap) }
    }
}
