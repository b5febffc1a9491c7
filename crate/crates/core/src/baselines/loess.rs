//! Local polynomial regression with tricube weights.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baselines::pspline::cv_error;
use crate::error::{NeuError, Result};
use crate::linalg::lstsq;

pub const DEFAULT_SPAN: f64 = 0.75;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Loess {
    pub degree: usize,
    pub span: f64,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

pub fn tricube(u: f64) -> f64 {
    let a = u.abs();
    if a >= 1.0 {
        0.0
    } else {
        (1.0 - a * a * a).powi(3)
    }
}

impl Loess {
    /// Neighborhood size `ceil(span * n)`.
    pub fn neighbors(&self) -> usize {
        ((self.span * self.xs.len() as f64).ceil() as usize).clamp(1, self.xs.len())
    }

    pub fn predict(&self, x0: f64) -> Result<f64> {
        let q = self.neighbors();
        let mut dist: Vec<(f64, usize)> = self.xs.iter().enumerate().map(|(i, x)| ((x - x0).abs(), i)).collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let h = dist[q - 1].0;
        let used: Vec<(usize, f64)> = dist[..q]
            .iter()
            .map(|&(d, i)| (i, if h > 0.0 { tricube(d / h) } else { 1.0 }))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        if used.len() < self.degree + 1 {
            return Err(NeuError::Domain(format!(
                "{} weighted neighbours for a degree-{} local fit",
                used.len(),
                self.degree
            )));
        }
        let p = self.degree + 1;
        let a = DMatrix::from_fn(used.len(), p, |r, c| used[r].1.sqrt() * (self.xs[used[r].0] - x0).powi(c as i32));
        let b = DVector::from_fn(used.len(), |r, _| used[r].1.sqrt() * self.ys[used[r].0]);
        Ok(lstsq(&a, &b)?[0])
    }

    pub fn predict_all(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.predict(x)).collect()
    }
}

pub fn loess_fit(xs: &[f64], ys: &[f64], degree: usize, span: f64) -> Result<Loess> {
    if xs.len() != ys.len() {
        return Err(NeuError::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if !(1..=2).contains(&degree) {
        return Err(NeuError::Config(format!("degree must be 1 or 2, got {degree}")));
    }
    if !(span > 0.0 && span <= 1.0) {
        return Err(NeuError::Config(format!("span must lie in (0, 1], got {span}")));
    }
    let model = Loess { degree, span, xs: xs.to_vec(), ys: ys.to_vec() };
    if model.neighbors() < degree + 1 {
        return Err(NeuError::Domain(format!(
            "span {span} covers {} points, a degree-{degree} fit needs {}",
            model.neighbors(),
            degree + 1
        )));
    }
    Ok(model)
}

/// Picks the degree by k-fold cross-validation at a fixed span.
pub fn loess_fit_cv(xs: &[f64], ys: &[f64], span: f64, folds: usize) -> Result<Loess> {
    let mut best: Option<(f64, usize)> = None;
    for degree in [1, 2] {
        let err = cv_error(xs.len(), folds, |train, test| {
            let tx: Vec<f64> = train.iter().map(|&i| xs[i]).collect();
            let ty: Vec<f64> = train.iter().map(|&i| ys[i]).collect();
            let m = loess_fit(&tx, &ty, degree, span)?;
            test.iter().map(|&i| Ok((m.predict(xs[i])? - ys[i]).powi(2))).collect()
        });
        if let Ok(e) = err {
            if e.is_finite() && best.is_none_or(|(b, _)| e < b) {
                best = Some((e, degree));
            }
        }
    }
    let (_, degree) = best.ok_or_else(|| NeuError::Evaluation("no LOESS degree could be fitted".into()))?;
    loess_fit(xs, ys, degree, span)
}
