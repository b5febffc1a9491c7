//! Penalized cubic regression splines.
//!
//! Minimizes `sum (y_i - g(x_i))^2 + lambda * int g''(x)^2 dx` over cubic
//! splines on a clamped knot vector whose interior knots sit at equally
//! spaced quantiles of `x`. The roughness integral is evaluated exactly
//! (two-point Gauss rule per knot interval; `g''` is piecewise linear).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{NeuError, Result};
use crate::linalg::solve_spd;

const ORDER: usize = 4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PSpline {
    pub lambda: f64,
    /// Number of basis functions; the knot vector has `basis - 4` interior knots.
    pub basis: usize,
    knots: Vec<f64>,
    coefficients: Vec<f64>,
}

impl PSpline {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Evaluates the spline; outside the knot range it continues linearly.
    pub fn predict(&self, x: f64) -> f64 {
        let lo = self.knots[0];
        let hi = *self.knots.last().expect("non-empty knots");
        let eval = |z: f64| dot(&self.coefficients, &basis_values(&self.knots, z));
        if x < lo {
            eval(lo) + (x - lo) * self.slope(lo)
        } else if x > hi {
            eval(hi) + (x - hi) * self.slope(hi)
        } else {
            eval(x)
        }
    }

    pub fn predict_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.predict(x)).collect()
    }

    fn slope(&self, x: f64) -> f64 {
        dot(&self.coefficients, &basis_first_derivatives(&self.knots, x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Clamped cubic knot vector with `basis - 4` interior knots at quantiles.
pub fn quantile_knots(xs: &[f64], basis: usize) -> Result<Vec<f64>> {
    if basis < ORDER {
        return Err(NeuError::Config(format!("need at least {ORDER} basis functions, got {basis}")));
    }
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if !(hi > lo) {
        return Err(NeuError::Data("p-spline needs at least two distinct x values".into()));
    }
    let interior = basis - ORDER;
    let mut knots = vec![lo; ORDER];
    let last = (sorted.len() - 1) as f64;
    for k in 1..=interior {
        let pos = last * k as f64 / (interior + 1) as f64;
        let (i, frac) = (pos.floor() as usize, pos.fract());
        let q = if i + 1 < sorted.len() { sorted[i] * (1.0 - frac) + sorted[i + 1] * frac } else { sorted[i] };
        knots.push(q.clamp(lo, hi));
    }
    knots.extend(std::iter::repeat_n(hi, ORDER));
    Ok(knots)
}

/// All B-splines of `order` at `x` (Cox-de Boor); right end belongs to the last interval.
fn bsplines(t: &[f64], order: usize, x: f64) -> Vec<f64> {
    let m = t.len() - 1;
    let hi = t[m];
    let mut b: Vec<f64> = (0..m)
        .map(|i| {
            let inside = t[i] <= x && x < t[i + 1];
            let at_end = x == hi && t[i] < t[i + 1] && t[i + 1] == hi;
            if inside || at_end {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for k in 2..=order {
        let count = t.len() - k;
        b = (0..count)
            .map(|i| {
                ratio(x - t[i], t[i + k - 1] - t[i]) * b[i]
                    + ratio(t[i + k] - x, t[i + k] - t[i + 1]) * b[i + 1]
            })
            .collect();
    }
    b
}

fn basis_values(t: &[f64], x: f64) -> Vec<f64> {
    bsplines(t, ORDER, x)
}

fn basis_first_derivatives(t: &[f64], x: f64) -> Vec<f64> {
    let b3 = bsplines(t, ORDER - 1, x);
    let n = t.len() - ORDER;
    (0..n)
        .map(|i| 3.0 * (ratio(b3[i], t[i + 3] - t[i]) - ratio(b3[i + 1], t[i + 4] - t[i + 1])))
        .collect()
}

fn basis_second_derivatives(t: &[f64], x: f64) -> Vec<f64> {
    let b2 = bsplines(t, 2, x);
    let d3: Vec<f64> = (0..t.len() - 3)
        .map(|i| 2.0 * (ratio(b2[i], t[i + 2] - t[i]) - ratio(b2[i + 1], t[i + 3] - t[i + 1])))
        .collect();
    let n = t.len() - ORDER;
    (0..n)
        .map(|i| 3.0 * (ratio(d3[i], t[i + 3] - t[i]) - ratio(d3[i + 1], t[i + 4] - t[i + 1])))
        .collect()
}

/// `Omega_ij = int B_i'' B_j''` over the knot range.
pub fn roughness_penalty(t: &[f64]) -> DMatrix<f64> {
    let n = t.len() - ORDER;
    let mut omega = DMatrix::zeros(n, n);
    let g = 0.5 / 3f64.sqrt();
    for w in t.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (mid, half) = (0.5 * (a + b), b - a);
        for node in [mid - g * half, mid + g * half] {
            let d = DVector::from_vec(basis_second_derivatives(t, node));
            omega += &d * d.transpose() * (0.5 * half);
        }
    }
    omega
}

pub fn design_matrix(t: &[f64], xs: &[f64]) -> DMatrix<f64> {
    let n = t.len() - ORDER;
    let mut b = DMatrix::zeros(xs.len(), n);
    for (r, &x) in xs.iter().enumerate() {
        for (c, v) in basis_values(t, x).into_iter().enumerate() {
            b[(r, c)] = v;
        }
    }
    b
}

pub fn pspline_fit(xs: &[f64], ys: &[f64], lambda: f64, basis: usize) -> Result<PSpline> {
    if xs.len() != ys.len() {
        return Err(NeuError::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(NeuError::Config(format!("lambda must be >= 0, got {lambda}")));
    }
    if basis > xs.len() {
        return Err(NeuError::Config(format!("{basis} basis functions for {} observations", xs.len())));
    }
    let knots = quantile_knots(xs, basis)?;
    let b = design_matrix(&knots, xs);
    let lhs = b.transpose() * &b + roughness_penalty(&knots) * lambda;
    let rhs = b.transpose() * DVector::from_column_slice(ys);
    let c = solve_spd(&lhs, &rhs)?;
    if c.iter().any(|v| !v.is_finite()) {
        return Err(NeuError::Numerical("singular penalized system".into()));
    }
    Ok(PSpline { lambda, basis, knots, coefficients: c.as_slice().to_vec() })
}

/// Grid over which [`pspline_fit_cv`] searches.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PSplineGrid {
    pub lambdas: Vec<f64>,
    pub bases: Vec<usize>,
    pub folds: usize,
}

impl Default for PSplineGrid {
    fn default() -> Self {
        Self {
            lambdas: (0..=12).map(|k| 10f64.powi(k - 10)).collect(),
            bases: vec![6, 8, 12, 16, 20, 25],
            folds: 4,
        }
    }
}

/// Observation `i` belongs to fold `i % folds`.
pub fn cv_error<F>(n: usize, folds: usize, mut fit_predict: F) -> Result<f64>
where
    F: FnMut(&[usize], &[usize]) -> Result<Vec<f64>>,
{
    let mut sse = 0.0;
    for f in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| i % folds == f);
        if test.is_empty() {
            continue;
        }
        sse += fit_predict(&train, &test)?.iter().sum::<f64>();
    }
    Ok(sse / n as f64)
}

/// Chooses `(lambda, basis)` by k-fold cross-validation and refits on all data.
pub fn pspline_fit_cv(xs: &[f64], ys: &[f64], grid: &PSplineGrid) -> Result<PSpline> {
    let n = xs.len();
    let mut best: Option<(f64, f64, usize)> = None;
    for &basis in &grid.bases {
        for &lambda in &grid.lambdas {
            let err = cv_error(n, grid.folds, |train, test| {
                let tx: Vec<f64> = train.iter().map(|&i| xs[i]).collect();
                let ty: Vec<f64> = train.iter().map(|&i| ys[i]).collect();
                let s = pspline_fit(&tx, &ty, lambda, basis)?;
                Ok(test.iter().map(|&i| (s.predict(xs[i]) - ys[i]).powi(2)).collect())
            });
            if let Ok(e) = err {
                if e.is_finite() && best.is_none_or(|(b, _, _)| e < b) {
                    best = Some((e, lambda, basis));
                }
            }
        }
    }
    let (_, lambda, basis) =
        best.ok_or_else(|| NeuError::Evaluation("no p-spline configuration could be fitted".into()))?;
    pspline_fit(xs, ys, lambda, basis)
}
