//! Elastic net by cyclic coordinate descent.
//!
//! Objective: `|y - X b|^2 + lambda * [(1 - alpha) |b|_1 + alpha |b|_2^2]`.
//! With this parametrization `alpha = 0` is the LASSO and `alpha = 1` is ridge
//! regression, which is the reverse of the glmnet convention.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{NeuError, Result};
use crate::linalg::column_means;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnetSpec {
    pub lambda: f64,
    pub alpha: f64,
}

impl EnetSpec {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(NeuError::Config(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(NeuError::Config(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        Ok(Self { lambda, alpha })
    }

    pub fn ols() -> Self {
        Self { lambda: 0.0, alpha: 1.0 }
    }

    pub fn ridge(lambda: f64) -> Self {
        Self { lambda, alpha: 1.0 }
    }

    pub fn lasso(lambda: f64) -> Self {
        Self { lambda, alpha: 0.0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EnetOptions {
    /// Center `X` and `y` and report an unpenalized intercept.
    pub fit_intercept: bool,
    /// Scale columns to unit standard deviation before penalizing.
    pub standardize: bool,
    /// Stop when the largest coefficient update falls below `tol * max(1, |b|_inf)`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for EnetOptions {
    fn default() -> Self {
        Self { fit_intercept: false, standardize: false, tol: 1e-12, max_sweeps: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnetFit {
    pub intercept: f64,
    pub coefficients: DVector<f64>,
    pub sweeps: usize,
}

impl EnetFit {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        x * &self.coefficients + DVector::repeat(x.nrows(), self.intercept)
    }
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Value of the objective for raw (unstandardized, uncentered) coefficients.
pub fn enet_objective(x: &DMatrix<f64>, y: &DVector<f64>, b: &DVector<f64>, spec: &EnetSpec) -> f64 {
    let r = y - x * b;
    r.norm_squared() + spec.lambda * ((1.0 - spec.alpha) * b.lp_norm(1) + spec.alpha * b.norm_squared())
}

pub fn enet_fit(
    design: &DMatrix<f64>,
    responses: &DVector<f64>,
    spec: &EnetSpec,
    options: &EnetOptions,
) -> Result<EnetFit> {
    let (n, p) = design.shape();
    if responses.len() != n {
        return Err(NeuError::DimensionMismatch { expected: n, got: responses.len() });
    }
    let spec = EnetSpec::new(spec.lambda, spec.alpha)?;
    let mut x = design.clone();
    let mut y = responses.clone();
    let x_mean = if options.fit_intercept { column_means(&x) } else { DVector::zeros(p) };
    let y_mean = if options.fit_intercept && n > 0 { y.mean() } else { 0.0 };
    if options.fit_intercept {
        for j in 0..p {
            x.column_mut(j).add_scalar_mut(-x_mean[j]);
        }
        y.add_scalar_mut(-y_mean);
    }
    let mut scale = DVector::from_element(p, 1.0);
    if options.standardize {
        for j in 0..p {
            let s = (x.column(j).norm_squared() / n.max(1) as f64).sqrt();
            if s > 0.0 {
                scale[j] = s;
                x.column_mut(j).scale_mut(1.0 / s);
            }
        }
    }

    let col_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared()).collect();
    let l1 = 0.5 * spec.lambda * (1.0 - spec.alpha);
    let l2 = spec.lambda * spec.alpha;
    let mut beta = DVector::<f64>::zeros(p);
    let mut resid = y.clone();
    let mut sweeps = 0;
    let mut converged = p == 0;
    while !converged && sweeps < options.max_sweeps {
        sweeps += 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let old = beta[j];
            let z = x.column(j).dot(&resid) + col_sq[j] * old;
            let new = soft_threshold(z, l1) / (col_sq[j] + l2);
            if new != old {
                resid.axpy(old - new, &x.column(j), 1.0);
                beta[j] = new;
                max_delta = max_delta.max((new - old).abs());
            }
        }
        converged = max_delta <= options.tol * beta.amax().max(1.0);
    }
    if !converged {
        return Err(NeuError::Convergence { iterations: sweeps, residual: f64::NAN });
    }
    let coefficients = beta.component_div(&scale);
    let intercept = y_mean - x_mean.dot(&coefficients);
    Ok(EnetFit { intercept, coefficients, sweeps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::ols_fit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let truth = DVector::from_fn(p, |i, _| i as f64 - 1.0);
        let y = &x * truth + DVector::from_fn(n, |_, _| 0.1 * rng.random_range(-1.0..1.0));
        (x, y)
    }

    #[test]
    fn zero_lambda_is_ols() {
        let (x, y) = problem(1, 30, 4);
        let fit = enet_fit(&x, &y, &EnetSpec::new(0.0, 0.5).unwrap(), &EnetOptions::default()).unwrap();
        let ols = ols_fit(&x, &y).unwrap();
        assert!((fit.coefficients - ols).amax() < 1e-8);
    }

    #[test]
    fn alpha_one_is_ridge() {
        let (x, y) = problem(2, 30, 4);
        let lambda = 3.0;
        let fit = enet_fit(&x, &y, &EnetSpec::ridge(lambda), &EnetOptions::default()).unwrap();
        let a = x.transpose() * &x + DMatrix::identity(4, 4) * lambda;
        let oracle = a.try_inverse().unwrap() * x.transpose() * &y;
        assert!((fit.coefficients - oracle).amax() < 1e-8);
    }

    #[test]
    fn large_lasso_penalty_zeroes_everything() {
        let (x, y) = problem(3, 30, 2);
        let fit = enet_fit(&x, &y, &EnetSpec::lasso(1e6), &EnetOptions::default()).unwrap();
        assert!(fit.coefficients.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn intercept_and_standardization() {
        let (x, y) = problem(4, 40, 3);
        let shifted = y.add_scalar(5.0);
        let opts = EnetOptions { fit_intercept: true, standardize: true, ..Default::default() };
        let fit = enet_fit(&x, &shifted, &EnetSpec::ols(), &opts).unwrap();
        let mut design = DMatrix::from_element(40, 4, 1.0);
        design.view_mut((0, 1), (40, 3)).copy_from(&x);
        let ols = ols_fit(&design, &shifted).unwrap();
        assert!((fit.intercept - ols[0]).abs() < 1e-8);
        assert!((fit.coefficients - ols.rows(1, 3)).amax() < 1e-8);
    }

    #[test]
    fn invalid_spec() {
        assert!(EnetSpec::new(-1.0, 0.5).is_err());
        assert!(EnetSpec::new(1.0, 1.5).is_err());
    }
}
