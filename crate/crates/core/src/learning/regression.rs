use nalgebra::{DMatrix, DVector};

use super::{Hyper, InnerDiagnostic, ObjectiveLearningAlgorithm};
use crate::baselines::enet::{enet_fit, EnetOptions, EnetSpec};
use crate::error::{NeuError, Result};
use crate::geometry::Point;
use crate::linalg::{center_columns, column_means, condition_number, lstsq, rows_to_matrix, sym_eigen_desc};
use crate::reconfig::ReconfigChain;

const ROOT_TOL: f64 = 1e-12;
const ROOT_MAX_EXPANSIONS: usize = 80;
const ROOT_MAX_ITERS: usize = 200;

/// Linear regression with an elastic-net penalty grid.
///
/// Points are graph points `(x_1, .., x_p, y)`. `beta = [intercept, slopes]`
/// and `gamma = [lambda, alpha]`. The training loss is the penalized residual
/// sum of squares; the validation loss is the plain residual sum of squares.
#[derive(Debug, Clone)]
pub struct RegressionAlgorithm {
    pub label: String,
    pub grid: Vec<EnetSpec>,
    pub standardize: bool,
}

impl RegressionAlgorithm {
    pub fn ols() -> Self {
        Self { label: "ols".into(), grid: vec![EnetSpec::ols()], standardize: false }
    }

    pub fn enet(grid: Vec<EnetSpec>) -> Self {
        Self { label: "enet".into(), grid, standardize: false }
    }

    pub fn ridge(lambdas: &[f64]) -> Self {
        Self { label: "ridge".into(), grid: lambdas.iter().map(|&l| EnetSpec::ridge(l)).collect(), standardize: false }
    }

    pub fn lasso(lambdas: &[f64]) -> Self {
        Self { label: "lasso".into(), grid: lambdas.iter().map(|&l| EnetSpec::lasso(l)).collect(), standardize: false }
    }

    pub fn with_standardize(mut self, on: bool) -> Self {
        self.standardize = on;
        self
    }

    fn spec(gamma: &Hyper) -> Result<EnetSpec> {
        match gamma.as_slice() {
            [lambda, alpha] => EnetSpec::new(*lambda, *alpha),
            _ => Err(NeuError::Config(format!("regression hyperparameter must be [lambda, alpha], got {gamma:?}"))),
        }
    }

    fn split(train: &[Point]) -> (DMatrix<f64>, DVector<f64>) {
        let d = train[0].len();
        let x = DMatrix::from_fn(train.len(), d - 1, |i, j| train[i][j]);
        let y = DVector::from_fn(train.len(), |i, _| train[i][d - 1]);
        (x, y)
    }

    /// `intercept + slopes . x`.
    pub fn line(beta: &DVector<f64>, x: &[f64]) -> f64 {
        beta[0] + x.iter().zip(beta.iter().skip(1)).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Response `y` at which `chain(x, y)` lies on the fitted hyperplane,
    /// searched outward from an initial guess.
    pub fn solve_response(chain: &ReconfigChain, beta: &DVector<f64>, x: &[f64], guess: f64) -> Result<f64> {
        let d = x.len() + 1;
        let mut z = Point::zeros(d);
        z.rows_mut(0, d - 1).copy_from_slice(x);
        let mut residual = |y: f64| -> Result<f64> {
            z[d - 1] = y;
            let w = chain.reconfigure(&z)?;
            Ok(w[d - 1] - Self::line(beta, &w.as_slice()[..d - 1]))
        };
        let r0 = residual(guess)?;
        if r0 == 0.0 {
            return Ok(guess);
        }
        let scale = guess.abs().max(1.0);
        let mut h = 1e-3 * scale;
        let (mut lo_prev, mut lo_r) = (guess, r0);
        let (mut hi_prev, mut hi_r) = (guess, r0);
        for _ in 0..ROOT_MAX_EXPANSIONS {
            let up = guess + h;
            let ru = residual(up)?;
            if ru.signum() != hi_r.signum() {
                return Self::refine(&mut residual, hi_prev, hi_r, up, ru, scale);
            }
            let down = guess - h;
            let rd = residual(down)?;
            if rd.signum() != lo_r.signum() {
                return Self::refine(&mut residual, down, rd, lo_prev, lo_r, scale);
            }
            (hi_prev, hi_r, lo_prev, lo_r) = (up, ru, down, rd);
            h *= 2.0;
        }
        Err(NeuError::Convergence { iterations: ROOT_MAX_EXPANSIONS, residual: r0.abs() })
    }

    /// Illinois false position on a sign-changing bracket.
    fn refine(
        f: &mut impl FnMut(f64) -> Result<f64>,
        mut a: f64,
        mut fa: f64,
        mut b: f64,
        mut fb: f64,
        scale: f64,
    ) -> Result<f64> {
        let mut side = 0i8;
        for _ in 0..ROOT_MAX_ITERS {
            let c = if fa == fb { 0.5 * (a + b) } else { (a * fb - b * fa) / (fb - fa) };
            let c = if c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
            let fc = f(c)?;
            if fc == 0.0 || (b - a).abs() < ROOT_TOL * scale {
                return Ok(c);
            }
            if fc.signum() == fb.signum() {
                b = c;
                fb = fc;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            } else {
                a = c;
                fa = fc;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            }
        }
        Ok(0.5 * (a + b))
    }
}

impl ObjectiveLearningAlgorithm for RegressionAlgorithm {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn gamma_grid(&self) -> Vec<Hyper> {
        self.grid.iter().map(|s| vec![s.lambda, s.alpha]).collect()
    }

    fn fit_inner(&self, gamma: &Hyper, train: &[Point]) -> Result<DVector<f64>> {
        let spec = Self::spec(gamma)?;
        if train.is_empty() || train[0].len() < 2 {
            return Err(NeuError::Data("regression needs points with at least one regressor and a response".into()));
        }
        let (x, y) = Self::split(train);
        let (n, p) = x.shape();
        if spec.lambda == 0.0 {
            if p == 1 {
                // simple regression in closed form
                let mx = x.column(0).mean();
                let my = y.mean();
                let sxx: f64 = x.column(0).iter().map(|v| (v - mx).powi(2)).sum();
                let sxy: f64 = x.column(0).iter().zip(y.iter()).map(|(a, b)| (a - mx) * (b - my)).sum();
                if !(sxx > 1e-24 * n as f64 * mx.abs().max(1.0).powi(2)) {
                    return Err(NeuError::RankDeficient("regressor is constant".into()));
                }
                let slope = sxy / sxx;
                return Ok(DVector::from_vec(vec![my - slope * mx, slope]));
            }
            let mut design = DMatrix::from_element(n, p + 1, 1.0);
            design.view_mut((0, 1), (n, p)).copy_from(&x);
            return lstsq(&design, &y);
        }
        let opts = EnetOptions { fit_intercept: true, standardize: self.standardize, ..Default::default() };
        let fit = enet_fit(&x, &y, &spec, &opts)?;
        let mut beta = DVector::zeros(p + 1);
        beta[0] = fit.intercept;
        beta.rows_mut(1, p).copy_from(&fit.coefficients);
        Ok(beta)
    }

    fn loss_in(&self, beta: &DVector<f64>, gamma: &Hyper, train: &[Point]) -> f64 {
        let rss: f64 = train.iter().map(|z| (z - self.pattern(beta, z)).norm_squared()).sum();
        match Self::spec(gamma) {
            Ok(s) if s.lambda > 0.0 => {
                let slopes = beta.rows(1, beta.len() - 1);
                rss + s.lambda * ((1.0 - s.alpha) * slopes.lp_norm(1) + s.alpha * slopes.norm_squared())
            }
            Ok(_) => rss,
            Err(_) => f64::INFINITY,
        }
    }

    fn pattern(&self, beta: &DVector<f64>, z: &Point) -> Point {
        let d = z.len();
        let mut out = z.clone();
        out[d - 1] = Self::line(beta, &z.as_slice()[..d - 1]);
        out
    }

    fn inner_diagnostic(&self, gamma: &Hyper, train: &[Point]) -> InnerDiagnostic {
        if train.len() < 2 || train[0].len() < 2 {
            return InnerDiagnostic { gamma: gamma.clone(), condition: Some(f64::INFINITY), eigengap: None };
        }
        let (x, _) = Self::split(train);
        let (n, p) = x.shape();
        let mut design = DMatrix::from_element(n, p + 1, 1.0);
        design.view_mut((0, 1), (n, p)).copy_from(&x);
        // the geometric line of best fit through the graph points needs a strict top eigengap
        let raw = rows_to_matrix(train);
        let q = center_columns(&raw, &column_means(&raw));
        let (vals, _) = sym_eigen_desc(&(q.transpose() * &q));
        let lead = vals[0].abs().max(f64::MIN_POSITIVE);
        InnerDiagnostic {
            gamma: gamma.clone(),
            condition: Some(condition_number(&design)),
            eigengap: Some((vals[0] - vals[1]) / lead),
        }
    }

    /// `input` holds the regressors only; the result holds the response.
    fn upgraded_predict(&self, chain: &ReconfigChain, beta: &DVector<f64>, input: &Point) -> Result<Point> {
        let d = input.len() + 1;
        if chain.dim() != d {
            return Err(NeuError::DimensionMismatch { expected: chain.dim() - 1, got: input.len() });
        }
        let mut start = Point::zeros(d);
        start.rows_mut(0, d - 1).copy_from(input);
        start[d - 1] = Self::line(beta, input.as_slice());
        // the deconfigured point on the fitted line is a good first guess
        let guess = chain
            .deconfigure(&start)
            .map(|p| p[d - 1])
            .ok()
            .filter(|g| g.is_finite())
            .unwrap_or(start[d - 1]);
        let y = Self::solve_response(chain, beta, input.as_slice(), guess)?;
        Ok(Point::from_element(1, y))
    }

    fn upgraded_fitted(&self, chain: &ReconfigChain, beta: &DVector<f64>, z: &Point) -> Result<Point> {
        let d = z.len();
        let x = z.rows(0, d - 1).into_owned();
        let y = self.upgraded_predict(chain, beta, &x)?[0];
        let mut out = z.clone();
        out[d - 1] = y;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Family, RdrTheta, SkewMatrix, Theta};

    #[test]
    fn simple_regression_matches_lstsq() {
        let pts: Vec<Point> =
            (0..15).map(|i| Point::from_vec(vec![i as f64 * 0.3, (i as f64).sin() + 0.5 * i as f64])).collect();
        let ola = RegressionAlgorithm::ols();
        let fast = ola.fit_inner(&vec![0.0, 1.0], &pts).unwrap();
        let (x, y) = RegressionAlgorithm::split(&pts);
        let mut design = DMatrix::from_element(15, 2, 1.0);
        design.view_mut((0, 1), (15, 1)).copy_from(&x);
        let oracle = lstsq(&design, &y).unwrap();
        assert!((fast - oracle).amax() < 1e-12);
    }

    #[test]
    fn empty_chain_predicts_the_line() {
        let beta = DVector::from_vec(vec![0.5, 2.0]);
        let chain = ReconfigChain::new(Family::Rdr, 2).unwrap();
        let y = RegressionAlgorithm::ols().upgraded_predict(&chain, &beta, &Point::from_vec(vec![0.25])).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prediction_lies_on_the_deconfigured_line() {
        let beta = DVector::from_vec(vec![0.2, 0.5]);
        let theta = RdrTheta::new(Point::from_vec(vec![0.5, 0.45]), 0.3, SkewMatrix::plane(2, 0, 1, 4.0)).unwrap();
        let chain = ReconfigChain::from_thetas(Family::Rdr, 2, vec![Theta::Rdr(theta)]).unwrap();
        let ola = RegressionAlgorithm::ols();
        for k in 0..11 {
            let x = k as f64 / 10.0;
            let y = ola.upgraded_predict(&chain, &beta, &Point::from_vec(vec![x])).unwrap()[0];
            let w = chain.reconfigure(&Point::from_vec(vec![x, y])).unwrap();
            assert!((w[1] - RegressionAlgorithm::line(&beta, &[w[0]])).abs() < 1e-10);
        }
    }
}
