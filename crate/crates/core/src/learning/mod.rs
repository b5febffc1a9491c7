//! Objective learning algorithms: a training loss, a validation loss, a
//! finite hyperparameter grid and a pattern function, plus the optimal
//! evaluation and performance functionals built on them.

mod data;
mod pca;
mod regression;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NeuError, Result};
use crate::geometry::Point;
use crate::reconfig::ReconfigChain;

pub use data::{read_points_csv, write_points_csv, Dataset};
pub use pca::PcaAlgorithm;
pub use regression::RegressionAlgorithm;

/// A hyperparameter value; algorithms define the meaning of each slot.
pub type Hyper = Vec<f64>;

/// Inner-problem uniqueness diagnostic for one hyperparameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InnerDiagnostic {
    pub gamma: Hyper,
    /// Condition number of a linear design.
    pub condition: Option<f64>,
    /// Smallest relative gap between the leading eigenvalues of the data
    /// covariance that the fit depends on.
    pub eigengap: Option<f64>,
}

impl InnerDiagnostic {
    pub fn is_regular(&self, tol: &RegularityTolerances) -> bool {
        self.condition.is_none_or(|c| c.is_finite() && c <= tol.max_condition)
            && self.eigengap.is_none_or(|g| g >= tol.min_eigengap)
    }
}

pub trait ObjectiveLearningAlgorithm: Send + Sync {
    fn name(&self) -> String;

    fn gamma_grid(&self) -> Vec<Hyper>;

    /// Minimizer of [`Self::loss_in`] for a fixed hyperparameter.
    fn fit_inner(&self, gamma: &Hyper, train: &[Point]) -> Result<DVector<f64>>;

    fn loss_in(&self, beta: &DVector<f64>, gamma: &Hyper, train: &[Point]) -> f64;

    fn loss_out(&self, beta: &DVector<f64>, gamma: &Hyper, validation: &[Point]) -> f64 {
        let _ = gamma;
        validation.iter().map(|z| (z - self.pattern(beta, z)).norm_squared()).sum()
    }

    /// The model's fitted point for `z`, in the space `z` lives in.
    fn pattern(&self, beta: &DVector<f64>, z: &Point) -> Point;

    fn inner_diagnostic(&self, gamma: &Hyper, train: &[Point]) -> InnerDiagnostic;

    /// Upgraded prediction `chain^-1 . pattern . chain` for an algorithm input.
    fn upgraded_predict(
        &self,
        chain: &ReconfigChain,
        beta: &DVector<f64>,
        input: &Point,
    ) -> Result<Point> {
        let z = chain.reconfigure(input)?;
        chain.deconfigure(&self.pattern(beta, &z))
    }

    /// Upgraded fitted point for a full data point (for supervised algorithms
    /// the response slot of `z` is ignored).
    fn upgraded_fitted(&self, chain: &ReconfigChain, beta: &DVector<f64>, z: &Point) -> Result<Point> {
        self.upgraded_predict(chain, beta, z)
    }
}

/// `sum |z - upgraded_fitted(z)|^2` over `data`, measured in the original space.
pub fn upgraded_loss<A: ObjectiveLearningAlgorithm + ?Sized>(
    ola: &A,
    chain: &ReconfigChain,
    beta: &DVector<f64>,
    data: &[Point],
) -> f64 {
    data.iter()
        .map(|z| match ola.upgraded_fitted(chain, beta, z) {
            Ok(fit) => (z - fit).norm_squared(),
            Err(_) => f64::INFINITY,
        })
        .sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub beta_hat: DVector<f64>,
    pub gamma_hat: Hyper,
    pub gamma_index: usize,
    pub loss_in_at_opt: f64,
    pub loss_out_at_opt: f64,
    /// Grid indices whose validation loss ties with the optimum.
    pub ties: Vec<usize>,
}

/// Relative tolerance for declaring two grid losses tied.
pub const TIE_TOL: f64 = 1e-9;

fn nan_to_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn tied(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= TIE_TOL * a.abs().max(b.abs())
}

pub fn optimal_evaluation<A: ObjectiveLearningAlgorithm + ?Sized>(ola: &A, dataset: &Dataset) -> Result<Evaluation> {
    optimal_evaluation_on(ola, &dataset.train, &dataset.validation)
}

/// Inner fit per grid point, outer selection by validation loss (smallest
/// index wins ties). With no validation data the first grid point is used.
pub fn optimal_evaluation_on<A: ObjectiveLearningAlgorithm + ?Sized>(
    ola: &A,
    train: &[Point],
    validation: &[Point],
) -> Result<Evaluation> {
    let grid = ola.gamma_grid();
    if grid.is_empty() {
        return Err(NeuError::Config("empty hyperparameter grid".into()));
    }
    if train.is_empty() {
        return Err(NeuError::Data("empty training set".into()));
    }
    let grid = if validation.is_empty() { vec![grid[0].clone()] } else { grid };
    let fits: Vec<Option<(DVector<f64>, f64, f64)>> = grid
        .par_iter()
        .map(|gamma| {
            let beta = ola.fit_inner(gamma, train).ok()?;
            let lin = nan_to_inf(ola.loss_in(&beta, gamma, train));
            let lout = nan_to_inf(ola.loss_out(&beta, gamma, validation));
            Some((beta, lin, lout))
        })
        .collect();
    let mut best: Option<usize> = None;
    for (i, f) in fits.iter().enumerate() {
        let Some((_, lin, lout)) = f else { continue };
        if !lin.is_finite() || !lout.is_finite() {
            continue;
        }
        match best {
            Some(b) if fits[b].as_ref().map_or(false, |(_, _, bl)| *bl <= *lout) => {}
            _ => best = Some(i),
        }
    }
    let b = best.ok_or_else(|| NeuError::Evaluation("no hyperparameter gave a finite loss".into()))?;
    let (beta_hat, loss_in_at_opt, loss_out_at_opt) = fits[b].clone().expect("selected fit exists");
    let ties = fits
        .iter()
        .enumerate()
        .filter(|(i, f)| *i != b && f.as_ref().is_some_and(|(_, _, l)| tied(*l, loss_out_at_opt)))
        .map(|(i, _)| i)
        .collect();
    Ok(Evaluation { beta_hat, gamma_hat: grid[b].clone(), gamma_index: b, loss_in_at_opt, loss_out_at_opt, ties })
}

pub fn performance_in<A: ObjectiveLearningAlgorithm + ?Sized>(ola: &A, dataset: &Dataset) -> Result<f64> {
    Ok(-optimal_evaluation(ola, dataset)?.loss_in_at_opt)
}

pub fn performance_out<A: ObjectiveLearningAlgorithm + ?Sized>(ola: &A, dataset: &Dataset) -> Result<f64> {
    Ok(-optimal_evaluation(ola, dataset)?.loss_out_at_opt)
}

#[derive(Debug, Clone, Copy)]
pub struct RegularityTolerances {
    /// Largest acceptable condition number of a linear design.
    pub max_condition: f64,
    /// Smallest acceptable relative eigengap for PCA.
    pub min_eigengap: f64,
    /// Relative tolerance for ties between grid losses.
    pub tie_tol: f64,
}

impl Default for RegularityTolerances {
    fn default() -> Self {
        Self { max_condition: 1e10, min_eigengap: 1e-6, tie_tol: TIE_TOL }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub inner: Vec<InnerDiagnostic>,
    pub inner_regular: bool,
    pub outer_unique: bool,
    pub outer_ties: Vec<usize>,
    pub regular: bool,
}

pub fn regular_domain_check<A: ObjectiveLearningAlgorithm + ?Sized>(
    ola: &A,
    dataset: &Dataset,
    tol: &RegularityTolerances,
) -> RegularityReport {
    let inner: Vec<InnerDiagnostic> =
        ola.gamma_grid().iter().map(|g| ola.inner_diagnostic(g, &dataset.train)).collect();
    let inner_regular = inner.iter().all(|d| d.is_regular(tol));
    let (outer_unique, outer_ties) = match optimal_evaluation(ola, dataset) {
        Ok(ev) => {
            let grid = ola.gamma_grid();
            let ties: Vec<usize> = if dataset.validation.is_empty() {
                vec![]
            } else {
                grid.iter()
                    .enumerate()
                    .filter(|(i, g)| {
                        *i != ev.gamma_index
                            && ola.fit_inner(g, &dataset.train).is_ok_and(|b| {
                                let l = ola.loss_out(&b, g, &dataset.validation);
                                (l - ev.loss_out_at_opt).abs()
                                    <= tol.tie_tol * l.abs().max(ev.loss_out_at_opt.abs())
                            })
                    })
                    .map(|(i, _)| i)
                    .collect()
            };
            (ties.is_empty(), ties)
        }
        Err(_) => (false, vec![]),
    };
    let regular = outer_unique && inner_regular;
    RegularityReport { inner, inner_regular, outer_unique, outer_ties, regular }
}
