//! Simulated regression studies on three nonlinear targets.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bca::{bca_interval, BcaSpec, Interval};
use super::task_rng;
use crate::baselines::loess::DEFAULT_SPAN;
use crate::baselines::pspline::PSplineGrid;
use crate::baselines::{loess_fit_cv, pspline_fit_cv};
use crate::error::{NeuError, Result};
use crate::geometry::{Family, Point};
use crate::learning::{Dataset, ObjectiveLearningAlgorithm, RegressionAlgorithm};
use crate::neu::{neu_fit, CenterLaw, NeuConfig, ThetaSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    M1,
    M2,
    M3,
}

impl Target {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Target::M1 => (-1.0 / ((x + 1.0) * (x + 1.0))).exp().min(x + x.cos()),
            Target::M2 => (-x).exp().cos(),
            Target::M3 => f64::from(u8::from(x < 0.5)),
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Target::M1 => "m1",
            Target::M2 => "m2",
            Target::M3 => "m3",
        })
    }
}

impl std::str::FromStr for Target {
    type Err = NeuError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m1" => Ok(Target::M1),
            "m2" => Ok(Target::M2),
            "m3" => Ok(Target::M3),
            other => Err(NeuError::Config(format!("unknown target '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSpec {
    pub target: Target,
    pub sigma: f64,
    pub n: usize,
    pub interval: (f64, f64),
    pub strata: usize,
    pub per_stratum: usize,
    /// Points per stratum held out of the training subset for early stopping.
    pub holdout_per_stratum: usize,
    pub seed: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            target: Target::M1,
            sigma: 0.1,
            n: 1000,
            interval: (-3.0, 3.0),
            strata: 5,
            per_stratum: 20,
            holdout_per_stratum: 4,
            seed: 0,
        }
    }
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) {
            return Err(NeuError::Config(format!("noise scale must be non-negative, got {}", self.sigma)));
        }
        if self.n < 10 {
            return Err(NeuError::Config(format!("need at least 10 observations, got {}", self.n)));
        }
        if !(self.interval.0 < self.interval.1) || self.strata == 0 || self.per_stratum == 0 {
            return Err(NeuError::Config("empty sampling interval or strata".into()));
        }
        if self.holdout_per_stratum >= self.per_stratum {
            return Err(NeuError::Config("holdout must leave training points in every stratum".into()));
        }
        Ok(())
    }
}

/// Simulated sample, normalized to the unit square.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Simulation {
    pub raw_x: Vec<f64>,
    pub raw_y: Vec<f64>,
    pub points: Vec<Point>,
    /// Indices of the stratified training subset.
    pub train: Vec<usize>,
    /// Subset of `train` held out for early stopping.
    pub holdout: Vec<usize>,
    pub test: Vec<usize>,
}

impl Simulation {
    pub fn xs(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.points[i][0]).collect()
    }

    pub fn ys(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.points[i][1]).collect()
    }

    /// Fitting part of the training subset, its holdout, and the test set.
    pub fn neu_dataset(&self) -> Result<Dataset> {
        let fit: Vec<Point> =
            self.train.iter().filter(|i| !self.holdout.contains(i)).map(|&i| self.points[i].clone()).collect();
        let val = self.holdout.iter().map(|&i| self.points[i].clone()).collect();
        let test = self.test.iter().map(|&i| self.points[i].clone()).collect();
        Dataset::new(fit, val, Some(test))
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Draws `y = m(x) + sigma e` on the interval and marks a stratified subset.
pub fn generate_simulation(spec: &SimulationSpec) -> Result<Simulation> {
    spec.validate()?;
    let mut rng = task_rng(spec.seed, 0);
    let (a, b) = spec.interval;
    let raw_x: Vec<f64> = (0..spec.n).map(|_| a + (b - a) * rng.random::<f64>()).collect();
    let raw_y: Vec<f64> = raw_x
        .iter()
        .map(|&x| {
            let e: f64 = rng.sample(StandardNormal);
            spec.target.eval(x) + spec.sigma * e
        })
        .collect();
    let (xlo, xhi) = min_max(&raw_x);
    let (ylo, yhi) = min_max(&raw_y);
    let xs = (xhi - xlo).max(f64::MIN_POSITIVE);
    let ys = (yhi - ylo).max(f64::MIN_POSITIVE);
    let points: Vec<Point> = raw_x
        .iter()
        .zip(&raw_y)
        .map(|(&x, &y)| Point::from_vec(vec![(x - xlo) / xs, (y - ylo) / ys]))
        .collect();

    let width = (b - a) / spec.strata as f64;
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for s in 0..spec.strata {
        let mut members: Vec<usize> = (0..spec.n)
            .filter(|&i| (((raw_x[i] - a) / width).floor() as usize).min(spec.strata - 1) == s)
            .collect();
        members.shuffle(&mut rng);
        members.truncate(spec.per_stratum);
        let h = spec.holdout_per_stratum.min(members.len().saturating_sub(1));
        holdout.extend_from_slice(&members[..h]);
        train.extend(members);
    }
    train.sort_unstable();
    holdout.sort_unstable();
    let test: Vec<usize> = (0..spec.n).filter(|i| train.binary_search(i).is_err()).collect();
    Ok(Simulation { raw_x, raw_y, points, train, holdout, test })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMethod {
    NeuOls,
    PSplines,
    Loess,
}

impl SimMethod {
    pub const ALL: [SimMethod; 3] = [SimMethod::NeuOls, SimMethod::PSplines, SimMethod::Loess];
}

impl std::fmt::Display for SimMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SimMethod::NeuOls => "NEU-OLS",
            SimMethod::PSplines => "p-splines",
            SimMethod::Loess => "LOESS",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimStudyConfig {
    pub family: Family,
    pub neu: NeuConfig,
    pub pspline_grid: PSplineGrid,
    pub loess_span: f64,
    pub folds: usize,
    /// Refit the regression on the whole training subset, holdout included,
    /// once the chain is fixed.
    pub refit_full: bool,
}

impl Default for SimStudyConfig {
    fn default() -> Self {
        Self {
            family: Family::MicroBump,
            neu: NeuConfig {
                max_iters: 100,
                proposals_per_iter: 20,
                gate_candidates: 4,
                refine_evals: 50,
                sampler: ThetaSampler {
                    center_law: CenterLaw::DataPoints,
                    radius_floor: 20.0,
                    scale: 0.5,
                    ..ThetaSampler::default()
                },
                ..NeuConfig::default()
            },
            pspline_grid: PSplineGrid::default(),
            loess_span: DEFAULT_SPAN,
            folds: 4,
            refit_full: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: SimMethod,
    pub mse: f64,
    pub intervals: Vec<Interval>,
    pub runtime_secs: f64,
    /// Accepted deformations (NEU only).
    pub chain_len: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub target: Target,
    pub sigma: f64,
    pub seed: u64,
    pub results: Vec<MethodResult>,
}

impl StudyReport {
    pub fn mse(&self, method: SimMethod) -> Option<f64> {
        self.results.iter().find(|r| r.method == method).map(|r| r.mse)
    }
}

/// Test-set predictions of one method on a simulation.
pub fn predict_method(
    sim: &Simulation,
    method: SimMethod,
    config: &SimStudyConfig,
    seed: u64,
) -> Result<(Vec<f64>, Option<usize>)> {
    let test_x = sim.xs(&sim.test);
    match method {
        SimMethod::NeuOls => {
            let ds = sim.neu_dataset()?;
            let ola = RegressionAlgorithm::ols();
            let neu = NeuConfig { seed, ..config.neu.clone() };
            let fit = neu_fit(&ola, &ds, config.family, &neu)?;
            let beta = if config.refit_full {
                let all: Vec<Point> = sim.train.iter().map(|&i| sim.points[i].clone()).collect();
                ola.fit_inner(&fit.evaluation.gamma_hat, &fit.chain.reconfigure_all(&all)?)?
            } else {
                fit.evaluation.beta_hat.clone()
            };
            let preds = test_x
                .par_iter()
                .map(|&x| ola.upgraded_predict(&fit.chain, &beta, &Point::from_vec(vec![x])).map(|p| p[0]))
                .collect::<Result<Vec<f64>>>()?;
            Ok((preds, Some(fit.chain.len())))
        }
        SimMethod::PSplines => {
            let model = pspline_fit_cv(&sim.xs(&sim.train), &sim.ys(&sim.train), &config.pspline_grid)?;
            Ok((model.predict_all(&test_x), None))
        }
        SimMethod::Loess => {
            let model = loess_fit_cv(&sim.xs(&sim.train), &sim.ys(&sim.train), config.loess_span, config.folds)?;
            Ok((model.predict_all(&test_x)?, None))
        }
    }
}

/// Test-set MSE, BCa intervals of the squared errors and runtime per method.
pub fn run_sim_study(
    spec: &SimulationSpec,
    methods: &[SimMethod],
    bca: &BcaSpec,
    config: &SimStudyConfig,
) -> Result<StudyReport> {
    if methods.is_empty() {
        return Err(NeuError::Config("no methods requested".into()));
    }
    bca.validate()?;
    let sim = generate_simulation(spec)?;
    let test_y = sim.ys(&sim.test);
    let mut results = Vec::with_capacity(methods.len());
    for (k, &method) in methods.iter().enumerate() {
        let start = Instant::now();
        let (preds, chain_len) = predict_method(&sim, method, config, spec.seed ^ config.neu.seed)?;
        let runtime_secs = start.elapsed().as_secs_f64();
        let sq: Vec<f64> = preds.iter().zip(&test_y).map(|(p, y)| (p - y) * (p - y)).collect();
        let mse = sq.iter().sum::<f64>() / sq.len().max(1) as f64;
        let intervals = bca
            .levels
            .iter()
            .map(|&l| bca_interval(&sq, l, bca.resamples, bca.seed.wrapping_add(k as u64)))
            .collect::<Result<Vec<_>>>()?;
        results.push(MethodResult { method, mse, intervals, runtime_secs, chain_len });
    }
    Ok(StudyReport { target: spec.target, sigma: spec.sigma, seed: spec.seed, results })
}

/// Writes one row per method; runtimes are left out unless `timings` is set.
pub fn write_study_csv<W: Write>(reports: &[StudyReport], timings: bool, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let levels: Vec<f64> = reports
        .first()
        .and_then(|r| r.results.first())
        .map(|m| m.intervals.iter().map(|i| i.level).collect())
        .unwrap_or_default();
    let mut header = vec!["target".to_string(), "sigma".into(), "seed".into(), "method".into(), "mse".into()];
    for l in &levels {
        header.push(format!("low_{l}"));
        header.push(format!("high_{l}"));
    }
    header.push("chain_len".into());
    if timings {
        header.push("runtime_secs".into());
    }
    w.write_record(&header)?;
    for r in reports {
        for m in &r.results {
            let mut row =
                vec![r.target.to_string(), r.sigma.to_string(), r.seed.to_string(), m.method.to_string(), m.mse.to_string()];
            for i in &m.intervals {
                row.push(i.low.to_string());
                row.push(i.high.to_string());
            }
            row.push(m.chain_len.map(|c| c.to_string()).unwrap_or_default());
            if timings {
                row.push(m.runtime_secs.to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_responses_are_exact() {
        let spec = SimulationSpec { sigma: 0.0, target: Target::M2, ..Default::default() };
        let sim = generate_simulation(&spec).unwrap();
        for (x, y) in sim.raw_x.iter().zip(&sim.raw_y) {
            assert_eq!(*y, Target::M2.eval(*x));
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let spec = SimulationSpec { seed: 11, ..Default::default() };
        let a = generate_simulation(&spec).unwrap();
        let b = generate_simulation(&spec).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.train, b.train);
    }

    #[test]
    fn stratified_layout() {
        let sim = generate_simulation(&SimulationSpec::default()).unwrap();
        assert_eq!(sim.train.len(), 100);
        assert_eq!(sim.holdout.len(), 20);
        assert_eq!(sim.test.len(), 900);
        for s in 0..5 {
            let lo = -3.0 + 1.2 * s as f64;
            let count = sim.train.iter().filter(|&&i| sim.raw_x[i] >= lo && sim.raw_x[i] < lo + 1.2).count();
            assert_eq!(count, 20);
        }
        for p in &sim.points {
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn noise_has_zero_mean() {
        let spec = SimulationSpec { n: 100_000, sigma: 1.0, target: Target::M3, ..Default::default() };
        let sim = generate_simulation(&spec).unwrap();
        let n = sim.raw_x.len() as f64;
        let mean = sim.raw_x.iter().zip(&sim.raw_y).map(|(&x, &y)| y - Target::M3.eval(x)).sum::<f64>() / n;
        assert!(mean.abs() < 3.0 / n.sqrt());
    }

    #[test]
    fn target_values() {
        assert_eq!(Target::M3.eval(0.4), 1.0);
        assert_eq!(Target::M3.eval(0.5), 0.0);
        assert!((Target::M2.eval(0.0) - 1f64.cos()).abs() < 1e-15);
        assert!((Target::M1.eval(0.0) - (-1f64).exp()).abs() < 1e-15);
        assert!((Target::M1.eval(-2.0) - (-2.0 + 2f64.cos())).abs() < 1e-15);
    }
}
