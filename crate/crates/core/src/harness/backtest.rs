//! Rolling-window regression backtests on price series.

use std::io::{Read, Write};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::bca::{bca_interval, BcaSpec, Interval};
use crate::baselines::EnetSpec;
use crate::error::{NeuError, Result};
use crate::geometry::{Family, Point};
use crate::learning::{optimal_evaluation_on, Evaluation, ObjectiveLearningAlgorithm, RegressionAlgorithm};
use crate::neu::{neu_fit, refit_with_chain, NeuConfig};
use crate::reconfig::ReconfigChain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSpec {
    pub train_len: usize,
    pub validation_len: usize,
    pub test_len: usize,
    pub stride: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { train_len: 200, validation_len: 10, test_len: 5, stride: 5 }
    }
}

impl WindowSpec {
    pub fn span(&self) -> usize {
        self.train_len + self.validation_len + self.test_len
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_len == 0 || self.validation_len == 0 || self.test_len == 0 || self.stride == 0 {
            return Err(NeuError::Config("window lengths and stride must be positive".into()));
        }
        Ok(())
    }

    /// Number of windows over `rows` observations.
    pub fn count(&self, rows: usize) -> usize {
        if rows < self.span() {
            0
        } else {
            (rows - self.span()) / self.stride + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub dates: Vec<String>,
    pub names: Vec<String>,
    /// One row per date.
    pub prices: Vec<Vec<f64>>,
}

/// Reads a headed CSV: a date column followed by price columns.
pub fn read_prices<R: Read>(reader: R) -> Result<PriceTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.len() < 2 {
        return Err(NeuError::Data("need a date column and at least one price column".into()));
    }
    let mut dates = Vec::new();
    let mut prices = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(NeuError::Data(format!("row {} has {} fields, expected {}", row + 2, record.len(), header.len())));
        }
        dates.push(record[0].to_string());
        let values = record
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|_| NeuError::Data(format!("row {}: '{cell}' is not a number", row + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        prices.push(values);
    }
    Ok(PriceTable { dates, names: header[1..].to_vec(), prices })
}

/// Simple returns `(S_t - S_{t-1}) / S_{t-1}` per column.
pub fn simple_returns(prices: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    prices
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(&a, &b)| {
                    if a == 0.0 {
                        Err(NeuError::Data("zero price makes returns undefined".into()))
                    } else {
                        Ok((b - a) / a)
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BacktestMethod {
    Ols,
    Enet,
    NeuOls,
}

impl std::fmt::Display for BacktestMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BacktestMethod::Ols => "OLS",
            BacktestMethod::Enet => "ENET",
            BacktestMethod::NeuOls => "NEU-OLS",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    pub window: WindowSpec,
    pub methods: Vec<BacktestMethod>,
    pub enet_grid: Vec<EnetSpec>,
    pub neu: NeuConfig,
    pub bca: BcaSpec,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        let mut enet_grid = Vec::new();
        for &lambda in &[1e-6, 1e-5, 1e-4, 1e-3, 1e-2] {
            for &alpha in &[0.0, 0.5, 1.0] {
                enet_grid.push(EnetSpec { lambda, alpha });
            }
        }
        Self {
            window: WindowSpec::default(),
            methods: vec![BacktestMethod::Ols, BacktestMethod::Enet, BacktestMethod::NeuOls],
            enet_grid,
            neu: NeuConfig { max_iters: 20, proposals_per_iter: 50, ..NeuConfig::default() },
            bca: BcaSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowResult {
    pub start: usize,
    pub coefficients: Vec<f64>,
    pub test_mse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodBacktest {
    pub method: BacktestMethod,
    pub windows: Vec<WindowResult>,
    pub mean_error: f64,
    pub intervals: Vec<Interval>,
    /// Summed per-window fitting time.
    pub runtime_secs: f64,
    /// One-time chain learning (NEU only).
    pub learning_secs: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestReport {
    pub target: String,
    pub windows: usize,
    pub methods: Vec<MethodBacktest>,
}

fn graph_points(returns: &[Vec<f64>]) -> Vec<Point> {
    returns
        .iter()
        .map(|r| {
            let mut v: Vec<f64> = r[1..].to_vec();
            v.push(r[0]);
            Point::from_vec(v)
        })
        .collect()
}

fn test_mse(ola: &RegressionAlgorithm, chain: &ReconfigChain, beta: &DVector<f64>, test: &[Point]) -> Result<f64> {
    let d = test[0].len();
    let mut sse = 0.0;
    for z in test {
        let x = Point::from_iterator(d - 1, z.iter().take(d - 1).copied());
        let y = ola.upgraded_predict(chain, beta, &x)?[0];
        sse += (y - z[d - 1]).powi(2);
    }
    Ok(sse / test.len() as f64)
}

/// Minimum-norm least squares for windows whose regressors are degenerate.
fn min_norm_evaluation(train: &[Point]) -> Result<Evaluation> {
    let d = train[0].len();
    let design = DMatrix::from_fn(train.len(), d, |i, j| if j == 0 { 1.0 } else { train[i][j - 1] });
    let y = DVector::from_iterator(train.len(), train.iter().map(|z| z[d - 1]));
    let beta = design.clone().svd(true, true).solve(&y, 1e-12).map_err(|e| NeuError::Numerical(e.to_string()))?;
    let rss = (&y - &design * &beta).norm_squared();
    Ok(Evaluation {
        beta_hat: beta,
        gamma_hat: vec![0.0, 1.0],
        gamma_index: 0,
        loss_in_at_opt: rss,
        loss_out_at_opt: f64::NAN,
        ties: vec![],
    })
}

/// Regresses the first column's returns on the others in rolling windows.
pub fn rolling_window_backtest(table: &PriceTable, config: &BacktestConfig) -> Result<BacktestReport> {
    let w = config.window;
    w.validate()?;
    if table.names.len() < 2 {
        return Err(NeuError::Data("need a target and at least one regressor column".into()));
    }
    let returns = simple_returns(&table.prices)?;
    let windows = w.count(returns.len());
    if windows == 0 {
        return Err(NeuError::Data(format!(
            "{} price rows give {} returns, a window needs {}",
            table.prices.len(),
            returns.len(),
            w.span()
        )));
    }
    let points = graph_points(&returns);
    let dim = points[0].len();
    let slices = |s: usize| {
        let a = s + w.train_len;
        let b = a + w.validation_len;
        (&points[s..a], &points[a..b], &points[b..b + w.test_len])
    };

    let mut methods = Vec::new();
    for &method in &config.methods {
        let mut runtime = 0.0;
        let mut learning_secs = None;
        let (ola, chain) = match method {
            BacktestMethod::Ols => (RegressionAlgorithm::ols(), ReconfigChain::new(Family::Rdr, dim)?),
            BacktestMethod::Enet => (RegressionAlgorithm::enet(config.enet_grid.clone()), ReconfigChain::new(Family::Rdr, dim)?),
            BacktestMethod::NeuOls => {
                let ola = RegressionAlgorithm::ols();
                let (train, val, _) = slices(0);
                let ds = crate::learning::Dataset::new(train.to_vec(), val.to_vec(), None)?;
                let start = Instant::now();
                let fit = neu_fit(&ola, &ds, Family::Rdr, &config.neu)?;
                learning_secs = Some(start.elapsed().as_secs_f64());
                (ola, fit.chain)
            }
        };
        let mut results = Vec::with_capacity(windows);
        for k in 0..windows {
            let s = k * w.stride;
            let (train, val, test) = slices(s);
            let start = Instant::now();
            let ev = if chain.is_empty() {
                match optimal_evaluation_on(&ola, train, val) {
                    Err(NeuError::RankDeficient(_) | NeuError::Evaluation(_)) => min_norm_evaluation(train)?,
                    other => other?,
                }
            } else {
                let ds = crate::learning::Dataset::new(train.to_vec(), val.to_vec(), None)?;
                refit_with_chain(&ola, &chain, &ds)?
            };
            runtime += start.elapsed().as_secs_f64();
            let mse = test_mse(&ola, &chain, &ev.beta_hat, test)?;
            results.push(WindowResult { start: s, coefficients: ev.beta_hat.iter().copied().collect(), test_mse: mse });
        }
        let errors: Vec<f64> = results.iter().map(|r| r.test_mse).collect();
        let mean_error = errors.iter().sum::<f64>() / errors.len() as f64;
        let intervals = if errors.len() >= 10 {
            config
                .bca
                .levels
                .iter()
                .map(|&l| bca_interval(&errors, l, config.bca.resamples, config.bca.seed))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        methods.push(MethodBacktest { method, windows: results, mean_error, intervals, runtime_secs: runtime, learning_secs });
    }
    Ok(BacktestReport { target: table.names[0].clone(), windows, methods })
}

pub fn write_backtest_csv<W: Write>(report: &BacktestReport, timings: bool, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["method", "windows", "mean_error", "low_95", "high_95", "low_99", "high_99"];
    if timings {
        header.extend(["runtime_secs", "learning_secs"]);
    }
    w.write_record(&header)?;
    for m in &report.methods {
        let at = |level: f64| m.intervals.iter().find(|i| (i.level - level).abs() < 1e-12);
        let mut row = vec![m.method.to_string(), m.windows.len().to_string(), m.mean_error.to_string()];
        for level in [0.95, 0.99] {
            match at(level) {
                Some(i) => row.extend([i.low.to_string(), i.high.to_string()]),
                None => row.extend([String::new(), String::new()]),
            }
        }
        if timings {
            row.push(m.runtime_secs.to_string());
            row.push(m.learning_secs.map(|s| s.to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
