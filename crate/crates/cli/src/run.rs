use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use neu_core::baselines::{pca, pca_projection_loss, EnetSpec};
use neu_core::harness::backtest::write_backtest_csv;
use neu_core::harness::pca_study::median_pairwise_distance;
use neu_core::harness::sim::write_study_csv;
use neu_core::harness::{
    pca_study, read_prices, rolling_window_backtest, run_sim_study, synth_yield_curve, task_rng, BacktestConfig,
    BacktestMethod, BcaSpec, PcaStudyConfig, SimMethod, SimStudyConfig, SimulationSpec, Split, StudyReport, Target,
    WindowSpec, YieldCurveParams, DEFAULT_MATURITIES,
};
use neu_core::learning::{optimal_evaluation_on, read_points_csv, Dataset, RegressionAlgorithm};
use neu_core::neu::{neu_fit, DataStats, NeuConfig, ThetaSampler};
use neu_core::universal::{construct_reconfiguration, verify_urp};
use neu_core::{Family, Point, ReconfigChain};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::{
    BacktestArgs, Command, DemoCommand, FitArgs, FitMethod, Format, PcaArgs, ReconfigureArgs, SimArgs, UrpArgs,
};
use crate::output::{merge, strip_keys, Outputs};

pub struct RunContext {
    pub seed: u64,
    pub format: Format,
    pub timings: bool,
    pub overrides: Option<Value>,
}

pub struct Run {
    pub command: String,
    pub config: Value,
    pub outputs: Outputs,
    pub timings: Option<Value>,
}

const TIMING_KEYS: [&str; 2] = ["runtime_secs", "learning_secs"];

pub fn load_overrides(path: Option<&Path>) -> Result<Option<Value>> {
    path.map(|p| {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        if !value.is_object() {
            bail!("{} must hold a JSON object", p.display());
        }
        Ok(value)
    })
    .transpose()
}

fn effective<T: Serialize + DeserializeOwned>(from_flags: T, overrides: &Option<Value>) -> Result<T> {
    let Some(patch) = overrides else { return Ok(from_flags) };
    let mut base = serde_json::to_value(&from_flags)?;
    merge(&mut base, patch.clone());
    serde_json::from_value(base).context("applying --config")
}

fn read_points(path: &Path) -> Result<(Vec<String>, Vec<Point>)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (header, points) = read_points_csv(file).with_context(|| format!("reading {}", path.display()))?;
    if points.is_empty() {
        bail!("{} has no rows", path.display());
    }
    Ok((header, points))
}

fn points_table(header: &[String], points: &[Point], format: Format) -> Result<(String, Vec<u8>)> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(header)?;
            for p in points {
                w.write_record(p.iter().map(f64::to_string))?;
            }
            Ok(("points.csv".into(), w.into_inner()?))
        }
        Format::Json => {
            let rows: Vec<Vec<f64>> = points.iter().map(|p| p.iter().copied().collect()).collect();
            let mut bytes = serde_json::to_vec_pretty(&json!({ "columns": header, "rows": rows }))?;
            bytes.push(b'\n');
            Ok(("points.json".into(), bytes))
        }
    }
}

pub fn dispatch(command: Command, ctx: &RunContext) -> Result<Run> {
    match command {
        Command::Demo(DemoCommand::Reconfigure(a)) => demo_reconfigure(a, ctx),
        Command::Fit(a) => fit(a, ctx),
        Command::Pca(a) => pca_table(a, ctx),
        Command::NeuPca(a) => neu_pca(a, ctx),
        Command::SimStudy(a) => sim_study(a, ctx),
        Command::Backtest(a) => backtest(a, ctx),
        Command::UrpCheck(a) => urp_check(a, ctx),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ReconfigureConfig {
    points: PathBuf,
    chain: Option<PathBuf>,
    invert: bool,
    family: Family,
    steps: usize,
    sampler: ThetaSampler,
}

fn random_chain(family: Family, steps: usize, sampler: &ThetaSampler, points: &[Point], seed: u64) -> Result<ReconfigChain> {
    let stats = DataStats::from_points(points)?;
    let mut rng = task_rng(seed, 0);
    let mut chain = ReconfigChain::new(family, points[0].len())?;
    for i in 0..steps {
        chain = chain.append(sampler.propose(family, &mut rng, &stats, i + 1))?;
    }
    Ok(chain)
}

fn demo_reconfigure(a: ReconfigureArgs, ctx: &RunContext) -> Result<Run> {
    let config = effective(
        ReconfigureConfig {
            points: a.points,
            chain: a.chain,
            invert: a.invert,
            family: a.family.into(),
            steps: a.steps,
            sampler: ThetaSampler::default(),
        },
        &ctx.overrides,
    )?;
    let (header, points) = read_points(&config.points)?;
    let chain = match &config.chain {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ReconfigChain::from_json(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => random_chain(config.family, config.steps, &config.sampler, &points, ctx.seed)?,
    };
    if chain.dim() != points[0].len() {
        bail!("chain acts on dimension {} but points have {} columns", chain.dim(), points[0].len());
    }
    let moved = if config.invert { chain.deconfigure_all(&points)? } else { chain.reconfigure_all(&points)? };
    let mut outputs = Outputs::default();
    outputs.add("chain.json", format!("{}\n", chain.to_json()?).into_bytes());
    let (name, bytes) = points_table(&header, &moved, ctx.format)?;
    outputs.add(name, bytes);
    outputs.json(
        "report.json",
        &json!({
            "points": points.len(),
            "chain_len": chain.len(),
            "inverted": config.invert,
            "roundtrip_error": chain.roundtrip_error(&points),
        }),
    )?;
    Ok(Run { command: "demo reconfigure".into(), config: serde_json::to_value(&config)?, outputs, timings: None })
}

#[derive(Debug, Serialize, Deserialize)]
struct FitConfig {
    method: String,
    data: PathBuf,
    response: Option<String>,
    lambda: Vec<f64>,
    alpha: Vec<f64>,
    validation: f64,
    family: Family,
    neu: NeuConfig,
}

#[derive(Serialize)]
struct CoefficientRow {
    term: String,
    value: f64,
}

fn fit(a: FitArgs, ctx: &RunContext) -> Result<Run> {
    let method = match a.method {
        FitMethod::NeuOls => "neu-ols",
        FitMethod::Ols => "ols",
        FitMethod::Ridge => "ridge",
        FitMethod::Lasso => "lasso",
        FitMethod::Enet => "enet",
    };
    let config = effective(
        FitConfig {
            method: method.into(),
            data: a.data,
            response: a.response,
            lambda: a.lambda,
            alpha: a.alpha,
            validation: a.validation,
            family: a.family.into(),
            neu: NeuConfig { max_iters: a.max_iters, proposals_per_iter: a.proposals, seed: ctx.seed, ..NeuConfig::default() },
        },
        &ctx.overrides,
    )?;
    if !(0.0..1.0).contains(&config.validation) {
        bail!("validation fraction must lie in [0, 1), got {}", config.validation);
    }
    let (header, rows) = read_points(&config.data)?;
    if header.len() < 2 {
        bail!("need at least one regressor and a response column");
    }
    let response = match &config.response {
        Some(name) => header.iter().position(|h| h == name).with_context(|| format!("no column named '{name}'"))?,
        None => header.len() - 1,
    };
    let order: Vec<usize> = (0..header.len()).filter(|&j| j != response).chain([response]).collect();
    let points: Vec<Point> = rows.iter().map(|p| Point::from_iterator(order.len(), order.iter().map(|&j| p[j]))).collect();
    let n_val = (config.validation * points.len() as f64).round() as usize;
    if n_val >= points.len() {
        bail!("validation fraction leaves no training rows");
    }
    let (train, validation) = points.split_at(points.len() - n_val);

    let grid = |f: fn(f64) -> EnetSpec| config.lambda.iter().map(|&l| f(l)).collect::<Vec<_>>();
    let ola = match config.method.as_str() {
        "ols" | "neu-ols" => RegressionAlgorithm::ols(),
        "ridge" => RegressionAlgorithm { label: "ridge".into(), grid: grid(EnetSpec::ridge), standardize: false },
        "lasso" => RegressionAlgorithm { label: "lasso".into(), grid: grid(EnetSpec::lasso), standardize: false },
        "enet" => {
            let mut specs = Vec::new();
            for &lambda in &config.lambda {
                for &alpha in &config.alpha {
                    specs.push(EnetSpec::new(lambda, alpha)?);
                }
            }
            RegressionAlgorithm::enet(specs)
        }
        other => bail!("unknown fit method '{other}'"),
    };
    for spec in &ola.grid {
        EnetSpec::new(spec.lambda, spec.alpha)?;
    }
    if ola.grid.is_empty() {
        bail!("empty hyperparameter grid");
    }

    let mut outputs = Outputs::default();
    let start = Instant::now();
    let (evaluation, chain_len) = if config.method == "neu-ols" {
        let ds = Dataset::new(train.to_vec(), validation.to_vec(), None)?;
        let result = neu_fit(&ola, &ds, config.family, &config.neu)?;
        outputs.add("neu.json", format!("{}\n", result.to_json()?).into_bytes());
        let mut history = Vec::new();
        result.write_history_csv(&mut history)?;
        outputs.add("history.csv", history);
        (result.evaluation.clone(), Some(result.chain.len()))
    } else {
        (optimal_evaluation_on(&ola, train, validation)?, None)
    };
    let elapsed = start.elapsed().as_secs_f64();

    let mut terms = vec!["intercept".to_string()];
    terms.extend(order[..order.len() - 1].iter().map(|&j| header[j].clone()));
    let coefficients: Vec<CoefficientRow> =
        terms.iter().zip(evaluation.beta_hat.iter()).map(|(t, &v)| CoefficientRow { term: t.clone(), value: v }).collect();
    outputs.table("coefficients", &coefficients, ctx.format)?;
    outputs.json(
        "fit.json",
        &json!({
            "method": config.method,
            "response": header[response],
            "train_rows": train.len(),
            "validation_rows": validation.len(),
            "gamma": { "lambda": evaluation.gamma_hat[0], "alpha": evaluation.gamma_hat[1] },
            "gamma_index": evaluation.gamma_index,
            "ties": evaluation.ties,
            "train_loss": evaluation.loss_in_at_opt,
            "validation_loss": evaluation.loss_out_at_opt,
            "chain_len": chain_len,
            "coefficients": evaluation.beta_hat.iter().collect::<Vec<_>>(),
        }),
    )?;
    let timings = ctx.timings.then(|| json!({ "fit_secs": elapsed }));
    Ok(Run { command: format!("fit {}", config.method), config: serde_json::to_value(&config)?, outputs, timings })
}

#[derive(Debug, Serialize, Deserialize)]
struct PcaConfig {
    data: Option<PathBuf>,
    days: usize,
    maturities: Vec<f64>,
    yield_curve: YieldCurveParams,
    study: PcaStudyConfig,
}

fn pca_config(a: PcaArgs, ctx: &RunContext) -> Result<PcaConfig> {
    let defaults = PcaStudyConfig::default();
    effective(
        PcaConfig {
            data: a.data,
            days: a.days,
            maturities: DEFAULT_MATURITIES.to_vec(),
            yield_curve: YieldCurveParams::default(),
            study: PcaStudyConfig {
                split: Split { train: a.train, validation: a.validation, test: a.test },
                k_max: a.k_max,
                neu: NeuConfig { max_iters: a.max_iters, proposals_per_iter: a.proposals, seed: ctx.seed, ..defaults.neu },
                kernel_sigma: a.kernel_sigma,
            },
        },
        &ctx.overrides,
    )
}

fn pca_data(config: &PcaConfig, seed: u64) -> Result<Vec<Point>> {
    match &config.data {
        Some(p) => Ok(read_points(p)?.1),
        None => Ok(synth_yield_curve(config.days, &config.maturities, &config.yield_curve, seed)?),
    }
}

#[derive(Serialize)]
struct PcaTableRow {
    factors: usize,
    explained: f64,
    cumulative: f64,
    train_loss: f64,
    test_loss: f64,
}

fn pca_table(a: PcaArgs, ctx: &RunContext) -> Result<Run> {
    let config = pca_config(a, ctx)?;
    let data = pca_data(&config, ctx.seed)?;
    let s = config.study.split;
    if data.len() < s.train + s.validation + s.test {
        bail!("{} rows, split needs {}", data.len(), s.train + s.validation + s.test);
    }
    let train = &data[..s.train];
    let test = &data[s.train + s.validation..s.train + s.validation + s.test];
    let model = pca(train, config.study.k_max)?;
    let rows = (1..=config.study.k_max)
        .map(|k| {
            Ok(PcaTableRow {
                factors: k,
                explained: model.explained[k - 1],
                cumulative: model.cumulative_explained(k),
                train_loss: pca_projection_loss(&model, k, train)?,
                test_loss: pca_projection_loss(&model, k, test)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut outputs = Outputs::default();
    outputs.table("pca", &rows, ctx.format)?;
    Ok(Run { command: "pca".into(), config: serde_json::to_value(&config)?, outputs, timings: None })
}

fn neu_pca(a: PcaArgs, ctx: &RunContext) -> Result<Run> {
    let config = pca_config(a, ctx)?;
    let data = pca_data(&config, ctx.seed)?;
    let start = Instant::now();
    let study = pca_study(&data, &config.study)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut outputs = Outputs::default();
    outputs.table("neu_pca", &study.rows, ctx.format)?;
    let sigma = config.study.kernel_sigma.unwrap_or_else(|| median_pairwise_distance(&data[..config.study.split.train]));
    outputs.json("report.json", &json!({ "rows": data.len(), "kernel_sigma": sigma }))?;
    let timings = ctx.timings.then(|| json!({ "study_secs": elapsed }));
    Ok(Run { command: "neu-pca".into(), config: serde_json::to_value(&config)?, outputs, timings })
}

#[derive(Debug, Serialize, Deserialize)]
struct SimConfig {
    targets: Vec<Target>,
    sigmas: Vec<f64>,
    seeds: usize,
    methods: Vec<SimMethod>,
    simulation: SimulationSpec,
    study: SimStudyConfig,
    bca: BcaSpec,
}

#[derive(Serialize)]
struct SummaryRow {
    target: Target,
    sigma: f64,
    method: String,
    replicates: usize,
    median_mse: f64,
    mean_mse: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn sim_study(a: SimArgs, ctx: &RunContext) -> Result<Run> {
    let config = effective(
        SimConfig {
            targets: a.target,
            sigmas: a.sigma,
            seeds: a.seeds,
            methods: a.methods.into_iter().map(Into::into).collect(),
            simulation: SimulationSpec { n: a.n, ..SimulationSpec::default() },
            study: SimStudyConfig { family: a.family.into(), ..SimStudyConfig::default() },
            bca: BcaSpec { resamples: a.resamples, seed: ctx.seed, ..BcaSpec::default() },
        },
        &ctx.overrides,
    )?;
    if config.targets.is_empty() || config.sigmas.is_empty() || config.seeds == 0 {
        bail!("need at least one target, one noise scale and one replicate");
    }
    let mut tasks = Vec::new();
    for &target in &config.targets {
        for &sigma in &config.sigmas {
            for i in 0..config.seeds {
                tasks.push(SimulationSpec { target, sigma, seed: ctx.seed.wrapping_add(i as u64), ..config.simulation.clone() });
            }
        }
    }
    let start = Instant::now();
    let reports: Vec<StudyReport> = tasks
        .par_iter()
        .map(|spec| run_sim_study(spec, &config.methods, &config.bca, &config.study))
        .collect::<neu_core::Result<_>>()?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut summary = Vec::new();
    for &target in &config.targets {
        for &sigma in &config.sigmas {
            for &method in &config.methods {
                let mut mses: Vec<f64> = reports
                    .iter()
                    .filter(|r| r.target == target && r.sigma == sigma)
                    .filter_map(|r| r.mse(method))
                    .collect();
                let mean_mse = mses.iter().sum::<f64>() / mses.len() as f64;
                summary.push(SummaryRow {
                    target,
                    sigma,
                    method: method.to_string(),
                    replicates: mses.len(),
                    median_mse: median(&mut mses),
                    mean_mse,
                });
            }
        }
    }

    let mut outputs = Outputs::default();
    match ctx.format {
        Format::Csv => {
            let mut bytes = Vec::new();
            write_study_csv(&reports, ctx.timings, &mut bytes)?;
            outputs.add("study.csv", bytes);
        }
        Format::Json => {
            let mut value = serde_json::to_value(&reports)?;
            if !ctx.timings {
                strip_keys(&mut value, &TIMING_KEYS);
            }
            outputs.json("study.json", &value)?;
        }
    }
    outputs.table("summary", &summary, ctx.format)?;
    let timings = ctx.timings.then(|| json!({ "study_secs": elapsed }));
    Ok(Run { command: "sim-study".into(), config: serde_json::to_value(&config)?, outputs, timings })
}

#[derive(Debug, Serialize, Deserialize)]
struct BacktestRunConfig {
    prices: PathBuf,
    backtest: BacktestConfig,
}

#[derive(Serialize)]
struct WindowRow {
    method: String,
    start: usize,
    test_mse: f64,
    coefficients: String,
}

fn backtest(a: BacktestArgs, ctx: &RunContext) -> Result<Run> {
    let defaults = BacktestConfig::default();
    let config = effective(
        BacktestRunConfig {
            prices: a.prices,
            backtest: BacktestConfig {
                window: WindowSpec {
                    train_len: a.train_len,
                    validation_len: a.validation_len,
                    test_len: a.test_len,
                    stride: a.stride,
                },
                methods: a.methods.into_iter().map(Into::<BacktestMethod>::into).collect(),
                neu: NeuConfig { seed: ctx.seed, ..defaults.neu.clone() },
                bca: BcaSpec { resamples: a.resamples, seed: ctx.seed, ..BcaSpec::default() },
                ..defaults
            },
        },
        &ctx.overrides,
    )?;
    let file = File::open(&config.prices).with_context(|| format!("opening {}", config.prices.display()))?;
    let table = read_prices(file).with_context(|| format!("reading {}", config.prices.display()))?;
    let report = rolling_window_backtest(&table, &config.backtest)?;

    let mut outputs = Outputs::default();
    match ctx.format {
        Format::Csv => {
            let mut bytes = Vec::new();
            write_backtest_csv(&report, ctx.timings, &mut bytes)?;
            outputs.add("backtest.csv", bytes);
        }
        Format::Json => {
            let mut value = serde_json::to_value(&report)?;
            if !ctx.timings {
                strip_keys(&mut value, &TIMING_KEYS);
            }
            outputs.json("backtest.json", &value)?;
        }
    }
    let windows: Vec<WindowRow> = report
        .methods
        .iter()
        .flat_map(|m| {
            m.windows.iter().map(move |w| WindowRow {
                method: m.method.to_string(),
                start: w.start,
                test_mse: w.test_mse,
                coefficients: w.coefficients.iter().map(f64::to_string).collect::<Vec<_>>().join(" "),
            })
        })
        .collect();
    outputs.table("windows", &windows, ctx.format)?;
    let timings = ctx.timings.then(|| {
        json!(report
            .methods
            .iter()
            .map(|m| json!({ "method": m.method.to_string(), "runtime_secs": m.runtime_secs, "learning_secs": m.learning_secs }))
            .collect::<Vec<_>>())
    });
    Ok(Run { command: "backtest".into(), config: serde_json::to_value(&config)?, outputs, timings })
}

#[derive(Debug, Serialize, Deserialize)]
struct UrpConfig {
    sources: PathBuf,
    targets: PathBuf,
    fixed: Option<PathBuf>,
    family: Family,
    clearance: f64,
}

fn urp_check(a: UrpArgs, ctx: &RunContext) -> Result<Run> {
    let config = effective(
        UrpConfig { sources: a.sources, targets: a.targets, fixed: a.fixed, family: a.family.into(), clearance: a.clearance },
        &ctx.overrides,
    )?;
    let (header, sources) = read_points(&config.sources)?;
    let (_, targets) = read_points(&config.targets)?;
    let fixed = match &config.fixed {
        Some(p) => read_points(p)?.1,
        None => Vec::new(),
    };
    let start = Instant::now();
    let chain = construct_reconfiguration(&sources, &targets, &fixed, config.family, config.clearance)?;
    let elapsed = start.elapsed().as_secs_f64();
    let report = verify_urp(&chain, &sources, &targets, &fixed);

    let dim = sources[0].len();
    let mut columns = vec!["point".to_string(), "kind".to_string()];
    columns.extend(header.iter().map(|h| format!("start_{h}")));
    columns.extend(header.iter().map(|h| format!("end_{h}")));
    columns.push("error".into());
    let mut rows: Vec<Vec<String>> = Vec::new();
    let labelled = sources.iter().zip(&targets).map(|(s, t)| ("source", s, t)).chain(fixed.iter().map(|z| ("fixed", z, z)));
    for (i, (kind, s, t)) in labelled.enumerate() {
        let end = chain.reconfigure(s)?;
        let mut row = vec![i.to_string(), kind.to_string()];
        row.extend((0..dim).map(|j| s[j].to_string()));
        row.extend((0..dim).map(|j| end[j].to_string()));
        row.push((&end - t).norm().to_string());
        rows.push(row);
    }

    let mut outputs = Outputs::default();
    outputs.add("chain.json", format!("{}\n", chain.to_json()?).into_bytes());
    outputs.json("report.json", &report)?;
    match ctx.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&columns)?;
            for r in &rows {
                w.write_record(r)?;
            }
            outputs.add("points.csv", w.into_inner()?);
        }
        Format::Json => outputs.json("points.json", &json!({ "columns": columns, "rows": rows }))?,
    }
    let timings = ctx.timings.then(|| json!({ "construction_secs": elapsed }));
    Ok(Run { command: "urp-check".into(), config: serde_json::to_value(&config)?, outputs, timings })
}
