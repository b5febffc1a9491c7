use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use neu_core::baselines::enet::enet_objective;
use neu_core::baselines::{enet_fit, ols_fit, pca, EnetOptions, EnetSpec};
use neu_core::geometry::{mat_exp, SkewMatrix};
use neu_core::harness::bca::{adjusted_interval, bootstrap_means, bca_constants};
use neu_core::harness::{
    bca_interval, pca_study, run_sim_study, synth_yield_curve, BcaSpec, PcaStudyConfig, SimMethod, SimStudyConfig,
    SimulationSpec, Target, YieldCurveParams, DEFAULT_MATURITIES,
};
use neu_core::learning::{Dataset, PcaAlgorithm, RegressionAlgorithm};
use neu_core::neu::{neu_fit, NeuConfig, NeuResult};
use neu_core::universal::{construct_reconfiguration, verify_urp, DEFAULT_CLEARANCE_FACTOR};
use neu_core::{BumpTheta, Family, Point, RdrTheta, Theta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

const SEEDS: u64 = 10;
/// Criteria reported as failing in the README; any other failure is an error.
const KNOWN_GAPS: [usize; 3] = [7, 8, 10];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_point(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Point {
    Point::from_fn(d, |_, _| rng.random_range(lo..hi))
}

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Point {
    loop {
        let v = Point::from_fn(d, |_, _| normal(rng));
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

fn geometry_invariants() -> Outcome {
    let cases = 100_000;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut iso, mut rt_rdr, mut rt_bump) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut locality_breaks = 0usize;
    for _ in 0..cases {
        let d = rng.random_range(2..=6);
        let c = random_point(&mut rng, d, -1.0, 1.0);
        let sigma = rng.random_range(0.1..2.0);
        let upper: Vec<f64> = (0..d * (d - 1) / 2).map(|_| rng.random_range(-3.0..3.0)).collect();
        let theta = Theta::Rdr(RdrTheta::new(c.clone(), sigma, SkewMatrix::from_upper(d, &upper).unwrap()).unwrap());
        let x = &c + unit(&mut rng, d) * rng.random_range(0.0..2.0 * sigma);
        let y = theta.apply(&x);
        iso = iso.max(((&y - &c).norm() - (&x - &c).norm()).abs());
        if (&x - &c).norm() >= sigma && y != x {
            locality_breaks += 1;
        }
        rt_rdr = rt_rdr.max((theta.invert(&y).unwrap() - &x).norm());
    }
    for _ in 0..cases {
        let c = random_point(&mut rng, 2, -1.0, 1.0);
        let sigma = rng.random_range(0.1..2.0);
        let shift = unit(&mut rng, 2) * (rng.random::<f64>() * BumpTheta::max_shift(sigma, 0.95));
        let theta = Theta::Bump(BumpTheta::new(&c, sigma, &shift).unwrap());
        let x = &c + unit(&mut rng, 2) * rng.random_range(0.0..2.0 * sigma);
        let y = theta.apply(&x);
        if (&x - &c).norm() >= sigma && y != x {
            locality_breaks += 1;
        }
        rt_bump = rt_bump.max((theta.invert(&y).unwrap() - &x).norm());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = iso < 1e-12 && locality_breaks == 0 && rt_rdr < 1e-10 && rt_bump < 1e-10 && secs < 10.0;
    outcome(
        pass,
        format!(
            "{cases} cases per family: isometry {iso:.1e}, locality breaks {locality_breaks}, roundtrip rdr {rt_rdr:.1e} bump {rt_bump:.1e}, {secs:.1}s"
        ),
    )
}

fn series_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..200 {
        term = &term * a / k as f64;
        sum += &term;
        if term.amax() < 1e-18 * sum.amax() {
            break;
        }
    }
    sum
}

fn matrix_exponential() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let d = rng.random_range(2..=6);
        let upper: Vec<f64> = (0..d * (d - 1) / 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = SkewMatrix::from_upper(d, &upper).unwrap();
        let e = mat_exp(&s).unwrap();
        worst = worst.max((e.matrix() - series_exp(s.matrix())).amax());
    }
    outcome(worst < 1e-11, format!("1000 skew matrices, max entry error {worst:.1e}"))
}

fn separated_points(rng: &mut ChaCha8Rng, count: usize, min_gap: f64) -> Vec<Point> {
    let mut pts: Vec<Point> = Vec::with_capacity(count);
    while pts.len() < count {
        let p = random_point(rng, 2, 0.0, 1.0);
        if pts.iter().all(|q| (q - &p).norm() >= min_gap) {
            pts.push(p);
        }
    }
    pts
}

fn urp_desk_scale() -> Outcome {
    let start = Instant::now();
    let mut worst_end = 0.0_f64;
    let mut worst_drift = 0.0_f64;
    let mut failures = 0usize;
    let mut longest = 0usize;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let pts = separated_points(&mut rng, 15, 0.05);
        let (sources, rest) = pts.split_at(5);
        let (targets, bystanders) = rest.split_at(5);
        match construct_reconfiguration(sources, targets, bystanders, Family::Rdr, DEFAULT_CLEARANCE_FACTOR) {
            Ok(chain) => {
                let r = verify_urp(&chain, sources, targets, bystanders);
                worst_end = worst_end.max(r.max_endpoint_error);
                worst_drift = worst_drift.max(r.max_fixed_drift);
                longest = longest.max(r.chain_len);
                if !r.passes(1e-7, 1e-9) {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && secs < 60.0,
        format!(
            "100 instances, failures {failures}, endpoint {worst_end:.1e}, drift {worst_drift:.1e}, longest chain {longest}, {secs:.1}s"
        ),
    )
}

fn pca_recursion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0_f64;
    let mut done = 0;
    while done < 50 {
        let d = rng.random_range(2..=8);
        let n = 200;
        let scales: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..3.0)).collect();
        let q = nalgebra::linalg::QR::new(DMatrix::from_fn(d, d, |_, _| normal(&mut rng))).q();
        let z = DMatrix::from_fn(n, d, |_, j| normal(&mut rng) * scales[j]) * q.transpose();
        let data: Vec<Point> = (0..n).map(|i| z.row(i).transpose()).collect();
        let mean = z.row_mean();
        let centered = DMatrix::from_fn(n, d, |i, j| z[(i, j)] - mean[j]);
        let cov = centered.transpose() * &centered / (n - 1) as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let gap = order.windows(2).map(|w| eig.eigenvalues[w[0]] - eig.eigenvalues[w[1]]).fold(f64::INFINITY, f64::min);
        if gap <= 1e-6 {
            continue;
        }
        let model = pca(&data, d).unwrap();
        for (k, &i) in order.iter().enumerate() {
            let u = eig.eigenvectors.column(i).into_owned();
            let v = &model.components[k];
            worst = worst.max((v - &u).norm().min((v + &u).norm()));
        }
        done += 1;
    }
    outcome(worst < 1e-8, format!("50 covariances, max component error {worst:.1e}"))
}

fn enet_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let opts = EnetOptions::default();
    let (mut ols_err, mut ridge_err, mut lasso_gap) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..20 {
        let (n, p) = (50, rng.random_range(1..=6));
        let x = DMatrix::from_fn(n, p, |_, _| normal(&mut rng));
        let y = DVector::from_fn(n, |_, _| normal(&mut rng));
        let ols = ols_fit(&x, &y).unwrap();
        for alpha in [0.0, 0.5, 1.0] {
            let fit = enet_fit(&x, &y, &EnetSpec::new(0.0, alpha).unwrap(), &opts).unwrap();
            ols_err = ols_err.max((&fit.coefficients - &ols).amax());
        }
        for lambda in [0.1, 1.0, 10.0] {
            let fit = enet_fit(&x, &y, &EnetSpec::new(lambda, 1.0).unwrap(), &opts).unwrap();
            let gram = x.transpose() * &x + DMatrix::identity(p, p) * lambda;
            let closed = gram.cholesky().unwrap().solve(&(x.transpose() * &y));
            ridge_err = ridge_err.max((&fit.coefficients - closed).amax());
        }
    }
    for _ in 0..5 {
        let n = 30;
        let x = DMatrix::from_fn(n, 2, |_, _| normal(&mut rng));
        let y = DVector::from_fn(n, |i, _| 1.5 * x[(i, 0)] - 0.3 * x[(i, 1)] + 0.5 * normal(&mut rng));
        let spec = EnetSpec::new(rng.random_range(1.0..20.0), 0.0).unwrap();
        let fit = enet_fit(&x, &y, &spec, &opts).unwrap();
        let best = (0..=600)
            .into_par_iter()
            .map(|i| {
                let mut m = f64::INFINITY;
                for j in 0..=600 {
                    let b = DVector::from_vec(vec![-3.0 + 0.01 * i as f64, -3.0 + 0.01 * j as f64]);
                    m = m.min(enet_objective(&x, &y, &b, &spec));
                }
                m
            })
            .reduce(|| f64::INFINITY, f64::min);
        lasso_gap = lasso_gap.max((enet_objective(&x, &y, &fit.coefficients, &spec) - best).abs());
    }
    outcome(
        ols_err < 1e-8 && ridge_err < 1e-8 && lasso_gap < 2e-2,
        format!("lambda=0 vs OLS {ols_err:.1e}, alpha=1 vs ridge {ridge_err:.1e}, lasso vs grid {lasso_gap:.1e}"),
    )
}

fn gain_violations(r: &NeuResult) -> usize {
    let mut v = 0;
    let mut last = r.initial.validation;
    for h in r.history.iter().filter(|h| h.accepted) {
        if !(h.perf_out > last) {
            v += 1;
        }
        last = h.perf_out;
    }
    if r.final_.validation < r.initial.validation || r.final_.validation != last {
        v += 1;
    }
    v
}

fn gain_invariant() -> Outcome {
    let config = |seed| NeuConfig { max_iters: 10, proposals_per_iter: 20, refine_evals: 30, seed, ..NeuConfig::default() };
    let runs: Vec<(usize, usize)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
            let r = match seed % 3 {
                0 | 1 => {
                    let pts: Vec<Point> = (0..60)
                        .map(|_| {
                            let x: f64 = rng.random_range(0.0..1.0);
                            Point::from_vec(vec![x, (6.0 * x).sin() + 0.1 * normal(&mut rng)])
                        })
                        .collect();
                    let ds = Dataset::new(pts[..45].to_vec(), pts[45..].to_vec(), None).unwrap();
                    let family = if seed % 3 == 0 { Family::Rdr } else { Family::MicroBump };
                    neu_fit(&RegressionAlgorithm::ols(), &ds, family, &config(seed)).unwrap()
                }
                _ => {
                    let pts: Vec<Point> = (0..80)
                        .map(|_| {
                            let t: f64 = rng.random_range(-1.0..1.0);
                            Point::from_vec(vec![t, t * t + 0.05 * normal(&mut rng), 0.3 * normal(&mut rng)])
                        })
                        .collect();
                    let ds = Dataset::new(pts[..60].to_vec(), pts[60..].to_vec(), None).unwrap();
                    neu_fit(&PcaAlgorithm::new(1), &ds, Family::Rdr, &config(seed)).unwrap()
                }
            };
            (gain_violations(&r), r.accepted())
        })
        .collect();
    let violations: usize = runs.iter().map(|r| r.0).sum();
    let accepted: usize = runs.iter().map(|r| r.1).sum();
    outcome(violations == 0, format!("50 runs, {accepted} accepted steps, {violations} violations"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct Medians {
    neu: f64,
    pspline: f64,
    loess: f64,
    secs: f64,
}

fn study_medians(target: Target, sigma: f64) -> Medians {
    let start = Instant::now();
    let config = SimStudyConfig::default();
    let bca = BcaSpec { resamples: 200, ..BcaSpec::default() };
    let reports: Vec<_> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let spec = SimulationSpec { target, sigma, seed, ..SimulationSpec::default() };
            run_sim_study(&spec, &SimMethod::ALL, &bca, &config).unwrap()
        })
        .collect();
    let col = |m| median(reports.iter().map(|r| r.mse(m).unwrap()).collect());
    Medians {
        neu: col(SimMethod::NeuOls),
        pspline: col(SimMethod::PSplines),
        loess: col(SimMethod::Loess),
        secs: start.elapsed().as_secs_f64(),
    }
}

fn describe(m: &Medians) -> String {
    format!("median MSE NEU-OLS {:.3e}, p-splines {:.3e}, LOESS {:.3e}, {:.0}s", m.neu, m.pspline, m.loess, m.secs)
}

fn study_m1() -> Outcome {
    let m = study_medians(Target::M1, 0.1);
    let pass = m.neu < m.pspline && m.neu < m.loess && m.neu < 2e-3 && m.secs < 900.0;
    let high = study_medians(Target::M1, 1.5);
    outcome(pass, format!("{} (sigma=1.5: {})", describe(&m), describe(&high)))
}

fn study_m2() -> Outcome {
    let m = study_medians(Target::M2, 0.1);
    outcome(5.0 * m.neu <= m.pspline && 5.0 * m.neu <= m.loess, describe(&m))
}

fn study_m3() -> Outcome {
    let m = study_medians(Target::M3, 0.1);
    outcome(m.neu <= m.pspline && m.neu <= m.loess, describe(&m))
}

fn pca_yield_study() -> Outcome {
    let rows: Vec<(bool, bool)> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let data = synth_yield_curve(500, &DEFAULT_MATURITIES, &YieldCurveParams::default(), seed).unwrap();
            let mut config = PcaStudyConfig::default();
            config.neu.seed = seed;
            let study = pca_study(&data, &config).unwrap();
            let explained = study.rows[0].neu_pca_explained >= study.rows[0].pca_explained;
            let test = study.rows.iter().all(|r| r.neu_pca_test_loss <= r.pca_test_loss);
            (explained, test)
        })
        .collect();
    let explained = rows.iter().filter(|r| r.0).count();
    let test = rows.iter().filter(|r| r.1).count();
    outcome(
        explained == rows.len() && test >= 8,
        format!("1-factor explained NEU >= PCA in {explained}/10 seeds, test loss <= PCA at K=1..4 in {test}/10 seeds"),
    )
}

fn bca_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_shift = 0usize;
    for trial in 0..20 {
        let half: Vec<f64> = (0..25).map(|_| normal(&mut rng).abs()).collect();
        let samples: Vec<f64> = half.iter().flat_map(|&v| [v, -v]).collect();
        let mut boot: Vec<f64> = bootstrap_means(&samples, 1000, trial).into_iter().flat_map(|m| [m, -m]).collect();
        boot.sort_by(f64::total_cmp);
        let (z0, a) = bca_constants(&samples, &boot);
        for level in [0.9, 0.95, 0.99] {
            let bca = adjusted_interval(&boot, level, z0, a, 0.0);
            let pct = adjusted_interval(&boot, level, 0.0, 0.0, 0.0);
            let rank = |v: f64| boot.partition_point(|&b| b < v);
            worst_shift = worst_shift.max(rank(bca.low).abs_diff(rank(pct.low))).max(rank(bca.high).abs_diff(rank(pct.high)));
        }
    }
    let covered = (0..500u64)
        .into_par_iter()
        .filter(|&trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(50_000 + trial);
            let samples: Vec<f64> = (0..50).map(|_| normal(&mut rng)).collect();
            let iv = bca_interval(&samples, 0.95, 1000, trial).unwrap();
            iv.low <= 0.0 && 0.0 <= iv.high
        })
        .count();
    let coverage = covered as f64 / 500.0;
    outcome(
        worst_shift <= 1 && (0.91..=0.98).contains(&coverage),
        format!("symmetric inputs shift at most {worst_shift} order statistics, 95% coverage {coverage:.3} over 500 trials"),
    )
}

fn neu_binary() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let bin = exe.parent()?.parent()?.join(format!("neu{}", std::env::consts::EXE_SUFFIX));
    bin.exists().then_some(bin)
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap_or_default()))
                .collect()
        })
        .unwrap_or_default();
    out.sort();
    out
}

fn cli_determinism() -> Outcome {
    let Some(bin) = neu_binary() else {
        return outcome(false, "neu binary not found next to the test executable; run cargo test --workspace".into());
    };
    let root = std::env::temp_dir().join(format!("neu-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).unwrap();
    std::fs::write(root.join("src.csv"), "x,y\n0.1,0.2\n0.5,0.5\n0.9,0.1\n").unwrap();
    std::fs::write(root.join("dst.csv"), "x,y\n0.3,0.35\n0.6,0.7\n0.7,0.2\n").unwrap();
    std::fs::write(root.join("fix.csv"), "x,y\n0.8,0.8\n0.2,0.8\n").unwrap();
    std::fs::write(root.join("sim.json"), r#"{"study":{"neu":{"max_iters":10,"proposals_per_iter":10}}}"#).unwrap();
    std::fs::write(root.join("pca.json"), r#"{"study":{"neu":{"max_iters":3,"proposals_per_iter":20}}}"#).unwrap();
    let runs: [&[&str]; 5] = [
        &["--seed", "7", "sim-study", "--target", "m1,m3", "--sigma", "0.1", "--config", "sim.json"],
        &["--seed", "7", "--format", "json", "sim-study", "--target", "m2", "--config", "sim.json"],
        &["urp-check", "--sources", "src.csv", "--targets", "dst.csv", "--fixed", "fix.csv"],
        &["--seed", "3", "neu-pca", "--config", "pca.json"],
        &["--seed", "5", "demo", "reconfigure", "--points", "src.csv", "--family", "micro-bump"],
    ];
    let mut identical = 0;
    for (i, args) in runs.iter().enumerate() {
        let mut outs = Vec::new();
        for rep in 0..2 {
            let out = root.join(format!("run{i}_{rep}"));
            let status = Command::new(&bin).args(*args).arg("--out").arg(&out).current_dir(&root).status();
            outs.push(status.map(|s| s.success()).unwrap_or(false).then(|| dir_bytes(&out)));
        }
        if let [Some(a), Some(b)] = &outs[..] {
            if !a.is_empty() && a == b {
                identical += 1;
            }
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    outcome(identical == runs.len(), format!("{identical}/{} repeated CLI runs byte-identical", runs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("geometry invariants", geometry_invariants),
        ("matrix exponential", matrix_exponential),
        ("URP desk scale", urp_desk_scale),
        ("PCA recursion", pca_recursion),
        ("ENET", enet_checks),
        ("performance gain", gain_invariant),
        ("simulation m1", study_m1),
        ("simulation m2", study_m2),
        ("simulation m3", study_m3),
        ("PCA yield-curve study", pca_yield_study),
        ("BCa intervals", bca_checks),
        ("CLI determinism", cli_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut stdout = std::io::stdout();
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string()) {
            continue;
        }
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        writeln!(stdout, "[{tag}] {id:>2} {name}: {}", o.detail).unwrap();
        stdout.flush().unwrap();
        if !o.pass {
            failed.push(id);
        }
    }
    writeln!(stdout, "acceptance: {} criteria failed {:?}", failed.len(), failed).unwrap();
    let unexpected: Vec<usize> = failed.into_iter().filter(|id| !KNOWN_GAPS.contains(id)).collect();
    if !unexpected.is_empty() {
        writeln!(stdout, "acceptance: unexpected failures {unexpected:?}").unwrap();
        std::process::exit(1);
    }
}
