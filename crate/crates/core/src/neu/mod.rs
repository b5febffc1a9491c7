//! The upgrading loop: propose a deformation, keep it only if it improves
//! performance, repeat; then fit the base algorithm on the deformed data and
//! predict through the inverse chain.

mod sampler;

use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NeuError, Result};
use crate::geometry::{Family, Point, Theta};
use crate::learning::{optimal_evaluation_on, upgraded_loss, Dataset, Evaluation, Hyper, ObjectiveLearningAlgorithm};
use crate::optim::{finite_diff_descent, nelder_mead, DescentOptions, NelderMeadOptions};
use crate::reconfig::ReconfigChain;

pub use sampler::{propose_theta, CenterLaw, DataStats, ThetaSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    RandomSearch,
    NelderMead,
    FiniteDifferenceDescent,
    /// Nelder-Mead followed by finite-difference descent.
    Alternating,
}

/// Where the accept/reject decision measures losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreSpace {
    /// Upgraded predictions mapped back through the inverse chain.
    Original,
    /// The base algorithm's own losses on the deformed data.
    Reconfigured,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuConfig {
    /// Stopping ratio in `(0, 1]`; `1` disables the ratio test.
    pub epsilon: f64,
    pub max_iters: usize,
    pub proposals_per_iter: usize,
    pub optimizer: Optimizer,
    /// Objective evaluations granted to the local refinement.
    pub refine_evals: usize,
    /// Best proposals refined and scored per iteration; the best-scoring
    /// one that passes the gate is kept.
    pub gate_candidates: usize,
    /// Rescale every proposal's deformation amount before ranking.
    pub line_search: bool,
    pub sampler: ThetaSampler,
    pub seed: u64,
    pub score_space: ScoreSpace,
    /// Also require the training performance to improve.
    pub require_train_gain: bool,
    /// Stop after this many consecutive rejections.
    pub patience: Option<usize>,
    /// Relative slack of the strict-improvement test.
    pub slack: f64,
}

impl Default for NeuConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            max_iters: 100,
            proposals_per_iter: 200,
            optimizer: Optimizer::NelderMead,
            refine_evals: 100,
            gate_candidates: 1,
            line_search: true,
            sampler: ThetaSampler::default(),
            seed: 0,
            score_space: ScoreSpace::Original,
            require_train_gain: true,
            patience: None,
            slack: 1e-12,
        }
    }
}

impl NeuConfig {
    pub fn validate(&self, has_validation: bool) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(NeuError::Config(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(NeuError::Config("max_iters must be positive".into()));
        }
        if self.epsilon < 1.0 && !has_validation {
            return Err(NeuError::Config("the stopping-ratio test needs a validation set".into()));
        }
        if !(self.slack >= 0.0) {
            return Err(NeuError::Config("slack must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    pub train: f64,
    pub validation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub theta: Theta,
    pub accepted: bool,
    /// Training-loss value reached by the proposal search (deformed space).
    pub search_loss: f64,
    pub perf_in: f64,
    pub perf_out: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Budget,
    Ratio,
    Patience,
    NoProposals,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeuResult {
    pub algorithm: String,
    pub chain: ReconfigChain,
    pub evaluation: Evaluation,
    pub initial: Performance,
    #[serde(rename = "final")]
    pub final_: Performance,
    /// `perf_0 / perf_N` on the gating set; above one means improvement
    /// when performances are negated losses.
    pub gain: f64,
    pub score_space: ScoreSpace,
    pub iterations: usize,
    pub stop: StopReason,
    pub history: Vec<HistoryRecord>,
}

impl NeuResult {
    pub fn accepted(&self) -> usize {
        self.history.iter().filter(|h| h.accepted).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_history_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["iteration", "accepted", "search_loss", "perf_in", "perf_out", "theta"])?;
        for h in &self.history {
            w.write_record([
                h.iteration.to_string(),
                h.accepted.to_string(),
                h.search_loss.to_string(),
                h.perf_in.to_string(),
                h.perf_out.to_string(),
                serde_json::to_string(&h.theta)?,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Scorer<'a, A: ?Sized> {
    ola: &'a A,
    space: ScoreSpace,
    train: &'a [Point],
    validation: &'a [Point],
}

impl<A: ObjectiveLearningAlgorithm + ?Sized> Scorer<'_, A> {
    fn score(&self, chain: &ReconfigChain, ev: &Evaluation) -> Performance {
        match self.space {
            ScoreSpace::Reconfigured => Performance { train: -ev.loss_in_at_opt, validation: -ev.loss_out_at_opt },
            ScoreSpace::Original => Performance {
                train: -upgraded_loss(self.ola, chain, &ev.beta_hat, self.train),
                validation: -upgraded_loss(self.ola, chain, &ev.beta_hat, self.validation),
            },
        }
    }
}

struct Trial {
    theta: Theta,
    loss: f64,
    train: Vec<Point>,
    val: Vec<Point>,
    chain: Option<ReconfigChain>,
    ev: Option<Evaluation>,
    perf: Performance,
    passes: bool,
}

fn improves(new: f64, old: f64, slack: f64) -> bool {
    new.is_finite() && new > old + slack * old.abs().max(f64::MIN_POSITIVE)
}

fn gain(initial: f64, last: f64) -> f64 {
    if initial == last {
        1.0
    } else if last == 0.0 {
        f64::INFINITY
    } else {
        initial / last
    }
}

/// Training loss after deforming `work` by `theta` and refitting at `gamma`.
fn search_loss<A: ObjectiveLearningAlgorithm + ?Sized>(ola: &A, gamma: &Hyper, work: &[Point], theta: &Theta) -> f64 {
    let moved: Vec<Point> = work.iter().map(|p| theta.apply(p)).collect();
    match ola.fit_inner(gamma, &moved) {
        Ok(beta) => {
            let l = ola.loss_in(&beta, gamma, &moved);
            if l.is_nan() {
                f64::INFINITY
            } else {
                l
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Best rescaling of `theta` by a coarse grid over `[-limit, limit]`
/// followed by golden-section refinement around the best grid point.
fn line_search<A: ObjectiveLearningAlgorithm + ?Sized>(
    ola: &A,
    gamma: &Hyper,
    work: &[Point],
    theta: &Theta,
    cap: f64,
) -> (Theta, f64) {
    let limit = theta.scale_limit(cap);
    let eval = |t: f64| match theta.scaled(t) {
        Ok(th) => (search_loss(ola, gamma, work, &th), Some(th)),
        Err(_) => (f64::INFINITY, None),
    };
    if !(limit > 0.0 && limit.is_finite()) {
        let (l, th) = eval(1.0);
        return (th.unwrap_or_else(|| theta.clone()), l);
    }
    const GRID: usize = 4;
    let h = limit / GRID as f64;
    let ts: Vec<f64> = (-(GRID as i64)..=GRID as i64).filter(|&k| k != 0).map(|k| k as f64 * h).collect();
    let mut best_t = 1.0f64.min(limit);
    let mut best = eval(best_t).0;
    for &t in &ts {
        let l = eval(t).0;
        if l < best {
            best = l;
            best_t = t;
        }
    }
    let (mut a, mut b) = ((best_t - h).max(-limit), (best_t + h).min(limit));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (eval(c).0, eval(d).0);
    for _ in 0..10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d).0;
        }
    }
    for (t, l) in [(c, fc), (d, fd)] {
        if l < best {
            best = l;
            best_t = t;
        }
    }
    match eval(best_t) {
        (l, Some(th)) => (th, l),
        _ => (theta.clone(), f64::INFINITY),
    }
}

/// Per-coordinate search scales around a parameter vector.
fn param_scales(theta: &Theta) -> Vec<f64> {
    let d = theta.dim();
    let sigma = theta.sigma();
    let mut out = vec![0.2 * sigma; d];
    out.push(0.2);
    let rest = theta.params().len() - d - 1;
    let mag = theta.params()[d + 1..].iter().map(|v| v.abs()).fold(0.0, f64::max);
    out.extend(std::iter::repeat_n(0.25 * mag.max(0.1 * sigma.max(1e-3)), rest));
    out
}

fn refine<A: ObjectiveLearningAlgorithm + ?Sized>(
    ola: &A,
    gamma: &Hyper,
    work: &[Point],
    start: &Theta,
    start_loss: f64,
    config: &NeuConfig,
) -> (Theta, f64) {
    let family = start.family();
    let dim = start.dim();
    let base = start.params();
    let scales = param_scales(start);
    let decode = |u: &[f64]| -> Option<Theta> {
        let p: Vec<f64> = base.iter().zip(&scales).zip(u).map(|((b, s), v)| b + s * v).collect();
        Theta::from_params(family, dim, &p).ok()
    };
    let objective = |u: &[f64]| match decode(u) {
        Some(t) => search_loss(ola, gamma, work, &t),
        None => f64::INFINITY,
    };
    let zero = vec![0.0; base.len()];
    let mut best_u = zero.clone();
    let mut best = start_loss;
    let use_nm = matches!(config.optimizer, Optimizer::NelderMead | Optimizer::Alternating);
    let use_fd = matches!(config.optimizer, Optimizer::FiniteDifferenceDescent | Optimizer::Alternating);
    if use_nm {
        let opts = NelderMeadOptions { initial_step: 1.0, max_evals: config.refine_evals, ..Default::default() };
        if let Ok(m) = nelder_mead(objective, &best_u, &opts) {
            if m.value < best {
                best = m.value;
                best_u = m.x;
            }
        }
    }
    if use_fd {
        let iters = (config.refine_evals / (2 * base.len() + 4)).max(1);
        let opts = DescentOptions { max_iters: iters, initial_step: 0.1, h_rel: 1e-6, ..Default::default() };
        if let Ok(m) = finite_diff_descent(objective, &best_u, &opts) {
            if m.value < best {
                best = m.value;
                best_u = m.x;
            }
        }
    }
    match decode(&best_u) {
        Some(t) if best_u != zero => (t, best),
        _ => (start.clone(), start_loss),
    }
}

/// Learns a deformation chain around `ola`.
pub fn neu_fit<A: ObjectiveLearningAlgorithm + ?Sized>(
    ola: &A,
    dataset: &Dataset,
    family: Family,
    config: &NeuConfig,
) -> Result<NeuResult> {
    let has_validation = !dataset.validation.is_empty();
    config.validate(has_validation)?;
    let dim = dataset.dim();
    family.check_dim(dim)?;
    let scorer = Scorer { ola, space: config.score_space, train: &dataset.train, validation: &dataset.validation };

    let mut chain = ReconfigChain::new(family, dim)?;
    let mut work_train = dataset.train.clone();
    let mut work_val = dataset.validation.clone();
    let mut evaluation = optimal_evaluation_on(ola, &work_train, &work_val)?;
    let initial = scorer.score(&chain, &evaluation);
    let mut current = initial;
    let mut history = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rejections = 0usize;
    let mut stop = StopReason::Budget;
    let mut iterations = 0usize;

    for n in 1..=config.max_iters {
        if config.proposals_per_iter == 0 {
            stop = StopReason::NoProposals;
            break;
        }
        iterations = n;
        let gamma = evaluation.gamma_hat.clone();
        let stats = DataStats::from_points(&work_train)?;
        let proposals: Vec<Theta> = (0..config.proposals_per_iter)
            .map(|_| config.sampler.propose(family, &mut rng, &stats, n))
            .collect();
        let (proposals, losses): (Vec<Theta>, Vec<f64>) = proposals
            .into_par_iter()
            .map(|t| {
                if config.line_search {
                    line_search(ola, &gamma, &work_train, &t, config.sampler.derivative_cap)
                } else {
                    let l = search_loss(ola, &gamma, &work_train, &t);
                    (t, l)
                }
            })
            .unzip();
        let mut order: Vec<usize> = (0..proposals.len()).filter(|&i| losses[i].is_finite()).collect();
        order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));
        order.truncate(config.gate_candidates.max(1));
        if order.is_empty() {
            order.push(0);
        }
        let refined: Vec<(Theta, f64)> = order
            .par_iter()
            .map(|&i| {
                if config.optimizer == Optimizer::RandomSearch || !losses[i].is_finite() {
                    (proposals[i].clone(), losses[i])
                } else {
                    refine(ola, &gamma, &work_train, &proposals[i], losses[i], config)
                }
            })
            .collect();
        let trials: Vec<Trial> = refined
            .into_par_iter()
            .map(|(theta, loss)| {
                let train: Vec<Point> = work_train.iter().map(|p| theta.apply(p)).collect();
                let val: Vec<Point> = work_val.iter().map(|p| theta.apply(p)).collect();
                let chain = chain.append(theta.clone()).ok();
                let ev = optimal_evaluation_on(ola, &train, &val).ok();
                let perf = match (&chain, &ev) {
                    (Some(c), Some(e)) => scorer.score(c, e),
                    _ => Performance { train: f64::NEG_INFINITY, validation: f64::NEG_INFINITY },
                };
                let passes = ev.is_some()
                    && (!config.require_train_gain || improves(perf.train, current.train, config.slack))
                    && (!has_validation || improves(perf.validation, current.validation, config.slack));
                Trial { theta, loss, train, val, chain, ev, perf, passes }
            })
            .collect();
        // passing trials first, then the best gate score, then the search order
        let key = |t: &Trial| if has_validation { t.perf.validation } else { t.perf.train };
        let chosen = (0..trials.len())
            .max_by(|&a, &b| {
                (trials[a].passes, key(&trials[a]))
                    .partial_cmp(&(trials[b].passes, key(&trials[b])))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.cmp(&a))
            })
            .expect("at least one trial");
        let trial = trials.into_iter().nth(chosen).expect("chosen index is in range");
        let accepted = trial.passes;
        let p = trial.perf;
        history.push(HistoryRecord {
            iteration: n,
            theta: trial.theta.clone(),
            accepted,
            search_loss: trial.loss,
            perf_in: p.train,
            perf_out: p.validation,
        });
        if accepted {
            let previous = current;
            chain = trial.chain.expect("accepted candidates extend the chain");
            work_train = trial.train;
            work_val = trial.val;
            evaluation = trial.ev.expect("accepted candidates have an evaluation");
            current = p;
            rejections = 0;
            if has_validation && ratio_stop(previous.validation, current.validation, config.epsilon) {
                stop = StopReason::Ratio;
                break;
            }
        } else {
            rejections += 1;
            if config.patience.is_some_and(|k| rejections >= k) {
                stop = StopReason::Patience;
                break;
            }
        }
    }

    let (g0, g1) = if has_validation { (initial.validation, current.validation) } else { (initial.train, current.train) };
    Ok(NeuResult {
        algorithm: ola.name(),
        chain,
        evaluation,
        initial,
        final_: current,
        gain: gain(g0, g1),
        score_space: config.score_space,
        iterations,
        stop,
        history,
    })
}

/// `perf_{n-1} / perf_n < epsilon` for positive performances, otherwise a
/// relative improvement below `1 - epsilon`.
pub fn ratio_stop(previous: f64, current: f64, epsilon: f64) -> bool {
    if previous > 0.0 && current > 0.0 {
        previous / current < epsilon
    } else {
        let rel = (current - previous) / previous.abs().max(f64::MIN_POSITIVE);
        rel < 1.0 - epsilon
    }
}

/// Upgraded prediction for an algorithm input (regressors only for regression).
pub fn neu_predict<A: ObjectiveLearningAlgorithm + ?Sized>(result: &NeuResult, ola: &A, x: &Point) -> Result<Point> {
    ola.upgraded_predict(&result.chain, &result.evaluation.beta_hat, x)
}

pub fn neu_predict_all<A: ObjectiveLearningAlgorithm + ?Sized>(
    result: &NeuResult,
    ola: &A,
    xs: &[Point],
) -> Result<Vec<Point>> {
    xs.par_iter().map(|x| neu_predict(result, ola, x)).collect()
}

/// Base algorithm refit on data deformed by an existing chain.
pub fn refit_with_chain<A: ObjectiveLearningAlgorithm + ?Sized>(
    ola: &A,
    chain: &ReconfigChain,
    dataset: &Dataset,
) -> Result<Evaluation> {
    let train = chain.reconfigure_all(&dataset.train)?;
    let validation = chain.reconfigure_all(&dataset.validation)?;
    optimal_evaluation_on(ola, &train, &validation)
}

pub fn beta_of(result: &NeuResult) -> &DVector<f64> {
    &result.evaluation.beta_hat
}
