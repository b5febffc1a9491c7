//! Constructive reconfiguration of finite point sets: carry labelled sources
//! onto targets, one point at a time, while every other point stays put.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NeuError, Result};
use crate::geometry::transience::{orthogonal_unit, segment_distance};
use crate::geometry::{local_transience_avoiding, Family, Point, Theta};
use crate::reconfig::ReconfigChain;

pub const DEFAULT_CLEARANCE_FACTOR: f64 = 0.25;
const MAX_DETOUR_DOUBLINGS: usize = 24;

/// Builds a chain sending `sources[i]` to `targets[i]` and fixing `bystanders`.
///
/// Paths keep a distance of at least `clearance_factor` times the smallest
/// non-zero pairwise distance from every other current point and are cut
/// into steps of half that clearance.
pub fn construct_reconfiguration(
    sources: &[Point],
    targets: &[Point],
    bystanders: &[Point],
    family: Family,
    clearance_factor: f64,
) -> Result<ReconfigChain> {
    if sources.len() != targets.len() {
        return Err(NeuError::Precondition(format!(
            "{} sources but {} targets",
            sources.len(),
            targets.len()
        )));
    }
    if !(clearance_factor > 0.0 && clearance_factor < 0.5) {
        return Err(NeuError::Config(format!("clearance factor must lie in (0, 0.5), got {clearance_factor}")));
    }
    let dim = sources.first().or(bystanders.first()).map_or(2, |p| p.len());
    family.check_dim(dim)?;
    let all: Vec<&Point> = sources.iter().chain(targets).chain(bystanders).collect();
    if let Some(p) = all.iter().find(|p| p.len() != dim) {
        return Err(NeuError::DimensionMismatch { expected: dim, got: p.len() });
    }
    for i in 0..sources.len() {
        for j in i + 1..sources.len() {
            if sources[i] == sources[j] {
                return Err(NeuError::Precondition(format!("sources {i} and {j} coincide")));
            }
        }
    }
    let mut delta = f64::INFINITY;
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let d = (all[i] - all[j]).norm();
            if d > 0.0 {
                delta = delta.min(d);
            }
        }
    }
    let clearance = clearance_factor * if delta.is_finite() { delta } else { 1.0 };

    let mut chain = ReconfigChain::new(family, dim)?;
    let mut current: Vec<Point> = sources.to_vec();
    for i in 0..sources.len() {
        let protected: Vec<Point> = current
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, p)| p.clone())
            .chain(bystanders.iter().cloned())
            .collect();
        let start = current[i].clone();
        let goal = &targets[i];
        if &start == goal {
            continue;
        }
        if let Some(z) = protected.iter().find(|z| (*z - goal).norm() < clearance) {
            return Err(NeuError::Precondition(format!(
                "target {i} lies within {clearance} of another point ({:?})",
                z.as_slice()
            )));
        }
        let path = find_path(&start, goal, &protected, clearance).ok_or_else(|| {
            NeuError::Construction(format!(
                "no single-detour path for point {i} from {:?} to {:?} with clearance {clearance}",
                start.as_slice(),
                goal.as_slice()
            ))
        })?;
        let mut position = start;
        for leg in path.windows(2) {
            let len = (&leg[1] - &leg[0]).norm();
            let steps = ((len / (0.5 * clearance)).ceil() as usize).max(1);
            for s in 1..=steps {
                let next = if s == steps { leg[1].clone() } else { &leg[0] + (&leg[1] - &leg[0]) * (s as f64 / steps as f64) };
                let t = local_transience_avoiding(&position, &next, &protected, family)?;
                for theta in t.thetas {
                    if theta.is_identity() {
                        continue;
                    }
                    position = theta.apply(&position);
                    chain.push(theta)?;
                }
            }
        }
        current[i] = position;
    }
    Ok(chain)
}

fn clears(a: &Point, b: &Point, protected: &[Point], clearance: f64) -> bool {
    protected.iter().all(|z| segment_distance(a, b, z) >= clearance)
}

/// Straight segment, or a polyline through one waypoint pushed off the
/// midpoint along a perpendicular direction.
fn find_path(from: &Point, to: &Point, protected: &[Point], clearance: f64) -> Option<Vec<Point>> {
    if clears(from, to, protected, clearance) {
        return Some(vec![from.clone(), to.clone()]);
    }
    let dir = (to - from).normalize();
    let mut normals = vec![orthogonal_unit(&dir)];
    for k in 0..from.len() {
        if normals.len() == from.len() - 1 {
            break;
        }
        let mut e = Point::zeros(from.len());
        e[k] = 1.0;
        let r = normals.iter().fold(&e - &dir * dir.dot(&e), |acc, n| &acc - n * n.dot(&acc));
        if r.norm() > 0.5 {
            normals.push(r.normalize());
        }
    }
    let mid = (from + to) * 0.5;
    let mut offset = clearance;
    for _ in 0..MAX_DETOUR_DOUBLINGS {
        for n in &normals {
            for sign in [1.0, -1.0] {
                let w = &mid + n * (sign * offset);
                if protected.iter().all(|z| (z - &w).norm() >= clearance)
                    && clears(from, &w, protected, clearance)
                    && clears(&w, to, protected, clearance)
                {
                    return Some(vec![from.clone(), w, to.clone()]);
                }
            }
        }
        offset *= 2.0;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrpReport {
    pub max_endpoint_error: f64,
    pub max_fixed_drift: f64,
    pub chain_len: usize,
}

impl UrpReport {
    pub fn passes(&self, endpoint_tol: f64, drift_tol: f64) -> bool {
        self.max_endpoint_error < endpoint_tol && self.max_fixed_drift < drift_tol
    }
}

/// Endpoint error of the sources and drift of the fixed points under `chain`.
pub fn verify_urp(chain: &ReconfigChain, sources: &[Point], targets: &[Point], fixed: &[Point]) -> UrpReport {
    let err = |p: &Point, q: &Point| chain.reconfigure(p).map_or(f64::INFINITY, |m| (m - q).norm());
    let max_endpoint_error = sources
        .par_iter()
        .zip(targets.par_iter())
        .map(|(s, t)| err(s, t))
        .reduce(|| 0.0, f64::max);
    let max_fixed_drift = fixed.par_iter().map(|z| err(z, z)).reduce(|| 0.0, f64::max);
    UrpReport { max_endpoint_error, max_fixed_drift, chain_len: chain.len() }
}

#[derive(Debug, Clone)]
pub struct GraphDemo {
    pub chain: ReconfigChain,
    /// `sup_i |f(x_i) - y_i|` where `(x_i, y_i)` is the image of `(x_i, g(x_i))`.
    pub sup_error: f64,
}

/// Chain carrying the graph of `g` onto the graph of `f` over `grid`.
pub fn graph_reconfigure_demo(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    grid: &[f64],
    family: Family,
) -> Result<GraphDemo> {
    let sources: Vec<Point> = grid.iter().map(|&x| Point::from_vec(vec![x, g(x)])).collect();
    let targets: Vec<Point> = grid.iter().map(|&x| Point::from_vec(vec![x, f(x)])).collect();
    let chain = construct_reconfiguration(&sources, &targets, &[], family, DEFAULT_CLEARANCE_FACTOR)?;
    let mut sup_error: f64 = 0.0;
    for (s, &x) in sources.iter().zip(grid) {
        let y = chain.reconfigure(s)?;
        sup_error = sup_error.max((f(x) - y[1]).abs());
    }
    Ok(GraphDemo { chain, sup_error })
}

/// Whether every map in `chain` leaves each point of `protected` untouched.
pub fn supports_avoid(chain: &ReconfigChain, protected: &[Point]) -> bool {
    chain.thetas().iter().all(|t: &Theta| protected.iter().all(|z| !t.supports(z)))
}
