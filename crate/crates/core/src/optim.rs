//! Derivative-free and finite-difference minimizers.

use crate::error::{NeuError, Result};

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
    pub max_evals: usize,
    pub diameter_tol: f64,
    pub spread_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { initial_step: 0.1, max_evals: 10_000, diameter_tol: 1e-8, spread_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    Budget,
    StepCollapse,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub reason: StopReason,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        finite_or_inf(f(x))
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }
    if simplex.iter().all(|(_, v)| !v.is_finite()) {
        return Err(NeuError::Evaluation("objective is not finite at any initial vertex".into()));
    }
    if n == 0 {
        return Ok(Minimum { x: vec![], value: f0, evals, reason: StopReason::Converged });
    }

    let reason = loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < opts.diameter_tol || (worst - best).abs() < opts.spread_tol {
            break StopReason::Converged;
        }
        if evals >= opts.max_evals {
            break StopReason::Budget;
        }
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let xr = lerp(&centroid, &simplex[n].0, -REFLECT);
        let fr = eval(&xr, &mut evals);
        if fr < best {
            let xe = lerp(&centroid, &simplex[n].0, -EXPAND);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst {
            let xc = lerp(&centroid, &xr, CONTRACT);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = lerp(&centroid, &simplex[n].0, CONTRACT);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let v = lerp(&anchor, &vertex.0, SHRINK);
            let fv = eval(&v, &mut evals);
            *vertex = (v, fv);
        }
    };
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Ok(Minimum { x, value, evals, reason })
}

#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    /// Finite-difference step is `h_rel * max(1, |x_i|)`.
    pub h_rel: f64,
    pub initial_step: f64,
    pub grad_tol: f64,
    pub min_step: f64,
    pub max_iters: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { h_rel: 1e-6, initial_step: 1.0, grad_tol: 1e-6, min_step: 1e-16, max_iters: 10_000 }
    }
}

pub fn central_gradient<F>(f: &mut F, x: &[f64], h_rel: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = h_rel * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Gradient descent with central differences and backtracking by halving.
pub fn finite_diff_descent<F>(mut f: F, x0: &[f64], opts: &DescentOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut evals = 1usize;
    if !fx.is_finite() {
        return Err(NeuError::Evaluation("objective is not finite at the starting point".into()));
    }
    let mut step = opts.initial_step;
    for _ in 0..opts.max_iters {
        let g = central_gradient(&mut f, &x, opts.h_rel);
        evals += 2 * x.len();
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !gnorm.is_finite() {
            return Err(NeuError::Evaluation("non-finite gradient".into()));
        }
        if gnorm < opts.grad_tol {
            return Ok(Minimum { x, value: fx, evals, reason: StopReason::Converged });
        }
        loop {
            if step < opts.min_step {
                return Ok(Minimum { x, value: fx, evals, reason: StopReason::StepCollapse });
            }
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let ft = f(&trial);
            evals += 1;
            if ft.is_finite() && ft < fx {
                x = trial;
                fx = ft;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
    }
    Ok(Minimum { x, value: fx, evals, reason: StopReason::Budget })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn bowl() {
        let m = nelder_mead(|x| x.iter().map(|v| v * v).sum(), &[1.0, 1.0], &Default::default()).unwrap();
        assert!(m.value < 1e-9, "{m:?}");
    }

    #[test]
    fn rosenbrock_valley() {
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &Default::default()).unwrap();
        assert!(m.value < 1e-6 && m.evals <= 10_000 + 3, "{m:?}");
    }

    #[test]
    fn constant_objective_returns_start() {
        let m = nelder_mead(|_| 4.0, &[0.3, -0.2], &Default::default()).unwrap();
        assert_eq!(m.x, vec![0.3, -0.2]);
        assert_eq!(m.reason, StopReason::Converged);
    }

    #[test]
    fn all_vertices_infinite() {
        assert!(nelder_mead(|_| f64::NAN, &[0.0], &Default::default()).is_err());
    }

    #[test]
    fn descent_on_quadratic() {
        let f = |x: &[f64]| (x[0] - 2.0).powi(2) + 3.0 * (x[1] + 1.0).powi(2);
        let m = finite_diff_descent(f, &[0.0, 0.0], &Default::default()).unwrap();
        assert!((m.x[0] - 2.0).abs() < 1e-5 && (m.x[1] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn optimizers_agree_on_smooth_convex() {
        let f = |x: &[f64]| (x[0] - 0.5).powi(2) + (x[0] + x[1]).powi(2) + 0.1 * x[1].powi(4);
        let a = nelder_mead(f, &[1.0, 1.0], &Default::default()).unwrap();
        let b = finite_diff_descent(f, &[1.0, 1.0], &Default::default()).unwrap();
        assert!(a.x.iter().zip(&b.x).all(|(p, q)| (p - q).abs() < 1e-4), "{a:?} {b:?}");
    }

    #[test]
    fn step_collapse_is_reported() {
        // a kink at the origin defeats descent once the iterate sits on it
        let f = |x: &[f64]| x[0].abs() + 1e-3 * x[0];
        let m = finite_diff_descent(f, &[0.0], &DescentOptions { max_iters: 100, ..Default::default() }).unwrap();
        assert_eq!(m.reason, StopReason::StepCollapse);
    }
}
