//! Synthetic term-structure panels with level, slope and curvature factors.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::task_rng;
use crate::error::{NeuError, Result};
use crate::geometry::Point;

pub const DEFAULT_MATURITIES: [f64; 11] = [0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct YieldCurveParams {
    /// Decay rate of the slope and curvature loadings (per year).
    pub decay: f64,
    /// Long-run level, slope and curvature (percent).
    pub means: [f64; 3],
    pub persistence: [f64; 3],
    /// Daily innovation volatility of each factor.
    pub volatility: [f64; 3],
    /// Measurement noise per maturity.
    pub noise: f64,
}

impl Default for YieldCurveParams {
    fn default() -> Self {
        Self {
            decay: 0.6,
            means: [4.0, -1.5, 0.5],
            persistence: [0.995, 0.99, 0.98],
            volatility: [0.06, 0.05, 0.08],
            noise: 0.01,
        }
    }
}

/// Slope and curvature loadings at maturity `tau`.
pub fn loadings(tau: f64, decay: f64) -> (f64, f64) {
    let x = decay * tau;
    let slope = if x == 0.0 { 1.0 } else { -(-x).exp_m1() / x };
    (slope, slope - (-x).exp())
}

/// One curve per day; columns follow `maturities`.
pub fn synth_yield_curve(n_days: usize, maturities: &[f64], params: &YieldCurveParams, seed: u64) -> Result<Vec<Point>> {
    if n_days == 0 {
        return Err(NeuError::Config("need at least one day".into()));
    }
    if maturities.is_empty() || maturities.iter().any(|&m| !(m > 0.0)) || maturities.windows(2).any(|w| w[0] >= w[1]) {
        return Err(NeuError::Config("maturities must be positive and strictly increasing".into()));
    }
    let mut rng = task_rng(seed, 0);
    let load: Vec<(f64, f64)> = maturities.iter().map(|&t| loadings(t, params.decay)).collect();
    let mut f = params.means;
    let mut out = Vec::with_capacity(n_days);
    for _ in 0..n_days {
        for k in 0..3 {
            let e: f64 = rng.sample(StandardNormal);
            f[k] = params.means[k] + params.persistence[k] * (f[k] - params.means[k]) + params.volatility[k] * e;
        }
        let curve = Point::from_iterator(
            maturities.len(),
            load.iter().map(|&(s, c)| {
                let e: f64 = rng.sample(StandardNormal);
                f[0] + f[1] * s + f[2] * c + params.noise * e
            }),
        );
        out.push(curve);
    }
    Ok(out)
}
