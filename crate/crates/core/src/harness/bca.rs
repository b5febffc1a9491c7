//! Bias-corrected and accelerated bootstrap intervals for a sample mean.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::task_rng;
use crate::error::{NeuError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BcaSpec {
    pub levels: Vec<f64>,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BcaSpec {
    fn default() -> Self {
        Self { levels: vec![0.95, 0.99], resamples: 1000, seed: 0 }
    }
}

impl BcaSpec {
    pub fn validate(&self) -> Result<()> {
        if self.resamples < 100 {
            return Err(NeuError::Config(format!("need at least 100 resamples, got {}", self.resamples)));
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(NeuError::Config(format!("confidence level must lie in (0, 1), got {l}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub level: f64,
    pub low: f64,
    pub mean: f64,
    pub high: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Sorted means of `resamples` bootstrap draws.
pub fn bootstrap_means(samples: &[f64], resamples: usize, seed: u64) -> Vec<f64> {
    let mut rng = task_rng(seed, 0);
    let n = samples.len();
    let mut out: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Order statistic of a sorted sample at probability `p`.
pub fn order_statistic(sorted: &[f64], p: f64) -> f64 {
    let b = sorted.len();
    let idx = ((p * b as f64).ceil() as usize).clamp(1, b) - 1;
    sorted[idx]
}

/// Bias correction `z0` and acceleration `a` of the sample mean.
pub fn bca_constants(samples: &[f64], sorted_boot: &[f64]) -> (f64, f64) {
    let theta = mean(samples);
    let below = sorted_boot.iter().filter(|&&m| m < theta).count() as f64;
    let b = sorted_boot.len() as f64;
    let frac = (below / b).clamp(0.5 / b, 1.0 - 0.5 / b);
    let z0 = std_normal().inverse_cdf(frac);
    let n = samples.len() as f64;
    let total: f64 = samples.iter().sum();
    let jack: Vec<f64> = samples.iter().map(|x| (total - x) / (n - 1.0)).collect();
    let jbar = mean(&jack);
    let num: f64 = jack.iter().map(|j| (jbar - j).powi(3)).sum();
    let den: f64 = jack.iter().map(|j| (jbar - j).powi(2)).sum();
    let a = if den > 0.0 { num / (6.0 * den.powf(1.5)) } else { 0.0 };
    (z0, a)
}

/// Interval from given constants; `z0 = a = 0` is the percentile interval.
pub fn adjusted_interval(sorted_boot: &[f64], level: f64, z0: f64, a: f64, centre: f64) -> Interval {
    let nd = std_normal();
    let adjust = |alpha: f64| {
        let z = nd.inverse_cdf(alpha);
        nd.cdf(z0 + (z0 + z) / (1.0 - a * (z0 + z)))
    };
    let tail = (1.0 - level) / 2.0;
    let low = order_statistic(sorted_boot, adjust(tail));
    let high = order_statistic(sorted_boot, adjust(1.0 - tail));
    Interval { level, low: low.min(high), mean: centre, high: low.max(high) }
}

/// BCa interval of the mean at `level`.
pub fn bca_interval(samples: &[f64], level: f64, resamples: usize, seed: u64) -> Result<Interval> {
    if samples.len() < 10 {
        return Err(NeuError::Precondition(format!("BCa needs at least 10 samples, got {}", samples.len())));
    }
    let m = mean(samples);
    if samples.iter().all(|&x| x == samples[0]) {
        return Ok(Interval { level, low: m, mean: m, high: m });
    }
    let boot = bootstrap_means(samples, resamples, seed);
    let (z0, a) = bca_constants(samples, &boot);
    Ok(adjusted_interval(&boot, level, z0, a, m))
}

/// One interval per level of `spec`, all from the same resample stream.
pub fn bca_intervals(samples: &[f64], spec: &BcaSpec) -> Result<Vec<Interval>> {
    spec.validate()?;
    spec.levels.iter().map(|&l| bca_interval(samples, l, spec.resamples, spec.seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_collapse() {
        let i = bca_interval(&[2.5; 20], 0.95, 1000, 1).unwrap();
        assert_eq!((i.low, i.mean, i.high), (2.5, 2.5, 2.5));
    }

    #[test]
    fn too_few_samples() {
        assert!(bca_interval(&[1.0, 2.0], 0.95, 1000, 1).is_err());
    }

    #[test]
    fn order_statistic_indices() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(order_statistic(&v, 0.0), 1.0);
        assert_eq!(order_statistic(&v, 0.25), 3.0);
        assert_eq!(order_statistic(&v, 1.0), 10.0);
    }

    #[test]
    fn skewed_data_shifts_the_interval_right() {
        let s: Vec<f64> = (0..100).map(|i| ((i as f64 + 0.5) / 100.0).powi(4) * 10.0).collect();
        let boot = bootstrap_means(&s, 2000, 3);
        let (_, a) = bca_constants(&s, &boot);
        assert!(a > 0.0);
        let bca = bca_interval(&s, 0.95, 2000, 3).unwrap();
        let pct = adjusted_interval(&boot, 0.95, 0.0, 0.0, 0.0);
        assert!(bca.high >= pct.high);
    }

    #[test]
    fn spec_validation() {
        assert!(BcaSpec { resamples: 50, ..Default::default() }.validate().is_err());
        assert!(BcaSpec { levels: vec![1.0], ..Default::default() }.validate().is_err());
    }
}
