//! Explained-variance and projection-loss tables for PCA, kernel PCA and
//! their upgraded counterparts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baselines::{kpca, pca, pca_projection_loss};
use crate::error::{NeuError, Result};
use crate::geometry::{Family, Point};
use crate::learning::{upgraded_loss, Dataset, PcaAlgorithm};
use crate::linalg::{column_means, rows_to_matrix};
use crate::neu::{neu_fit, NeuConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Split {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl Default for Split {
    fn default() -> Self {
        Self { train: 300, validation: 100, test: 100 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PcaStudyConfig {
    pub split: Split,
    pub k_max: usize,
    pub neu: NeuConfig,
    /// Gaussian kernel width; the median pairwise distance when absent.
    pub kernel_sigma: Option<f64>,
}

impl Default for PcaStudyConfig {
    fn default() -> Self {
        Self {
            split: Split::default(),
            k_max: 4,
            neu: NeuConfig { max_iters: 10, proposals_per_iter: 30, refine_evals: 30, ..NeuConfig::default() },
            kernel_sigma: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaRow {
    pub factors: usize,
    pub pca_explained: f64,
    pub neu_pca_explained: f64,
    pub kpca_explained: f64,
    pub neu_kpca_explained: f64,
    pub pca_test_loss: f64,
    pub neu_pca_test_loss: f64,
    pub chain_len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaStudy {
    pub rows: Vec<PcaRow>,
}

fn total_ss(data: &[Point]) -> f64 {
    let mean = column_means(&rows_to_matrix(data));
    data.iter().map(|z| (z - &mean).norm_squared()).sum()
}

pub fn median_pairwise_distance(data: &[Point]) -> f64 {
    let mut d: Vec<f64> = Vec::new();
    for i in 0..data.len() {
        for j in i + 1..data.len() {
            d.push((&data[i] - &data[j]).norm());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    d[d.len() / 2].max(f64::MIN_POSITIVE)
}

/// Rows are chronological: the first block trains, the next validates, the
/// last tests. One chain per factor count is learned for NEU-PCA and reused
/// for NEU-kPCA.
pub fn pca_study(data: &[Point], config: &PcaStudyConfig) -> Result<PcaStudy> {
    let s = config.split;
    if s.train < 2 || s.validation == 0 || s.test == 0 {
        return Err(NeuError::Config("split lengths must be positive (train at least 2)".into()));
    }
    if data.len() < s.train + s.validation + s.test {
        return Err(NeuError::Data(format!("{} rows, split needs {}", data.len(), s.train + s.validation + s.test)));
    }
    let train = &data[..s.train];
    let val = &data[s.train..s.train + s.validation];
    let test = &data[s.train + s.validation..s.train + s.validation + s.test];
    let dim = data[0].len();
    if config.k_max == 0 || config.k_max > dim {
        return Err(NeuError::Config(format!("factor counts must lie in 1..={dim}")));
    }
    let tss = total_ss(train);
    let model = pca(train, config.k_max)?;
    let sigma = config.kernel_sigma.unwrap_or_else(|| median_pairwise_distance(train));
    let kmodel = kpca(train, config.k_max, sigma)?;
    let ds = Dataset::new(train.to_vec(), val.to_vec(), None)?;

    let mut rows = Vec::with_capacity(config.k_max);
    for k in 1..=config.k_max {
        let ola = PcaAlgorithm::new(k);
        let fit = neu_fit(&ola, &ds, Family::Rdr, &config.neu)?;
        let neu_train = upgraded_loss(&ola, &fit.chain, &fit.evaluation.beta_hat, train);
        let moved = fit.chain.reconfigure_all(train)?;
        let moved_sigma = config.kernel_sigma.unwrap_or_else(|| median_pairwise_distance(&moved));
        let neu_k = kpca(&moved, k, moved_sigma)?;
        rows.push(PcaRow {
            factors: k,
            pca_explained: 1.0 - pca_projection_loss(&model, k, train)? / tss,
            neu_pca_explained: 1.0 - neu_train / tss,
            kpca_explained: kmodel.explained.iter().take(k).sum(),
            neu_kpca_explained: neu_k.explained.iter().sum(),
            pca_test_loss: pca_projection_loss(&model, k, test)?,
            neu_pca_test_loss: upgraded_loss(&ola, &fit.chain, &fit.evaluation.beta_hat, test),
            chain_len: fit.chain.len(),
        });
    }
    Ok(PcaStudy { rows })
}

pub fn write_pca_csv<W: Write>(study: &PcaStudy, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in &study.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
