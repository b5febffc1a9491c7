//! Experiment drivers: simulation studies, rolling backtests, PCA tables and
//! bootstrap intervals.

pub mod backtest;
pub mod bca;
pub mod pca_study;
pub mod sim;
pub mod yield_curve;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use backtest::{read_prices, rolling_window_backtest, BacktestConfig, BacktestMethod, BacktestReport, WindowSpec};
pub use bca::{bca_interval, bca_intervals, BcaSpec, Interval};
pub use pca_study::{pca_study, PcaStudy, PcaStudyConfig, Split};
pub use sim::{generate_simulation, run_sim_study, SimMethod, SimStudyConfig, Simulation, SimulationSpec, StudyReport, Target};
pub use yield_curve::{synth_yield_curve, YieldCurveParams, DEFAULT_MATURITIES};

use crate::error::Result;

/// Independent deterministic stream for task `index` under `master`.
pub fn task_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Record written next to every run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub version: String,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<serde_json::Value>,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, seed: u64, config: &C) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let canonical = serde_json::to_vec(&config)?;
        let config_hash = Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self {
            command: command.to_string(),
            seed,
            config_hash,
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
            timings: None,
        })
    }
}
