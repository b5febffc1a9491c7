//! Non-Euclidean upgrading of learning algorithms.
//!
//! A learning algorithm is wrapped by a chain of smooth, invertible, locally
//! supported deformations of the data space. The chain is learned greedily:
//! a candidate deformation is kept only when it improves validation
//! performance. Predictions are made in the deformed space and mapped back
//! with the exact inverse chain.
//!
//! Layout:
//! - [`geometry`]: bump functions, skew matrices and their exponentials,
//!   rapidly decaying rotations and planar micro-bumps.
//! - [`reconfig`]: chains of deformations with forward/inverse application.
//! - [`learning`]: the objective-learning-algorithm abstraction.
//! - [`baselines`]: OLS, elastic net, PCA, kernel PCA, p-splines, LOESS.
//! - [`optim`]: derivative-free and finite-difference minimizers.
//! - [`neu`]: the accept/reject learning loop and the upgraded predictor.
//! - [`universal`]: constructive point-set reconfiguration.
//! - [`harness`]: simulation studies, backtests, bootstrap intervals.

pub mod baselines;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod learning;
pub mod linalg;
pub mod neu;
pub mod optim;
pub mod reconfig;
pub mod universal;

pub use error::{NeuError, Result};
pub use geometry::{BumpTheta, Family, Point, RdrTheta, Theta};
pub use reconfig::ReconfigChain;
