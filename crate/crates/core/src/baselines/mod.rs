//! Classical learners used as base algorithms and as benchmarks.

pub mod enet;
pub mod kpca;
pub mod loess;
pub mod ols;
pub mod pca;
pub mod pspline;

pub use enet::{enet_fit, EnetFit, EnetOptions, EnetSpec};
pub use kpca::{kpca, KpcaModel};
pub use loess::{loess_fit, loess_fit_cv, Loess};
pub use ols::ols_fit;
pub use pca::{pca, pca_projection_loss, PcaModel, PcaOptions};
pub use pspline::{pspline_fit, pspline_fit_cv, PSpline};
