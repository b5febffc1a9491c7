use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg::lstsq;

/// Ordinary least squares through a QR factorization of the design.
pub fn ols_fit(design: &DMatrix<f64>, responses: &DVector<f64>) -> Result<DVector<f64>> {
    lstsq(design, responses)
}
