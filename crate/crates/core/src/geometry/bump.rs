//! Smooth compactly supported bump used by every deformation family.
//!
//! `psi(r; sigma) = exp(-sigma^2 / (sigma^2 - r^2))` for `r < sigma`, zero
//! otherwise. The value at the origin is `e^-1` and every derivative vanishes
//! as `r -> sigma`.

use crate::error::{NeuError, Result};

/// Which algebraic form of the bump to evaluate.
///
/// `Normalized` has support radius exactly `sigma` and is what the
/// deformation families use. `Literal` evaluates `exp(-sigma / (sigma - r^2))`
/// on `r < sigma`, whose denominator vanishes at `sqrt(sigma)` instead of at
/// `sigma`; it is kept for comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BumpForm {
    #[default]
    Normalized,
    Literal,
}

/// Bump value with argument validation.
pub fn bump(r: f64, sigma: f64) -> Result<f64> {
    bump_with(r, sigma, BumpForm::Normalized)
}

pub fn bump_with(r: f64, sigma: f64, form: BumpForm) -> Result<f64> {
    if !r.is_finite() || r < 0.0 {
        return Err(NeuError::Domain(format!("bump radius must be finite and >= 0, got {r}")));
    }
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(NeuError::Domain(format!("bump sigma must be finite and > 0, got {sigma}")));
    }
    Ok(match form {
        BumpForm::Normalized => psi(r, sigma),
        BumpForm::Literal => {
            if r < sigma {
                let den = sigma - r * r;
                if den <= 0.0 {
                    return Err(NeuError::Domain(format!(
                        "literal bump undefined at r={r} for sigma={sigma}"
                    )));
                }
                (-sigma / den).exp()
            } else {
                0.0
            }
        }
    })
}

/// Unchecked normalized bump. Zero for `sigma <= 0`.
#[inline]
pub fn psi(r: f64, sigma: f64) -> f64 {
    if r < sigma {
        let s2 = sigma * sigma;
        let den = s2 - r * r;
        if den <= 0.0 {
            return 0.0;
        }
        (-s2 / den).exp()
    } else {
        0.0
    }
}

/// Radial derivative `d psi / d r`.
#[inline]
pub fn psi_prime(r: f64, sigma: f64) -> f64 {
    if r < sigma {
        let s2 = sigma * sigma;
        let den = s2 - r * r;
        if den <= 0.0 {
            return 0.0;
        }
        let value = (-s2 / den).exp();
        -2.0 * s2 * r / (den * den) * value
    } else {
        0.0
    }
}

/// `sup_r |psi'(r; 1)|`, attained at `r^2 = 1/sqrt(3)`.
pub fn unit_max_slope() -> f64 {
    let w = 1.0 / 3f64.sqrt();
    let u = w.sqrt();
    2.0 * u / ((1.0 - w) * (1.0 - w)) * (-1.0 / (1.0 - w)).exp()
}

/// `sup_r |psi'(r; sigma)|`, which scales as `1/sigma`.
pub fn max_slope(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        f64::INFINITY
    } else {
        unit_max_slope() / sigma
    }
}

/// `sup_r r |psi'(r; sigma)|`; scale free. Attained at `r^2 = (sqrt(5) - 1) / 2`.
pub fn max_radial_shear() -> f64 {
    let w = (5f64.sqrt() - 1.0) / 2.0;
    2.0 * w / ((1.0 - w) * (1.0 - w)) * (-1.0 / (1.0 - w)).exp()
}
