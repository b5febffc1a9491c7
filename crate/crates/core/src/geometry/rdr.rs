//! Rapidly decaying rotations: `x -> exp(psi(|x - c|; sigma) X)(x - c) + c`.

use serde::{Deserialize, Serialize};

use super::bump::{max_radial_shear, psi};
use super::skew::{ExpAction, SkewMatrix};
use super::Point;
use crate::error::{check_dim, NeuError, Result};

/// Parameters of one rapidly decaying rotation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RdrRaw", into = "RdrRaw")]
pub struct RdrTheta {
    center: Point,
    sigma: f64,
    generator: SkewMatrix,
    action: ExpAction,
}

#[derive(Serialize, Deserialize)]
struct RdrRaw {
    c: Vec<f64>,
    sigma: f64,
    #[serde(rename = "X")]
    x: SkewMatrix,
}

impl TryFrom<RdrRaw> for RdrTheta {
    type Error = NeuError;
    fn try_from(raw: RdrRaw) -> Result<Self> {
        RdrTheta::new(Point::from_vec(raw.c), raw.sigma, raw.x)
    }
}

impl From<RdrTheta> for RdrRaw {
    fn from(t: RdrTheta) -> Self {
        RdrRaw { c: t.center.iter().copied().collect(), sigma: t.sigma, x: t.generator }
    }
}

impl PartialEq for RdrTheta {
    fn eq(&self, other: &Self) -> bool {
        self.center == other.center && self.sigma == other.sigma && self.generator == other.generator
    }
}

impl RdrTheta {
    pub fn new(center: Point, sigma: f64, generator: SkewMatrix) -> Result<Self> {
        let d = center.len();
        if d < 2 {
            return Err(NeuError::Domain(format!("rotations need D >= 2, got {d}")));
        }
        check_dim(d, generator.dim())?;
        if center.iter().any(|v| !v.is_finite()) {
            return Err(NeuError::Domain("rotation center must be finite".into()));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(NeuError::Domain(format!("rotation radius must be > 0, got {sigma}")));
        }
        let action = ExpAction::new(&generator);
        Ok(Self { center, sigma, generator, action })
    }

    /// Identity element: zero generator.
    pub fn identity(center: Point, sigma: f64) -> Result<Self> {
        let d = center.len();
        Self::new(center, sigma, SkewMatrix::zeros(d))
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn generator(&self) -> &SkewMatrix {
        &self.generator
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Upper bound on the radial shear term of the Jacobian,
    /// `|X|_F * sup_r r |psi'(r)|`.
    pub fn shear_bound(&self) -> f64 {
        self.generator.frobenius_norm() * max_radial_shear()
    }

    pub(crate) fn apply_unchecked(&self, x: &Point) -> Point {
        self.rotate(x, 1.0)
    }

    pub(crate) fn invert_unchecked(&self, y: &Point) -> Point {
        // |y - c| = |x - c|, so the angle can be read at y.
        self.rotate(y, -1.0)
    }

    fn rotate(&self, x: &Point, sign: f64) -> Point {
        let v = x - &self.center;
        let r = v.norm();
        if r >= self.sigma {
            return x.clone();
        }
        let s = psi(r, self.sigma);
        if s == 0.0 {
            return x.clone();
        }
        self.action.apply(sign * s, &v) + &self.center
    }
}

pub fn rdr_apply(x: &Point, theta: &RdrTheta) -> Result<Point> {
    check_dim(theta.dim(), x.len())?;
    Ok(theta.apply_unchecked(x))
}

pub fn rdr_invert(y: &Point, theta: &RdrTheta) -> Result<Point> {
    check_dim(theta.dim(), y.len())?;
    Ok(theta.invert_unchecked(y))
}
