//! Planar micro-bumps: `x -> x + psi(|x - c|; sigma) X` on the plane.
//!
//! The map is a bijection only when the perturbation is a contraction,
//! `|X| sup|psi'| < 1`; parameters are validated against that bound.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::bump::{max_slope, psi, psi_prime};
use super::Point;
use crate::error::{NeuError, Result};

pub const INVERSE_TOL: f64 = 1e-12;
pub const INVERSE_MAX_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BumpRaw", into = "BumpRaw")]
pub struct BumpTheta {
    center: Vector2<f64>,
    sigma: f64,
    shift: Vector2<f64>,
}

#[derive(Serialize, Deserialize)]
struct BumpRaw {
    c: Vec<f64>,
    sigma: f64,
    #[serde(rename = "X")]
    x: Vec<f64>,
}

impl TryFrom<BumpRaw> for BumpTheta {
    type Error = NeuError;
    fn try_from(raw: BumpRaw) -> Result<Self> {
        BumpTheta::new(&Point::from_vec(raw.c), raw.sigma, &Point::from_vec(raw.x))
    }
}

impl From<BumpTheta> for BumpRaw {
    fn from(t: BumpTheta) -> Self {
        BumpRaw { c: vec![t.center.x, t.center.y], sigma: t.sigma, x: vec![t.shift.x, t.shift.y] }
    }
}

impl BumpTheta {
    /// Validates `D = 2`, `sigma >= 0` and the contraction bound.
    pub fn new(center: &Point, sigma: f64, shift: &Point) -> Result<Self> {
        if center.len() != 2 || shift.len() != 2 {
            return Err(NeuError::Domain(format!(
                "micro-bumps live in the plane, got center dim {} and shift dim {}",
                center.len(),
                shift.len()
            )));
        }
        if center.iter().chain(shift.iter()).any(|v| !v.is_finite()) {
            return Err(NeuError::Domain("micro-bump parameters must be finite".into()));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(NeuError::Domain(format!("micro-bump radius must be >= 0, got {sigma}")));
        }
        let theta = Self {
            center: Vector2::new(center[0], center[1]),
            sigma,
            shift: Vector2::new(shift[0], shift[1]),
        };
        let k = theta.contraction();
        if k >= 1.0 {
            return Err(NeuError::Invertibility(format!(
                "micro-bump contraction factor {k} >= 1"
            )));
        }
        Ok(theta)
    }

    pub fn identity(center: &Point) -> Result<Self> {
        Self::new(center, 0.0, &Point::zeros(2))
    }

    /// `|X| sup|psi'|`; zero when the support is empty or the shift vanishes.
    pub fn contraction(&self) -> f64 {
        let n = self.shift.norm();
        if self.sigma == 0.0 || n == 0.0 {
            0.0
        } else {
            n * max_slope(self.sigma)
        }
    }

    /// Largest admissible shift norm for a radius at contraction factor `cap`.
    pub fn max_shift(sigma: f64, cap: f64) -> f64 {
        if sigma <= 0.0 {
            0.0
        } else {
            cap / max_slope(sigma)
        }
    }

    pub fn center(&self) -> Point {
        Point::from_vec(vec![self.center.x, self.center.y])
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn shift(&self) -> Point {
        Point::from_vec(vec![self.shift.x, self.shift.y])
    }

    pub(crate) fn apply_unchecked(&self, x: &Point) -> Point {
        let d = Vector2::new(x[0], x[1]) - self.center;
        let r = d.norm();
        if r >= self.sigma {
            return x.clone();
        }
        let s = psi(r, self.sigma);
        Point::from_vec(vec![x[0] + s * self.shift.x, x[1] + s * self.shift.y])
    }

    /// Solves `x + psi(|x - c|) X = y`.
    ///
    /// Newton steps via Sherman-Morrison on the rank-one Jacobian
    /// `I + X psi'(r) rhat^T`, falling back to the plain fixed-point update
    /// `x <- y - psi(|x - c|) X` whenever a Newton step fails to shrink the
    /// residual.
    pub(crate) fn invert_unchecked(&self, y: &Point) -> Result<Point> {
        let target = Vector2::new(y[0], y[1]);
        // the exterior is fixed, so a bijection maps the ball onto itself
        if (target - self.center).norm() >= self.sigma {
            return Ok(y.clone());
        }
        let residual = |x: &Vector2<f64>| {
            let r = (x - self.center).norm();
            x + self.shift * psi(r, self.sigma) - target
        };
        let tol = INVERSE_TOL * (1.0 + target.norm());
        let mut x = target;
        let mut f = residual(&x);
        for _ in 0..INVERSE_MAX_ITERS {
            if f.norm() <= tol {
                return Ok(Point::from_vec(vec![x.x, x.y]));
            }
            let d = x - self.center;
            let r = d.norm();
            let dp = psi_prime(r, self.sigma);
            let step = if r > 0.0 && dp != 0.0 {
                let g = d * (dp / r);
                let denom = 1.0 + g.dot(&self.shift);
                -f + self.shift * (g.dot(&f) / denom)
            } else {
                -f
            };
            let candidate = x + step;
            let fc = residual(&candidate);
            if fc.norm() < f.norm() {
                x = candidate;
                f = fc;
            } else {
                let r = (x - self.center).norm();
                x = target - self.shift * psi(r, self.sigma);
                f = residual(&x);
            }
        }
        if f.norm() <= tol {
            Ok(Point::from_vec(vec![x.x, x.y]))
        } else {
            Err(NeuError::Convergence { iterations: INVERSE_MAX_ITERS, residual: f.norm() })
        }
    }
}

fn check_planar(p: &Point) -> Result<()> {
    if p.len() == 2 {
        Ok(())
    } else {
        Err(NeuError::Domain(format!("micro-bumps act on R^2, got a point of dimension {}", p.len())))
    }
}

pub fn microbump_apply(x: &Point, theta: &BumpTheta) -> Result<Point> {
    check_planar(x)?;
    Ok(theta.apply_unchecked(x))
}

pub fn microbump_invert(y: &Point, theta: &BumpTheta) -> Result<Point> {
    check_planar(y)?;
    theta.invert_unchecked(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: f64, b: f64) -> Point {
        Point::from_vec(vec![a, b])
    }

    #[test]
    fn center_shift_example() {
        let theta = BumpTheta::new(&p(0.0, 0.0), 1.0, &p(0.1, 0.0)).unwrap();
        let y = microbump_apply(&p(0.0, 0.0), &theta).unwrap();
        assert!((y[0] - 0.1 * (-1f64).exp()).abs() < 1e-15);
        assert_eq!(y[1], 0.0);
        let x = microbump_invert(&p(0.036_787_944_117_144_23, 0.0), &theta).unwrap();
        assert!(x.norm() < 1e-10);
    }

    #[test]
    fn zero_shift_is_identity() {
        let theta = BumpTheta::new(&p(0.3, 0.3), 0.7, &p(0.0, 0.0)).unwrap();
        for q in [p(0.3, 0.3), p(0.5, 0.1), p(9.0, -2.0)] {
            assert_eq!(microbump_apply(&q, &theta).unwrap(), q);
        }
    }

    #[test]
    fn outside_support_is_fixed() {
        let theta = BumpTheta::new(&p(0.0, 0.0), 1.0, &p(0.5, 0.5)).unwrap();
        let q = p(1.0, 0.0);
        assert_eq!(microbump_apply(&q, &theta).unwrap(), q);
        let q = p(2.0, 2.0);
        assert_eq!(microbump_invert(&q, &theta).unwrap(), q);
    }

    #[test]
    fn contraction_bound_enforced() {
        let cap = BumpTheta::max_shift(1.0, 1.0);
        assert!(BumpTheta::new(&p(0.0, 0.0), 1.0, &p(cap * 1.01, 0.0)).is_err());
        assert!(BumpTheta::new(&p(0.0, 0.0), 1.0, &p(cap * 0.99, 0.0)).is_ok());
        assert!(BumpTheta::new(&p(0.0, 0.0), 0.0, &p(5.0, 0.0)).is_ok());
        assert!(BumpTheta::new(&p(0.0, 0.0), -1.0, &p(0.0, 0.0)).is_err());
    }

    #[test]
    fn near_bound_inverse_converges() {
        let cap = BumpTheta::max_shift(0.5, 0.999);
        let theta = BumpTheta::new(&p(0.0, 0.0), 0.5, &p(cap, 0.0)).unwrap();
        for i in 0..200 {
            let x = p(-0.5 + i as f64 * 0.005, 0.01);
            let y = microbump_apply(&x, &theta).unwrap();
            let back = microbump_invert(&y, &theta).unwrap();
            assert!((back - x).norm() < 1e-10, "i={i}");
        }
    }

    #[test]
    fn rejects_non_planar_points() {
        let theta = BumpTheta::new(&p(0.0, 0.0), 1.0, &p(0.1, 0.0)).unwrap();
        assert!(microbump_apply(&Point::from_vec(vec![0.0, 0.0, 0.0]), &theta).is_err());
        assert!(BumpTheta::new(&Point::from_vec(vec![0.0]), 1.0, &p(0.0, 0.0)).is_err());
    }
}
