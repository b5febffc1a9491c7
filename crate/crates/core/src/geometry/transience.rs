//! Local transience: move one point onto a nearby target while fixing
//! farther points exactly.
//!
//! Micro-bumps are centered on the moving point with radius
//! [`BUMP_RADIUS_FACTOR`] times the step, so the point sits at the bump's peak
//! (`psi = e^-1`) and the contraction factor is `e * sup|psi'| / factor < 1`.
//! Rotations are centered at the midpoint of the step and turn the point by
//! a half revolution in the plane spanned by the step and an orthogonal
//! direction. When a protected point is too close for a single map, the move
//! is split into equal sub-steps along the segment.

use super::bump::{psi, unit_max_slope};
use super::{BumpTheta, Family, Point, RdrTheta, SkewMatrix, Theta};
use crate::error::{NeuError, Result};

/// Bump radius over step length. Must exceed `e * sup|psi'(.; 1)|` (about 2.17).
pub const BUMP_RADIUS_FACTOR: f64 = 2.5;
/// Largest extra margin of a rotation ball beyond half the step.
pub const RDR_MAX_MARGIN: f64 = 0.5;
/// Smallest margin accepted before the move is split.
pub const RDR_MIN_MARGIN: f64 = 0.25;
const MAX_SUBSTEPS: usize = 1 << 20;
// keeps protected points strictly outside closed balls
const SAFETY: f64 = 1.0 - 1e-9;

/// Result of a local-transience construction.
#[derive(Debug, Clone)]
pub struct Transience {
    /// Maps to apply in order.
    pub thetas: Vec<Theta>,
    /// Number of sub-steps the move was split into (1 when a single map sufficed).
    pub substeps: usize,
}

/// Parameters moving `x` to `y` and fixing `z`; requires `d(x, y) < d(x, z)`.
pub fn local_transience_theta(x: &Point, y: &Point, z: &Point, family: Family) -> Result<Transience> {
    if x.len() != y.len() || x.len() != z.len() {
        return Err(NeuError::DimensionMismatch { expected: x.len(), got: y.len().max(z.len()) });
    }
    let dxy = (x - y).norm();
    let dxz = (x - z).norm();
    if dxy >= dxz {
        return Err(NeuError::Precondition(format!(
            "local transience needs d(x,y) < d(x,z), got {dxy} >= {dxz}"
        )));
    }
    local_transience_avoiding(x, y, std::slice::from_ref(z), family)
}

/// Parameters moving `x` to `y` whose supports avoid every protected point.
///
/// Every protected point must stay farther from the segment `[x, y]` than
/// zero; the closer they are, the more sub-steps are used.
pub fn local_transience_avoiding(
    x: &Point,
    y: &Point,
    protected: &[Point],
    family: Family,
) -> Result<Transience> {
    family.check_dim(x.len())?;
    if x.len() != y.len() || protected.iter().any(|p| p.len() != x.len()) {
        return Err(NeuError::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x == y {
        return Ok(Transience { thetas: vec![Theta::identity(family, x)?], substeps: 1 });
    }
    let clearance = protected
        .iter()
        .map(|z| segment_distance(x, y, z))
        .fold(f64::INFINITY, f64::min);
    if clearance <= 0.0 {
        return Err(NeuError::Precondition("a protected point lies on the path".into()));
    }
    let d = (x - y).norm();
    let mut k = 1usize;
    while k <= MAX_SUBSTEPS {
        if substeps_admissible(x, y, protected, family, k) {
            break;
        }
        k *= 2;
    }
    if k > MAX_SUBSTEPS {
        return Err(NeuError::Construction(format!(
            "could not split a move of length {d} past protected points at distance {clearance}"
        )));
    }
    let mut thetas = Vec::with_capacity(k);
    let mut current = x.clone();
    for j in 0..k {
        let next = if j + 1 == k { y.clone() } else { x + (y - x) * ((j + 1) as f64 / k as f64) };
        let theta = single_step(&current, &next, protected, family)?;
        current = theta.apply(&current);
        thetas.push(theta);
    }
    Ok(Transience { thetas, substeps: k })
}

fn substeps_admissible(x: &Point, y: &Point, protected: &[Point], family: Family, k: usize) -> bool {
    let step = (y - x).norm() / k as f64;
    (0..k).all(|j| {
        let a = x + (y - x) * (j as f64 / k as f64);
        let b = x + (y - x) * ((j + 1) as f64 / k as f64);
        match family {
            Family::MicroBump => {
                let radius = BUMP_RADIUS_FACTOR * step;
                protected.iter().all(|z| (z - &a).norm() * SAFETY > radius)
            }
            Family::Rdr => rdr_margin(&a, &b, protected) >= RDR_MIN_MARGIN.min(RDR_MAX_MARGIN),
        }
    })
}

fn rdr_margin(a: &Point, b: &Point, protected: &[Point]) -> f64 {
    let c = (a + b) * 0.5;
    let half = (a - b).norm() * 0.5;
    let nearest = protected.iter().map(|z| (z - &c).norm()).fold(f64::INFINITY, f64::min);
    (nearest * SAFETY / half - 1.0).min(RDR_MAX_MARGIN)
}

fn single_step(a: &Point, b: &Point, protected: &[Point], family: Family) -> Result<Theta> {
    let delta = b - a;
    let d = delta.norm();
    match family {
        Family::MicroBump => {
            let sigma = BUMP_RADIUS_FACTOR * d;
            // a sits at the peak, psi(0) = e^-1
            let shift = delta / psi(0.0, sigma);
            debug_assert!(shift.norm() * unit_max_slope() / sigma < 1.0);
            Ok(Theta::Bump(BumpTheta::new(a, sigma, &shift)?))
        }
        Family::Rdr => {
            let c = (a + b) * 0.5;
            let half = d * 0.5;
            let margin = rdr_margin(a, b, protected);
            let sigma = half * (1.0 + margin);
            let u = (a - &c) / half;
            let w = orthogonal_unit(&u);
            let rate = std::f64::consts::PI / psi((a - &c).norm(), sigma);
            let generator = SkewMatrix::from_plane_vectors(&u, &w, rate);
            Ok(Theta::Rdr(RdrTheta::new(c, sigma, generator)?))
        }
    }
}

/// A unit vector orthogonal to the unit vector `u`.
pub(crate) fn orthogonal_unit(u: &Point) -> Point {
    let n = u.len();
    let axis = (0..n)
        .min_by(|&i, &j| u[i].abs().total_cmp(&u[j].abs()))
        .expect("non-empty vector");
    let mut e = Point::zeros(n);
    e[axis] = 1.0;
    let w = &e - u * u.dot(&e);
    let w = &w - u * u.dot(&w);
    w.normalize()
}

/// Distance from `z` to the segment `[a, b]`.
pub fn segment_distance(a: &Point, b: &Point, z: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = ((z - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (z - (a + ab * t)).norm()
}
