//! Random proposals of deformation parameters.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{NeuError, Result};
use crate::geometry::{BumpTheta, Family, Point, RdrTheta, SkewMatrix, Theta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterLaw {
    /// Uniform over the data bounding box, inflated on every side.
    BoundingBox,
    /// A uniformly chosen data point, jittered by a tenth of the radius.
    DataPoints,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ThetaSampler {
    pub center_law: CenterLaw,
    /// Relative inflation of the bounding box per side.
    pub box_inflation: f64,
    /// Smallest radius as a multiple of the smallest pairwise distance.
    pub radius_floor: f64,
    /// Standard deviation of the generator entries at the first iteration.
    /// Micro-bump shifts are drawn in units of the radius.
    pub scale: f64,
    /// Multiplicative decay of the scale per iteration.
    pub decay: f64,
    /// Lower limit of the scale, relative to `scale`.
    pub min_scale: f64,
    /// Bound on the Jacobian perturbation: the micro-bump contraction factor,
    /// and the rotation shear `|X| sup r|psi'|` when `cap_rotations` is set.
    pub derivative_cap: f64,
    pub cap_rotations: bool,
}

impl Default for ThetaSampler {
    fn default() -> Self {
        Self {
            center_law: CenterLaw::BoundingBox,
            box_inflation: 0.1,
            radius_floor: 0.1,
            scale: 2.0,
            decay: 0.995,
            min_scale: 0.1,
            derivative_cap: 0.9,
            cap_rotations: false,
        }
    }
}

/// Summary of the working data the sampler draws around.
#[derive(Debug, Clone)]
pub struct DataStats {
    pub lo: Point,
    pub hi: Point,
    pub min_pair: f64,
    pub diameter: f64,
    pub points: Vec<Point>,
}

impl DataStats {
    pub fn from_points(points: &[Point]) -> Result<Self> {
        let first = points.first().ok_or_else(|| NeuError::Data("no points to sample around".into()))?;
        let d = first.len();
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in points {
            for j in 0..d {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        let mut min_pair = f64::INFINITY;
        let mut diameter: f64 = 0.0;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let dist = (&points[i] - &points[j]).norm();
                if dist > 0.0 {
                    min_pair = min_pair.min(dist);
                }
                diameter = diameter.max(dist);
            }
        }
        if diameter == 0.0 {
            diameter = 1.0;
        }
        if !min_pair.is_finite() {
            min_pair = diameter;
        }
        Ok(Self { lo, hi, min_pair, diameter, points: points.to_vec() })
    }
}

impl ThetaSampler {
    pub fn scale_at(&self, iteration: usize) -> f64 {
        let s = self.scale * self.decay.powi(iteration.saturating_sub(1) as i32);
        s.max(self.scale * self.min_scale)
    }

    pub fn radius_range(&self, stats: &DataStats) -> (f64, f64) {
        let lo = (self.radius_floor * stats.min_pair).min(stats.diameter);
        (lo, stats.diameter)
    }

    /// Draws one admissible parameter for `family`.
    pub fn propose<R: Rng + ?Sized>(&self, family: Family, rng: &mut R, stats: &DataStats, iteration: usize) -> Theta {
        let d = stats.lo.len();
        let (r_lo, r_hi) = self.radius_range(stats);
        let sigma = if r_hi > r_lo { (r_lo.ln() + rng.random::<f64>() * (r_hi / r_lo).ln()).exp() } else { r_hi };
        let center = match self.center_law {
            CenterLaw::BoundingBox => Point::from_fn(d, |j, _| {
                let w = (stats.hi[j] - stats.lo[j]).max(f64::MIN_POSITIVE);
                let a = stats.lo[j] - self.box_inflation * w;
                let b = stats.hi[j] + self.box_inflation * w;
                a + rng.random::<f64>() * (b - a)
            }),
            CenterLaw::DataPoints => {
                let anchor = &stats.points[rng.random_range(0..stats.points.len())];
                Point::from_fn(d, |j, _| {
                    let e: f64 = StandardNormal.sample(rng);
                    anchor[j] + 0.1 * sigma * e
                })
            }
        };
        let s = self.scale_at(iteration);
        match family {
            Family::Rdr => {
                let upper: Vec<f64> = (0..d * (d - 1) / 2)
                    .map(|_| s * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
                    .collect();
                let mut generator = SkewMatrix::from_upper(d, &upper).expect("upper entries are finite");
                if self.cap_rotations {
                    let theta = RdrTheta::new(center.clone(), sigma, generator.clone()).expect("valid rotation");
                    let bound = theta.shear_bound();
                    if bound > self.derivative_cap {
                        generator = generator.scaled(self.derivative_cap / bound);
                    }
                }
                Theta::Rdr(RdrTheta::new(center, sigma, generator).expect("valid rotation"))
            }
            Family::MicroBump => {
                let mut shift = Point::from_fn(2, |_, _| {
                    let e: f64 = StandardNormal.sample(rng);
                    s * sigma * e
                });
                let limit = BumpTheta::max_shift(sigma, self.derivative_cap);
                if shift.norm() > limit {
                    shift *= limit / shift.norm();
                }
                Theta::Bump(BumpTheta::new(&center, sigma, &shift).expect("shift within the contraction bound"))
            }
        }
    }
}

/// Free-function form of [`ThetaSampler::propose`].
pub fn propose_theta<R: Rng + ?Sized>(
    sampler: &ThetaSampler,
    family: Family,
    rng: &mut R,
    stats: &DataStats,
    iteration: usize,
) -> Theta {
    sampler.propose(family, rng, stats, iteration)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stats() -> DataStats {
        let pts: Vec<Point> = (0..20)
            .map(|i| Point::from_vec(vec![(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()]))
            .collect();
        DataStats::from_points(&pts).unwrap()
    }

    #[test]
    fn fixed_seed_is_bit_exact() {
        let s = stats();
        let sampler = ThetaSampler::default();
        for family in [Family::Rdr, Family::MicroBump] {
            let a = sampler.propose(family, &mut ChaCha8Rng::seed_from_u64(3), &s, 1);
            let b = sampler.propose(family, &mut ChaCha8Rng::seed_from_u64(3), &s, 1);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn bumps_respect_the_cap_and_radius_law() {
        let s = stats();
        let sampler = ThetaSampler { scale: 50.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for it in 0..10_000 {
            let t = sampler.propose(Family::MicroBump, &mut rng, &s, it);
            let Theta::Bump(b) = &t else { panic!() };
            assert!(b.contraction() <= sampler.derivative_cap * (1.0 + 1e-12));
            assert!(t.sigma() <= s.diameter);
        }
    }

    #[test]
    fn rotation_cap_is_optional() {
        let s = stats();
        let capped = ThetaSampler { scale: 50.0, cap_rotations: true, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for it in 0..1000 {
            let Theta::Rdr(r) = capped.propose(Family::Rdr, &mut rng, &s, it) else { panic!() };
            assert!(r.shear_bound() <= capped.derivative_cap * (1.0 + 1e-12));
        }
    }

    #[test]
    fn scale_decays_to_floor() {
        let s = ThetaSampler { scale: 1.0, decay: 0.5, min_scale: 0.2, ..Default::default() };
        assert_eq!(s.scale_at(1), 1.0);
        assert_eq!(s.scale_at(2), 0.5);
        assert_eq!(s.scale_at(10), 0.2);
    }
}
