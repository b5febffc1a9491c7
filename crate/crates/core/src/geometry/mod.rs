//! Deformation families acting on `R^D`.

pub mod bump;
pub mod microbump;
pub mod rdr;
pub mod skew;
pub mod transience;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use bump::{bump, BumpForm};
pub use microbump::{microbump_apply, microbump_invert, BumpTheta};
pub use rdr::{rdr_apply, rdr_invert, RdrTheta};
pub use skew::{mat_exp, RotationMatrix, SkewMatrix};
pub use transience::{local_transience_avoiding, local_transience_theta, Transience};

use crate::error::{check_dim, NeuError, Result};

/// A point of the data space.
pub type Point = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Rapidly decaying rotations, any `D >= 2`.
    Rdr,
    /// Planar micro-bumps, `D = 2` only.
    MicroBump,
}

impl Family {
    pub fn check_dim(self, dim: usize) -> Result<()> {
        match self {
            Family::Rdr if dim < 2 => {
                Err(NeuError::Domain(format!("rotations need D >= 2, got {dim}")))
            }
            Family::MicroBump if dim != 2 => {
                Err(NeuError::Domain(format!("micro-bumps need D = 2, got {dim}")))
            }
            _ => Ok(()),
        }
    }

    /// Length of the flat parameter vector used by the optimizers.
    pub fn param_len(self, dim: usize) -> usize {
        match self {
            Family::Rdr => dim + 1 + dim * (dim - 1) / 2,
            Family::MicroBump => 5,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Rdr => "rdr",
            Family::MicroBump => "micro-bump",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = NeuError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rdr" | "rotation" => Ok(Family::Rdr),
            "micro-bump" | "microbump" | "bump" => Ok(Family::MicroBump),
            other => Err(NeuError::Config(format!("unknown family '{other}'"))),
        }
    }
}

/// Parameters of one local deformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Theta {
    Rdr(RdrTheta),
    Bump(BumpTheta),
}

impl Theta {
    /// An identity parameter of the family, centered at `center`.
    pub fn identity(family: Family, center: &Point) -> Result<Self> {
        family.check_dim(center.len())?;
        Ok(match family {
            Family::Rdr => Theta::Rdr(RdrTheta::identity(center.clone(), 1.0)?),
            Family::MicroBump => Theta::Bump(BumpTheta::identity(center)?),
        })
    }

    pub fn family(&self) -> Family {
        match self {
            Theta::Rdr(_) => Family::Rdr,
            Theta::Bump(_) => Family::MicroBump,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Theta::Rdr(t) => t.dim(),
            Theta::Bump(_) => 2,
        }
    }

    pub fn center(&self) -> Point {
        match self {
            Theta::Rdr(t) => t.center().clone(),
            Theta::Bump(t) => t.center(),
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            Theta::Rdr(t) => t.sigma(),
            Theta::Bump(t) => t.sigma(),
        }
    }

    /// True when the map is the identity everywhere.
    pub fn is_identity(&self) -> bool {
        match self {
            Theta::Rdr(t) => t.generator().is_zero(),
            Theta::Bump(t) => t.sigma() == 0.0 || t.shift().iter().all(|v| *v == 0.0),
        }
    }

    /// Whether `p` lies in the open support ball.
    pub fn supports(&self, p: &Point) -> bool {
        (p - self.center()).norm() < self.sigma()
    }

    /// Forward map. The caller guarantees the dimension.
    pub fn apply(&self, x: &Point) -> Point {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            Theta::Rdr(t) => t.apply_unchecked(x),
            Theta::Bump(t) => t.apply_unchecked(x),
        }
    }

    pub fn invert(&self, y: &Point) -> Result<Point> {
        debug_assert_eq!(y.len(), self.dim());
        match self {
            Theta::Rdr(t) => Ok(t.invert_unchecked(y)),
            Theta::Bump(t) => t.invert_unchecked(y),
        }
    }

    pub fn try_apply(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim(), x.len())?;
        Ok(self.apply(x))
    }

    pub fn try_invert(&self, y: &Point) -> Result<Point> {
        check_dim(self.dim(), y.len())?;
        self.invert(y)
    }

    /// The same map with its rotation generator or shift multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        Ok(match self {
            Theta::Rdr(r) => Theta::Rdr(RdrTheta::new(r.center().clone(), r.sigma(), r.generator().scaled(t))?),
            Theta::Bump(b) => Theta::Bump(BumpTheta::new(&b.center(), b.sigma(), &(b.shift() * t))?),
        })
    }

    /// Largest `|t|` for [`Theta::scaled`]: the micro-bump contraction stays
    /// below `cap`, rotations stay below half a turn.
    pub fn scale_limit(&self, cap: f64) -> f64 {
        match self {
            Theta::Rdr(r) => {
                let f = r.generator().frobenius_norm();
                if f == 0.0 {
                    0.0
                } else {
                    std::f64::consts::PI * std::f64::consts::E * std::f64::consts::SQRT_2 / f
                }
            }
            Theta::Bump(b) => {
                let c = b.contraction();
                if c == 0.0 {
                    0.0
                } else {
                    cap / c
                }
            }
        }
    }

    /// Flat parameter vector `[c, ln sigma, generator or shift]`.
    pub fn params(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.center().iter().copied().collect();
        out.push(self.sigma().max(f64::MIN_POSITIVE).ln());
        match self {
            Theta::Rdr(t) => out.extend(t.generator().upper()),
            Theta::Bump(t) => out.extend(t.shift().iter()),
        }
        out
    }

    /// Inverse of [`Theta::params`]. Validates the family invariants.
    pub fn from_params(family: Family, dim: usize, params: &[f64]) -> Result<Self> {
        family.check_dim(dim)?;
        check_dim(family.param_len(dim), params.len())?;
        let center = Point::from_column_slice(&params[..dim]);
        let sigma = params[dim].exp();
        let rest = &params[dim + 1..];
        Ok(match family {
            Family::Rdr => Theta::Rdr(RdrTheta::new(center, sigma, SkewMatrix::from_upper(dim, rest)?)?),
            Family::MicroBump => {
                Theta::Bump(BumpTheta::new(&center, sigma, &Point::from_column_slice(rest))?)
            }
        })
    }
}
