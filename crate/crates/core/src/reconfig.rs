//! Chains of local deformations: forward reconfiguration and its exact
//! reverse-order inverse.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, NeuError, Result};
use crate::geometry::{Family, Point, Theta};

type PointMap = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

/// User-supplied diffeomorphism applied before the chain (and undone after
/// the inverse chain).
#[derive(Clone)]
pub struct Ambient {
    forward: PointMap,
    inverse: PointMap,
}

impl fmt::Debug for Ambient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Ambient(..)")
    }
}

impl Ambient {
    /// Checks `forward(inverse(p)) = p` and `inverse(forward(p)) = p` on the
    /// probes to `1e-9`.
    pub fn new(
        forward: impl Fn(&Point) -> Point + Send + Sync + 'static,
        inverse: impl Fn(&Point) -> Point + Send + Sync + 'static,
        probes: &[Point],
    ) -> Result<Self> {
        for p in probes {
            let a = forward(&inverse(p));
            let b = inverse(&forward(p));
            let err = (a - p).amax().max((b - p).amax());
            if !(err <= 1e-9) {
                return Err(NeuError::Invertibility(format!(
                    "ambient map pair is not mutually inverse (error {err:e})"
                )));
            }
        }
        Ok(Self { forward: Arc::new(forward), inverse: Arc::new(inverse) })
    }
}

/// An ordered, homogeneous-family sequence of deformations.
///
/// Chains are values: [`ReconfigChain::append`] returns a new chain and
/// leaves the original untouched.
#[derive(Debug, Clone)]
pub struct ReconfigChain {
    family: Family,
    dim: usize,
    thetas: Vec<Theta>,
    ambient: Option<Ambient>,
}

#[derive(Serialize, Deserialize)]
struct ChainDocument {
    family: Family,
    dimension: usize,
    thetas: Vec<Theta>,
}

impl ReconfigChain {
    pub fn new(family: Family, dim: usize) -> Result<Self> {
        family.check_dim(dim)?;
        Ok(Self { family, dim, thetas: Vec::new(), ambient: None })
    }

    pub fn from_thetas(family: Family, dim: usize, thetas: Vec<Theta>) -> Result<Self> {
        let mut chain = Self::new(family, dim)?;
        for t in thetas {
            chain.push(t)?;
        }
        Ok(chain)
    }

    pub fn with_ambient(mut self, ambient: Ambient) -> Self {
        self.ambient = Some(ambient);
        self
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn thetas(&self) -> &[Theta] {
        &self.thetas
    }

    /// New chain with `theta` at the tail.
    pub fn append(&self, theta: Theta) -> Result<Self> {
        let mut next = self.clone();
        next.push(theta)?;
        Ok(next)
    }

    pub(crate) fn push(&mut self, theta: Theta) -> Result<()> {
        if theta.family() != self.family {
            return Err(NeuError::Config(format!(
                "cannot append a {} parameter to a {} chain",
                theta.family(),
                self.family
            )));
        }
        check_dim(self.dim, theta.dim())?;
        self.thetas.push(theta);
        Ok(())
    }

    pub fn reconfigure(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim, x.len())?;
        let start = match &self.ambient {
            Some(a) => (a.forward)(x),
            None => x.clone(),
        };
        Ok(self.thetas.iter().fold(start, |p, t| t.apply(&p)))
    }

    pub fn deconfigure(&self, y: &Point) -> Result<Point> {
        check_dim(self.dim, y.len())?;
        let mut p = y.clone();
        for t in self.thetas.iter().rev() {
            p = t.invert(&p)?;
        }
        Ok(match &self.ambient {
            Some(a) => (a.inverse)(&p),
            None => p,
        })
    }

    pub fn reconfigure_all(&self, points: &[Point]) -> Result<Vec<Point>> {
        points.iter().map(|p| self.reconfigure(p)).collect()
    }

    pub fn deconfigure_all(&self, points: &[Point]) -> Result<Vec<Point>> {
        points.iter().map(|p| self.deconfigure(p)).collect()
    }

    /// `max_p |deconfigure(reconfigure(p)) - p|`; infinite if an inverse fails.
    pub fn roundtrip_error(&self, points: &[Point]) -> f64 {
        points
            .iter()
            .map(|p| match self.reconfigure(p).and_then(|y| self.deconfigure(&y)) {
                Ok(back) => (back - p).norm(),
                Err(_) => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        if self.ambient.is_some() {
            return Err(NeuError::Config("chains with a custom ambient map cannot be serialized".into()));
        }
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl Serialize for ReconfigChain {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.ambient.is_some() {
            return Err(serde::ser::Error::custom("chains with a custom ambient map cannot be serialized"));
        }
        ChainDocument { family: self.family, dimension: self.dim, thetas: self.thetas.clone() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ReconfigChain {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = ChainDocument::deserialize(deserializer)?;
        Self::from_thetas(doc.family, doc.dimension, doc.thetas).map_err(serde::de::Error::custom)
    }
}

pub fn reconfigure(chain: &ReconfigChain, x: &Point) -> Result<Point> {
    chain.reconfigure(x)
}

pub fn deconfigure(chain: &ReconfigChain, y: &Point) -> Result<Point> {
    chain.deconfigure(y)
}

pub fn chain_roundtrip_error(chain: &ReconfigChain, points: &[Point]) -> f64 {
    chain.roundtrip_error(points)
}
