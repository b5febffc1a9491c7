//! Skew-symmetric generators and their exponentials.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{NeuError, Result};

const SKEW_TOL: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-10;

/// A `D x D` matrix with `A + A^T = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix(DMatrix<f64>);

impl SkewMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(NeuError::Domain(format!(
                "skew matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(NeuError::Domain("skew matrix has non-finite entries".into()));
        }
        let scale = entries.amax().max(1.0);
        let n = entries.nrows();
        for i in 0..n {
            for j in i..n {
                if (entries[(i, j)] + entries[(j, i)]).abs() > SKEW_TOL * scale {
                    return Err(NeuError::Domain(format!(
                        "matrix is not skew-symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    /// Builds from the strictly upper triangular entries in row-major order.
    pub fn from_upper(dim: usize, upper: &[f64]) -> Result<Self> {
        let expected = dim * dim.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(NeuError::DimensionMismatch { expected, got: upper.len() });
        }
        let mut m = DMatrix::zeros(dim, dim);
        let mut k = 0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                m[(i, j)] = upper[k];
                m[(j, i)] = -upper[k];
                k += 1;
            }
        }
        Self::new(m)
    }

    /// `t * (e_j e_i^T - e_i e_j^T)`: rotates `e_i` towards `e_j` at rate `t`.
    pub fn plane(dim: usize, i: usize, j: usize, t: f64) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(j, i)] = t;
        m[(i, j)] = -t;
        Self(m)
    }

    /// `t * (w u^T - u w^T)` for orthonormal `u`, `w`.
    pub fn from_plane_vectors(u: &DVector<f64>, w: &DVector<f64>, t: f64) -> Self {
        Self((w * u.transpose() - u * w.transpose()) * t)
    }

    pub fn upper(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }
}

impl Serialize for SkewMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = self.0.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SkewMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(deserializer)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("skew matrix rows must form a square"));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        SkewMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// Element of `SO(D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix(DMatrix<f64>);

impl RotationMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(NeuError::Domain("rotation matrix must be square".into()));
        }
        let n = entries.nrows();
        let gram = entries.transpose() * &entries;
        let err = (gram - DMatrix::<f64>::identity(n, n)).amax();
        if err > ORTHO_TOL {
            return Err(NeuError::Numerical(format!("R^T R deviates from I by {err:e}")));
        }
        let det = entries.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(NeuError::Numerical(format!("det(R) = {det}, expected 1")));
        }
        Ok(Self(entries))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Matrix exponential of a skew generator.
///
/// Closed forms for `D = 2` (planar rotation) and `D = 3` (Rodrigues);
/// scaling and squaring with a diagonal Pade approximant otherwise.
pub fn mat_exp(a: &SkewMatrix) -> Result<RotationMatrix> {
    let m = a.matrix();
    let out = match a.dim() {
        0 => DMatrix::zeros(0, 0),
        1 => DMatrix::identity(1, 1),
        2 => planar_exp(m[(1, 0)]),
        3 => rodrigues(m),
        _ => pade_exp(m),
    };
    RotationMatrix::new(out)
}

fn planar_exp(angle: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

fn rodrigues(m: &DMatrix<f64>) -> DMatrix<f64> {
    // axis w with m v = w x v
    let w = [m[(2, 1)], m[(0, 2)], m[(1, 0)]];
    let theta = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let eye = DMatrix::<f64>::identity(3, 3);
    if theta == 0.0 {
        return eye;
    }
    let m2 = m * m;
    let (a, b) = if theta < 1e-4 {
        // Taylor coefficients of sin(t)/t and (1-cos t)/t^2
        let t2 = theta * theta;
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    eye + m * a + m2 * b
}

const PADE_COEFFS: [f64; 7] = [
    1.0,
    0.5,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

/// Degree-6 diagonal Pade approximant with scaling to norm <= 1/2.
pub(crate) fn pade_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = m / 2f64.powi(squarings);
    let eye = DMatrix::<f64>::identity(n, n);
    let mut num = eye.clone() * PADE_COEFFS[0];
    let mut den = eye.clone() * PADE_COEFFS[0];
    let mut power = eye;
    for (k, c) in PADE_COEFFS.iter().enumerate().skip(1) {
        power = &power * &scaled;
        num += &power * *c;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        den += &power * (*c * sign);
    }
    let mut result = den.lu().solve(&num).expect("Pade denominator is nonsingular for small norms");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Precomputed action `v -> exp(s X) v` for a fixed generator and varying `s`.
///
/// For `D = 2` the angle is read off directly. For larger `D` the generator is
/// brought to real Schur form `X = Q B Q^T` with `B` block diagonal, so each
/// application costs two matrix-vector products plus planar rotations.
#[derive(Debug, Clone)]
pub(crate) enum ExpAction {
    Planar(f64),
    Blocks { q: DMatrix<f64>, blocks: Vec<(usize, f64)> },
    Dense(DMatrix<f64>),
}

impl ExpAction {
    pub(crate) fn new(x: &SkewMatrix) -> Self {
        let m = x.matrix();
        let n = x.dim();
        if n == 2 {
            return Self::Planar(m[(1, 0)]);
        }
        if n < 2 || x.is_zero() {
            return Self::Blocks { q: DMatrix::identity(n, n), blocks: Vec::new() };
        }
        match m.clone().try_schur(1e-15, 10_000) {
            Some(schur) => {
                let (q, t) = schur.unpack();
                let mut blocks = Vec::new();
                let scale = m.amax();
                let mut i = 0;
                while i < n {
                    if i + 1 < n && t[(i + 1, i)].abs() > 1e-14 * scale {
                        blocks.push((i, 0.5 * (t[(i + 1, i)] - t[(i, i + 1)])));
                        i += 2;
                    } else {
                        i += 1;
                    }
                }
                let mut b = DMatrix::zeros(n, n);
                for &(i, w) in &blocks {
                    b[(i + 1, i)] = w;
                    b[(i, i + 1)] = -w;
                }
                let recon = &q * b * q.transpose();
                if (recon - m).amax() <= 1e-11 * scale.max(1.0) {
                    Self::Blocks { q, blocks }
                } else {
                    Self::Dense(m.clone())
                }
            }
            None => Self::Dense(m.clone()),
        }
    }

    pub(crate) fn apply(&self, s: f64, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Planar(t) => {
                let (sn, cs) = (s * t).sin_cos();
                DVector::from_vec(vec![cs * v[0] - sn * v[1], sn * v[0] + cs * v[1]])
            }
            Self::Blocks { q, blocks } => {
                if blocks.is_empty() {
                    return v.clone();
                }
                let mut w = q.tr_mul(v);
                for &(i, omega) in blocks {
                    let (sn, cs) = (s * omega).sin_cos();
                    let (a, b) = (w[i], w[i + 1]);
                    w[i] = cs * a - sn * b;
                    w[i + 1] = sn * a + cs * b;
                }
                q * w
            }
            Self::Dense(m) => pade_exp(&(m * s)) * v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn rejects_non_skew() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(SkewMatrix::new(m).is_err());
        let m = DMatrix::from_row_slice(2, 3, &[0.0; 6]);
        assert!(SkewMatrix::new(m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[0.0, f64::NAN, 0.0, 0.0]);
        assert!(SkewMatrix::new(m).is_err());
    }

    #[test]
    fn zero_maps_to_identity() {
        for d in 1..=6 {
            let r = mat_exp(&SkewMatrix::zeros(d)).unwrap();
            assert_eq!(r.matrix(), &DMatrix::<f64>::identity(d, d));
        }
    }

    #[test]
    fn quarter_turn() {
        let a = SkewMatrix::plane(2, 0, 1, FRAC_PI_2);
        let r = mat_exp(&a).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((r.matrix() - expected).amax() < 1e-15);
    }

    #[test]
    fn upper_round_trip() {
        let a = SkewMatrix::from_upper(4, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(a.upper(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(a.matrix()[(3, 2)], -6.0);
        assert!(SkewMatrix::from_upper(4, &[1.0]).is_err());
    }

    #[test]
    fn rodrigues_small_angle_branch_matches_pade() {
        let a = SkewMatrix::from_upper(3, &[1e-6, -2e-6, 3e-7]).unwrap();
        let r = mat_exp(&a).unwrap();
        assert!((r.matrix() - pade_exp(a.matrix())).amax() < 1e-15);
    }

    #[test]
    fn action_matches_dense_exponential() {
        let a = SkewMatrix::from_upper(5, &[0.3, -1.2, 0.7, 2.0, 0.1, -0.4, 1.5, 0.9, -2.2, 0.6]).unwrap();
        let action = ExpAction::new(&a);
        assert!(matches!(action, ExpAction::Blocks { .. }));
        let v = DVector::from_vec(vec![0.2, -1.0, 0.5, 0.3, 0.9]);
        for s in [0.0, 0.1, 0.37, 1.0] {
            let dense = pade_exp(&(a.matrix() * s)) * &v;
            assert!((action.apply(s, &v) - dense).amax() < 1e-13);
        }
    }

    #[test]
    fn rotation_rejects_reflection() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(RotationMatrix::new(m).is_err());
    }
}
