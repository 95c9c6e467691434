use crate::{GeometryError, Result};
use nalgebra::Matrix3;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const SINGULAR_TOL: f64 = 1e-12;

/// 3x3 projective transform between image planes. Scale-normalized so the
/// bottom-right entry is 1 whenever it is nonzero; serialized as 9 numbers
/// row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::Degenerate(
                "homography entries must be finite".into(),
            ));
        }
        let det = matrix.determinant();
        let scale = matrix.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if det.abs() <= SINGULAR_TOL * scale.powi(3).max(f64::MIN_POSITIVE) {
            return Err(GeometryError::Singular(format!("determinant {det}")));
        }
        let mut m = matrix;
        let corner = m[(2, 2)];
        if corner.abs() > SINGULAR_TOL * scale {
            m /= corner;
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self(Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .0
            .try_inverse()
            .ok_or_else(|| GeometryError::Singular("inverse".into()))?;
        Self::new(inv)
    }

    /// Applies the transform and performs the perspective divide.
    pub fn project(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let v = self.0 * nalgebra::Vector3::new(p[0], p[1], 1.0);
        let scale = v[0].abs().max(v[1].abs()).max(1.0);
        if v[2].abs() <= 1e-12 * scale {
            return Err(GeometryError::PointAtInfinity);
        }
        Ok([v[0] / v[2], v[1] / v[2]])
    }

    /// Homography composition: `self` applied after `other`.
    pub fn compose(&self, other: &Homography) -> Result<Self> {
        Self::new(self.0 * other.0)
    }

    /// Row-major flattening, the wire format.
    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn from_row_major(values: [f64; 9]) -> Result<Self> {
        Self::new(Matrix3::new(
            values[0], values[1], values[2], values[3], values[4], values[5], values[6],
            values[7], values[8],
        ))
    }
}

impl Serialize for Homography {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_row_major().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Homography {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let values = <[f64; 9]>::deserialize(deserializer)?;
        Homography::from_row_major(values).map_err(D::Error::custom)
    }
}
