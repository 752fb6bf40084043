//! Point clouds, rigid transforms and the two elementary operators of ICP:
//! the center of mass and the rigid mapping `p ↦ R·p + t`.
//!
//! Everything is 3D and double precision. Planar data lives at `z = 0` and
//! planar motions are rotations about the z axis.

use std::ops::Mul;

use nalgebra::{Matrix3, Point3, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};

pub type Point = Point3<f64>;
pub type Vector = Vector3<f64>;

/// Tolerance for the orthonormality and determinant checks on rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-9;
/// Tolerance on the Euclidean norm of stored normals.
pub const NORMAL_TOLERANCE: f64 = 1e-9;

/// An ordered set of points with optional per-point normals and
/// non-negative confidence weights.
///
/// Normals and weights, when present, always have one entry per point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point>,
    normals: Option<Vec<Vector>>,
    weights: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidCloud(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self {
            points,
            normals: None,
            weights: None,
        })
    }

    pub fn from_xyz<I>(coords: I) -> Result<Self>
    where
        I: IntoIterator<Item = [f64; 3]>,
    {
        Self::new(coords.into_iter().map(|[x, y, z]| Point::new(x, y, z)).collect())
    }

    pub fn with_normals(mut self, normals: Vec<Vector>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::InvalidCloud(format!(
                "{} normals for {} points",
                normals.len(),
                self.points.len()
            )));
        }
        if let Some(i) = normals
            .iter()
            .position(|n| !n.iter().all(|c| c.is_finite()) || (n.norm() - 1.0).abs() > NORMAL_TOLERANCE)
        {
            return Err(Error::InvalidCloud(format!("normal {i} is not a unit vector")));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.points.len() {
            return Err(Error::InvalidCloud(format!(
                "{} weights for {} points",
                weights.len(),
                self.points.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidCloud(format!("weight {i} is negative or non-finite")));
        }
        if !weights.is_empty() && weights.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidCloud("all weights are zero".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    pub fn without_weights(mut self) -> Self {
        self.weights = None;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector]> {
        self.normals.as_deref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    /// Weight of point `i`; 1 when the cloud carries no weights.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn normal(&self, i: usize) -> Option<&Vector> {
        self.normals.as_ref().map(|n| &n[i])
    }

    /// Sub-cloud of the given indices, attributes carried along.
    ///
    /// Weights are dropped if the selection leaves only zero weights.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let weights = self.weights.as_ref().and_then(|w| {
            let picked: Vec<f64> = indices.iter().map(|&i| w[i]).collect();
            picked.iter().any(|w| *w > 0.0).then_some(picked)
        });
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
            weights,
        }
    }

    /// True when every point has `|z| <= tol`.
    pub fn is_planar(&self, tol: f64) -> bool {
        self.points.iter().all(|p| p.z.abs() <= tol)
    }

    /// Axis-aligned bounds `(min, max)`, `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Point, Point)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }

    /// Length of the bounding-box diagonal (0 for empty or single-point clouds).
    pub fn diameter(&self) -> f64 {
        self.bounds().map_or(0.0, |(lo, hi)| (hi - lo).norm())
    }
}

/// A proper rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    /// Validates `RᵀR = I` and `det R = +1` to [`ROTATION_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|c| c.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entry".into()));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.iter().any(|e| e.abs() > ROTATION_TOLERANCE) {
            return Err(Error::InvalidTransform("rotation is not orthonormal".into()));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidTransform(format!("rotation determinant is {det}")));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::from_parts_unchecked(Matrix3::identity(), Vector::zeros())
    }

    pub fn from_translation(translation: Vector) -> Self {
        Self::from_parts_unchecked(Matrix3::identity(), translation)
    }

    pub fn from_axis_angle(axis: &Unit<Vector>, angle: f64, translation: Vector) -> Self {
        let rotation = Rotation3::from_axis_angle(axis, angle).into_inner();
        Self::from_parts_unchecked(rotation, translation)
    }

    /// Rotation by `angle` about z followed by `translation`.
    pub fn from_rotation_z(angle: f64, translation: Vector) -> Self {
        let (s, c) = angle.sin_cos();
        let rotation = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        Self::from_parts_unchecked(rotation, translation)
    }

    /// Planar pose `(x, y, heading)` embedded at `z = 0`.
    pub fn planar(x: f64, y: f64, theta: f64) -> Self {
        Self::from_rotation_z(theta, Vector::new(x, y, 0.0))
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector {
        &self.translation
    }

    #[inline]
    pub fn transform_point(&self, p: &Point) -> Point {
        Point::from(self.rotation * p.coords + self.translation)
    }

    #[inline]
    pub fn rotate_vector(&self, v: &Vector) -> Vector {
        self.rotation * v
    }

    /// Maps every point and normal; weights are kept as they are.
    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud.points.iter().map(|p| self.transform_point(p)).collect(),
            normals: cloud
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| renormalize(self.rotation * n)).collect()),
            weights: cloud.weights.clone(),
        }
    }

    /// `self ∘ other`: applying the result equals applying `other`, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        Self::from_parts_unchecked(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        Self::from_parts_unchecked(rt, -(rt * self.translation))
    }

    /// Heading of the rotation's x axis in the xy plane.
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    pub fn distance(&self, other: &RigidTransform) -> TransformDistance {
        // atan2 form of arccos((tr - 1) / 2); arccos loses all resolution below ~1e-8 rad.
        let m = self.rotation.transpose() * other.rotation;
        let cos = (m.trace() - 1.0) / 2.0;
        let sin = Vector::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm() / 2.0;
        TransformDistance {
            angle: sin.atan2(cos),
            shift: (self.translation - other.translation).norm(),
        }
    }

    /// Row-major rotation entries and translation.
    pub fn to_arrays(&self) -> ([f64; 9], [f64; 3]) {
        let r = &self.rotation;
        (
            [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            [self.translation.x, self.translation.y, self.translation.z],
        )
    }

    pub fn from_arrays(rotation: [f64; 9], translation: [f64; 3]) -> Result<Self> {
        Self::new(
            Matrix3::from_row_slice(&rotation),
            Vector::new(translation[0], translation[1], translation[2]),
        )
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

impl Mul<&RigidTransform> for &RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: &RigidTransform) -> RigidTransform {
        self.compose(rhs)
    }
}

/// Angular and translational gap between two transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformDistance {
    /// radians, in `[0, π]`
    pub angle: f64,
    /// meters
    pub shift: f64,
}

impl TransformDistance {
    pub fn within(&self, angle: f64, shift: f64) -> bool {
        self.angle < angle && self.shift < shift
    }
}

fn renormalize(v: Vector) -> Vector {
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        v
    }
}

/// Nearest proper rotation to `m` in the Frobenius sense.
pub fn project_to_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u * v_t).determinant().signum();
    u * Matrix3::from_diagonal(&Vector::new(1.0, 1.0, d)) * v_t
}

/// Center of mass; the weighted mean when the cloud carries weights.
pub fn centroid(cloud: &PointCloud) -> Result<Point> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let (sum, total) = cloud
        .points
        .iter()
        .enumerate()
        .fold((Vector::zeros(), 0.0), |(acc, total), (i, p)| {
            let w = cloud.weight(i);
            (acc + p.coords * w, total + w)
        });
    Ok(Point::from(sum / total))
}

pub fn apply(transform: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    transform.apply(cloud)
}

pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

pub fn transform_distance(a: &RigidTransform, b: &RigidTransform) -> TransformDistance {
    a.distance(b)
}
