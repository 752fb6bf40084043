//! Rigid-motion solvers for known correspondences.
//!
//! * [`solve_point_to_point`]: closed form, SVD of the weighted
//!   cross-covariance with reflection correction.
//! * [`solve_point_to_plane`]: one linearized least-squares step on the
//!   residual projected onto destination normals.
//! * [`solve_point_to_line_2d`]: the planar analogue, projecting onto the
//!   normals of destination line directions.
//!
//! Point weights of both clouds multiply each pair's squared residual.

use nalgebra::{Matrix2, Matrix3, Matrix6, SymmetricEigen, Vector2, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correspondence::{CorrespondenceSet, SpatialIndex};
use crate::error::{Error, Result};
use crate::geometry::{project_to_rotation, Point, PointCloud, RigidTransform, Vector};

/// Linear systems with a larger eigenvalue ratio are treated as rank deficient.
pub const CONDITION_LIMIT: f64 = 1e12;
/// `|z|` tolerance for treating data as planar.
pub const PLANAR_TOLERANCE: f64 = 1e-9;
/// Neighborhoods whose `sqrt(λ_min / λ_max)` exceeds this are not line-like.
pub const DEFAULT_LINE_FLATNESS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    PointToPoint,
    PointToPlane,
    PointToLine,
}

/// Unit in-plane direction of the local line through a destination point,
/// or `None` where the neighborhood is not line-like.
pub type LineDirection = Option<Vector2<f64>>;

#[inline]
fn pair_weight(source: &PointCloud, dest: &PointCloud, i: usize, j: usize) -> f64 {
    source.weight(i) * dest.weight(j)
}

/// Closed-form minimizer of `Σ w‖d_j − R·s_i − t‖²` over proper rigid motions.
///
/// When every matched point lies on `z = 0` the rotation is restricted to
/// the z axis, so planar data always yields a planar motion.
pub fn solve_point_to_point(
    source: &PointCloud,
    dest: &PointCloud,
    corr: &CorrespondenceSet,
) -> Result<RigidTransform> {
    if corr.len() < 3 {
        return Err(Error::TooFewPairs {
            needed: 3,
            got: corr.len(),
        });
    }

    let mut total = 0.0;
    let mut src_sum = Vector::zeros();
    let mut dst_sum = Vector::zeros();
    let mut planar = true;
    for c in corr {
        let w = pair_weight(source, dest, c.source, c.dest);
        let (s, d) = (source.point(c.source), dest.point(c.dest));
        planar &= s.z.abs() <= PLANAR_TOLERANCE && d.z.abs() <= PLANAR_TOLERANCE;
        total += w;
        src_sum += s.coords * w;
        dst_sum += d.coords * w;
    }
    if total <= 0.0 {
        return Err(Error::DegenerateGeometry("all matched pairs have zero weight".into()));
    }
    let src_mean = src_sum / total;
    let dst_mean = dst_sum / total;

    let mut scatter = Matrix3::zeros();
    let mut cross = Matrix3::zeros();
    let mut spread = 0.0;
    for c in corr {
        let w = pair_weight(source, dest, c.source, c.dest);
        let s = source.point(c.source).coords - src_mean;
        let d = dest.point(c.dest).coords - dst_mean;
        scatter += s * s.transpose() * w;
        cross += s * d.transpose() * w;
        spread += w * source.point(c.source).coords.norm_squared();
    }
    check_source_spread(&scatter, spread / total)?;

    let rotation = if planar {
        let sin = cross[(0, 1)] - cross[(1, 0)];
        let cos = cross[(0, 0)] + cross[(1, 1)];
        if sin == 0.0 && cos == 0.0 {
            return Err(Error::DegenerateGeometry("matched destination points coincide".into()));
        }
        let (s, c) = sin.atan2(cos).sin_cos();
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    } else {
        let svd = cross.svd(true, true);
        let sv = svd.singular_values;
        if sv[0] <= 0.0 || sv[1] <= sv[0] / CONDITION_LIMIT {
            return Err(Error::DegenerateGeometry(
                "cross-covariance has rank below 2; rotation is not unique".into(),
            ));
        }
        let u = svd.u.expect("requested U");
        let v = svd.v_t.expect("requested Vᵀ").transpose();
        let reflect = (v * u.transpose()).determinant().signum();
        v * Matrix3::from_diagonal(&Vector::new(1.0, 1.0, reflect)) * u.transpose()
    };

    let translation = dst_mean - rotation * src_mean;
    Ok(RigidTransform::from_parts_unchecked(rotation, translation))
}

/// Rejects matched source sets that are coincident or collinear.
fn check_source_spread(scatter: &Matrix3<f64>, mean_square_norm: f64) -> Result<()> {
    let mut ev: Vec<f64> = SymmetricEigen::new(*scatter).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let floor = 1e-24 * mean_square_norm.max(f64::MIN_POSITIVE);
    if ev[0] <= floor {
        return Err(Error::DegenerateGeometry("matched source points coincide".into()));
    }
    if ev[1] <= ev[0] / CONDITION_LIMIT {
        return Err(Error::DegenerateGeometry("matched source points are collinear".into()));
    }
    Ok(())
}

/// One Gauss-Newton step on `Σ w (n_jᵀ(R·s_i + t − d_j))²` with
/// `R ≈ I + [ω]×` about the source centroid, projected back onto SO(3).
pub fn solve_point_to_plane(
    source: &PointCloud,
    dest: &PointCloud,
    corr: &CorrespondenceSet,
) -> Result<RigidTransform> {
    let normals = dest.normals().ok_or(Error::MissingNormals)?;
    if corr.len() < 6 {
        return Err(Error::TooFewPairs {
            needed: 6,
            got: corr.len(),
        });
    }

    let (mut total, mut center) = (0.0, Vector::zeros());
    for c in corr {
        let w = pair_weight(source, dest, c.source, c.dest);
        total += w;
        center += source.point(c.source).coords * w;
    }
    if total <= 0.0 {
        return Err(Error::DegenerateGeometry("all matched pairs have zero weight".into()));
    }
    center /= total;

    let mut normal_matrix = Matrix6::zeros();
    let mut rhs = Vector6::zeros();
    for c in corr {
        let w = pair_weight(source, dest, c.source, c.dest);
        let s = source.point(c.source).coords;
        let n = normals[c.dest];
        let lever = (s - center).cross(&n);
        let jac = Vector6::new(lever.x, lever.y, lever.z, n.x, n.y, n.z);
        let r = n.dot(&(s - dest.point(c.dest).coords));
        normal_matrix += jac * jac.transpose() * w;
        rhs -= jac * (r * w);
    }

    let eig = SymmetricEigen::new(normal_matrix);
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if hi <= 0.0 || lo <= hi / CONDITION_LIMIT {
        return Err(Error::DegenerateGeometry(format!(
            "point-to-plane system is rank deficient (eigenvalues {lo:.3e}..{hi:.3e})"
        )));
    }
    let x = eig.eigenvectors
        * Matrix6::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e))
        * eig.eigenvectors.transpose()
        * rhs;

    let omega = Vector::new(x[0], x[1], x[2]);
    let step = Vector::new(x[3], x[4], x[5]);
    let rotation = project_to_rotation(&(Matrix3::identity() + omega.cross_matrix()));
    let translation = center + step - rotation * center;
    Ok(RigidTransform::from_parts_unchecked(rotation, translation))
}

/// Result of a point-to-line step.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFit {
    pub transform: RigidTransform,
    /// Unit directions in `(angle, x, y)` parameter space that the data leave
    /// unconstrained. The returned step has no component along them.
    pub unconstrained: Vec<[f64; 3]>,
}

impl LineFit {
    pub fn is_fully_constrained(&self) -> bool {
        self.unconstrained.is_empty()
    }
}

/// One linearized step on `Σ w (m_jᵀ(R·s_i + t − d_j))²` for planar clouds,
/// `m_j` the unit normal of the destination line through `d_j`.
///
/// Pairs whose destination has no line direction are ignored. A rank
/// deficient system (a single straight wall, say) is solved in the least
/// norm sense and the free directions are reported in the returned
/// [`LineFit`]; only a system with no information at all is an error.
pub fn solve_point_to_line_2d(
    source: &PointCloud,
    dest: &PointCloud,
    corr: &CorrespondenceSet,
    dest_lines: &[LineDirection],
) -> Result<LineFit> {
    if !source.is_planar(PLANAR_TOLERANCE) || !dest.is_planar(PLANAR_TOLERANCE) {
        return Err(Error::NotPlanar);
    }
    if dest_lines.len() != dest.len() {
        return Err(Error::Precondition(format!(
            "{} line directions for {} destination points",
            dest_lines.len(),
            dest.len()
        )));
    }
    let usable: Vec<_> = corr
        .iter()
        .filter_map(|c| dest_lines[c.dest].map(|dir| (c, Vector2::new(-dir.y, dir.x))))
        .collect();
    if usable.len() < 3 {
        return Err(Error::TooFewPairs {
            needed: 3,
            got: usable.len(),
        });
    }

    let (mut total, mut center) = (0.0, Vector2::zeros());
    for (c, _) in &usable {
        let w = pair_weight(source, dest, c.source, c.dest);
        total += w;
        center += source.point(c.source).xy().coords * w;
    }
    if total <= 0.0 {
        return Err(Error::DegenerateGeometry("all matched pairs have zero weight".into()));
    }
    center /= total;

    let mut normal_matrix = Matrix3::zeros();
    let mut rhs = Vector::zeros();
    for (c, m) in &usable {
        let w = pair_weight(source, dest, c.source, c.dest);
        let s = source.point(c.source).xy().coords;
        let d = dest.point(c.dest).xy().coords;
        let arm = s - center;
        let jac = Vector::new(m.dot(&Vector2::new(-arm.y, arm.x)), m.x, m.y);
        let r = m.dot(&(s - d));
        normal_matrix += jac * jac.transpose() * w;
        rhs -= jac * (r * w);
    }

    let eig = SymmetricEigen::new(normal_matrix);
    let hi = eig.eigenvalues.max();
    if hi <= 0.0 {
        return Err(Error::DegenerateGeometry("point-to-line system carries no information".into()));
    }
    let mut unconstrained = Vec::new();
    let mut x = Vector::zeros();
    for k in 0..3 {
        let e = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k).into_owned();
        if e <= hi / CONDITION_LIMIT {
            unconstrained.push([v.x, v.y, v.z]);
        } else {
            x += v * (v.dot(&rhs) / e);
        }
    }

    let angle = x[0];
    let rotation = Matrix2::new(angle.cos(), -angle.sin(), angle.sin(), angle.cos());
    let shift = center + Vector2::new(x[1], x[2]) - rotation * center;
    let transform = RigidTransform::from_rotation_z(angle, Vector::new(shift.x, shift.y, 0.0));
    Ok(LineFit {
        transform,
        unconstrained,
    })
}

/// Copy of `cloud` with normals from a PCA of each point's `k` nearest
/// neighbors, oriented toward `viewpoint`.
pub fn estimate_normals(cloud: &PointCloud, k: usize, viewpoint: &Point) -> Result<PointCloud> {
    if k < 3 || cloud.len() < k {
        return Err(Error::TooFewPoints {
            needed: k.max(3),
            got: cloud.len(),
        });
    }
    let index = SpatialIndex::build(cloud)?;
    let normals: Vec<Vector> = cloud
        .points()
        .par_iter()
        .map(|p| {
            let neighbors = index.knn(p, k);
            let mean = neighbors
                .iter()
                .fold(Vector::zeros(), |acc, &(i, _)| acc + cloud.point(i).coords)
                / neighbors.len() as f64;
            let cov = neighbors.iter().fold(Matrix3::zeros(), |acc, &(i, _)| {
                let d = cloud.point(i).coords - mean;
                acc + d * d.transpose()
            });
            let eig = SymmetricEigen::new(cov);
            let n = eig.eigenvectors.column(eig.eigenvalues.imin()).normalize();
            if n.dot(&(viewpoint - p)) < 0.0 {
                -n
            } else {
                n
            }
        })
        .collect();
    cloud.clone().with_normals(normals)
}

/// Local line directions of a planar cloud from its `k` nearest neighbors,
/// with the default flatness gate.
pub fn estimate_line_directions(cloud: &PointCloud, k: usize) -> Result<Vec<LineDirection>> {
    estimate_line_directions_with(cloud, k, DEFAULT_LINE_FLATNESS)
}

/// As [`estimate_line_directions`], rejecting neighborhoods whose
/// `sqrt(λ_min / λ_max)` exceeds `max_flatness`.
pub fn estimate_line_directions_with(
    cloud: &PointCloud,
    k: usize,
    max_flatness: f64,
) -> Result<Vec<LineDirection>> {
    if k < 2 || cloud.len() < k {
        return Err(Error::TooFewPoints {
            needed: k.max(2),
            got: cloud.len(),
        });
    }
    if !cloud.is_planar(PLANAR_TOLERANCE) {
        return Err(Error::NotPlanar);
    }
    let index = SpatialIndex::build(cloud)?;
    Ok(cloud
        .points()
        .par_iter()
        .map(|p| {
            let neighbors = index.knn(p, k);
            let mean = neighbors
                .iter()
                .fold(Vector2::zeros(), |acc, &(i, _)| acc + cloud.point(i).xy().coords)
                / neighbors.len() as f64;
            let cov = neighbors.iter().fold(Matrix2::zeros(), |acc, &(i, _)| {
                let d = cloud.point(i).xy().coords - mean;
                acc + d * d.transpose()
            });
            let eig = SymmetricEigen::new(cov);
            let (major, minor) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
            let (hi, lo) = (eig.eigenvalues[major], eig.eigenvalues[minor].max(0.0));
            if hi <= 0.0 || lo > max_flatness * max_flatness * hi {
                return None;
            }
            Some(eig.eigenvectors.column(major).normalize())
        })
        .collect())
}
