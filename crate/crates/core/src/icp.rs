//! The iterative closest point driver.
//!
//! One run:
//!
//! 1. optionally translate the source so both centers of mass coincide,
//! 2. match the current source against the destination,
//! 3. solve for the increment with the configured metric and apply it,
//! 4. re-match and record the error `ε` of the updated state,
//! 5. repeat while `ε > θ₀` and the last step lowered `ε` by more than
//!    `min_decrease`, up to `max_iterations`.
//!
//! With `pyramid_levels > 1` the loop runs to termination on successively
//! finer voxel-downsampled copies of both clouds, each level warm-started
//! from the previous one.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::{
    estimate_line_directions_with, solve_point_to_line_2d, solve_point_to_plane, solve_point_to_point,
    LineDirection, MetricKind, DEFAULT_LINE_FLATNESS, PLANAR_TOLERANCE,
};
use crate::correspondence::{match_points, CorrespondenceSet, RejectionPolicy, SpatialIndex};
use crate::error::{Error, Result};
use crate::geometry::{centroid, PointCloud, RigidTransform};

/// Voxel size of the first pyramid level, as a fraction of the bounding-box diagonal.
pub const PYRAMID_BASE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpConfig {
    pub metric: MetricKind,
    /// Convergence threshold on `ε` (m²).
    pub theta0: f64,
    pub max_iterations: usize,
    /// Smallest drop in `ε` (m²) that still counts as a decrease.
    pub min_decrease: f64,
    pub rejection: RejectionPolicy,
    pub align_centroids_first: bool,
    /// Fraction of source points kept, drawn once per run from `seed`.
    pub subsample_fraction: f64,
    /// 0 or 1 disables the coarse-to-fine schedule.
    pub pyramid_levels: usize,
    pub seed: u64,
    /// Neighborhood size for destination line directions (point-to-line).
    pub line_neighbors: usize,
    /// Largest minor/major spread ratio still accepted as a line.
    pub line_flatness: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            metric: MetricKind::PointToPoint,
            theta0: 1e-10,
            max_iterations: 100,
            min_decrease: 1e-12,
            rejection: RejectionPolicy::default(),
            align_centroids_first: true,
            subsample_fraction: 1.0,
            pyramid_levels: 0,
            seed: 0,
            line_neighbors: 7,
            line_flatness: DEFAULT_LINE_FLATNESS,
        }
    }
}

impl IcpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.theta0 >= 0.0) {
            return bad("theta0 must be >= 0");
        }
        if !(self.min_decrease >= 0.0) {
            return bad("min_decrease must be >= 0");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1");
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return bad("subsample_fraction must be in (0, 1]");
        }
        if self.line_neighbors < 2 {
            return bad("line_neighbors must be >= 2");
        }
        if !(self.line_flatness >= 0.0) {
            return bad("line_flatness must be >= 0");
        }
        self.rejection.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// `ε ≤ θ₀`.
    Converged,
    /// `ε` stopped decreasing while still above `θ₀`.
    Stalled,
    MaxIterations,
    /// Rejection emptied the correspondence set.
    NoCorrespondences,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Cumulative source → destination transform, initialization included.
    pub transform: RigidTransform,
    /// `ε` after every iteration, all pyramid levels concatenated.
    pub error_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// Final pairs, indexed into the original (not subsampled) source.
    pub final_correspondences: CorrespondenceSet,
}

impl IcpResult {
    pub fn final_error(&self) -> Option<f64> {
        self.error_trace.last().copied()
    }
}

/// Mean squared point-to-point residual over `corr`, the source already transformed.
pub fn residual_error(
    source_transformed: &PointCloud,
    dest: &PointCloud,
    corr: &CorrespondenceSet,
) -> Result<f64> {
    if corr.is_empty() {
        return Err(Error::NoCorrespondences);
    }
    let sum: f64 = corr
        .iter()
        .map(|c| (source_transformed.point(c.source) - dest.point(c.dest)).norm_squared())
        .sum();
    Ok(sum / corr.len() as f64)
}

/// Mean squared residual in the metric being minimized: the full residual
/// for point-to-point, its projection on the destination normal or line
/// normal otherwise. `None` when no pair can be evaluated.
fn metric_error(
    metric: MetricKind,
    source: &PointCloud,
    dest: &PointCloud,
    corr: &CorrespondenceSet,
    lines: &[LineDirection],
) -> Option<f64> {
    match metric {
        MetricKind::PointToPoint => residual_error(source, dest, corr).ok(),
        MetricKind::PointToPlane => {
            let normals = dest.normals()?;
            mean(corr.iter().map(|c| {
                normals[c.dest]
                    .dot(&(source.point(c.source) - dest.point(c.dest)))
                    .powi(2)
            }))
        }
        MetricKind::PointToLine => mean(corr.iter().filter_map(|c| {
            let dir = lines[c.dest]?;
            let r = source.point(c.source) - dest.point(c.dest);
            Some((dir.x * r.y - dir.y * r.x).powi(2))
        })),
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn solve_step(
    metric: MetricKind,
    source: &PointCloud,
    dest: &PointCloud,
    corr: &CorrespondenceSet,
    lines: &[LineDirection],
) -> Result<RigidTransform> {
    match metric {
        MetricKind::PointToPoint => solve_point_to_point(source, dest, corr),
        MetricKind::PointToPlane => solve_point_to_plane(source, dest, corr),
        MetricKind::PointToLine => solve_point_to_line_2d(source, dest, corr, lines).map(|f| f.transform),
    }
}

/// Registers `source` onto `dest`.
pub fn run_icp(source: &PointCloud, dest: &PointCloud, config: &IcpConfig) -> Result<IcpResult> {
    run_icp_from(source, dest, config, None)
}

/// As [`run_icp`], starting from `initial` instead of the centroid or
/// identity initialization when one is given.
pub fn run_icp_from(
    source: &PointCloud,
    dest: &PointCloud,
    config: &IcpConfig,
    initial: Option<RigidTransform>,
) -> Result<IcpResult> {
    config.validate()?;
    if source.is_empty() || dest.is_empty() {
        return Err(Error::EmptyCloud);
    }
    match config.metric {
        MetricKind::PointToPlane if dest.normals().is_none() => return Err(Error::MissingNormals),
        MetricKind::PointToLine
            if !source.is_planar(PLANAR_TOLERANCE) || !dest.is_planar(PLANAR_TOLERANCE) =>
        {
            return Err(Error::NotPlanar)
        }
        _ => {}
    }

    let start = match initial {
        Some(t) => t,
        None if config.align_centroids_first => {
            RigidTransform::from_translation(centroid(dest)? - centroid(source)?)
        }
        None => RigidTransform::identity(),
    };

    let kept = subsample_indices(source.len(), config.subsample_fraction, config.seed);
    let working = match &kept {
        Some(idx) => source.select(idx),
        None => source.clone(),
    };

    let levels = config.pyramid_levels.max(1);
    let source_levels = build_pyramid(&working, levels)?;
    let dest_levels = build_pyramid(dest, levels)?;

    let mut transform = start;
    let mut error_trace = Vec::new();
    let mut last = None;
    for level in (0..levels).rev() {
        let outcome = register_level(&source_levels[level], &dest_levels[level], config, transform);
        let outcome = match outcome {
            Ok(o) => o,
            // coarse levels may be too sparse for the metric; the finest decides
            Err(_) if level > 0 => continue,
            Err(e) => return Err(e),
        };
        transform = outcome.transform;
        error_trace.extend_from_slice(&outcome.error_trace);
        last = Some(outcome);
    }
    let last = last.expect("finest level always yields an outcome");

    let final_correspondences = match &kept {
        Some(idx) => CorrespondenceSet::new(
            last.correspondences
                .iter()
                .map(|c| crate::correspondence::Correspondence {
                    source: idx[c.source],
                    ..*c
                })
                .collect(),
        ),
        None => last.correspondences,
    };

    Ok(IcpResult {
        transform,
        iterations: error_trace.len(),
        error_trace,
        termination: last.termination,
        final_correspondences,
    })
}

struct LevelOutcome {
    transform: RigidTransform,
    error_trace: Vec<f64>,
    termination: Termination,
    correspondences: CorrespondenceSet,
}

fn register_level(
    source: &PointCloud,
    dest: &PointCloud,
    config: &IcpConfig,
    start: RigidTransform,
) -> Result<LevelOutcome> {
    let index = SpatialIndex::build(dest)?;
    let lines = match config.metric {
        MetricKind::PointToLine => {
            estimate_line_directions_with(dest, config.line_neighbors.min(dest.len()), config.line_flatness)?
        }
        _ => Vec::new(),
    };

    let mut transform = start;
    let mut current = transform.apply(source);
    let mut error_trace = Vec::new();
    let mut corr = match match_points(&current, &index, config.rejection) {
        Ok(c) => c,
        Err(Error::NoCorrespondences) => {
            return Ok(LevelOutcome {
                transform,
                error_trace,
                termination: Termination::NoCorrespondences,
                correspondences: CorrespondenceSet::default(),
            })
        }
        Err(e) => return Err(e),
    };

    let mut previous = f64::INFINITY;
    let termination = loop {
        if error_trace.len() >= config.max_iterations {
            break Termination::MaxIterations;
        }
        let step = solve_step(config.metric, &current, dest, &corr, &lines)?;
        let candidate = step * transform;
        let moved = candidate.apply(source);
        let rematched = match match_points(&moved, &index, config.rejection) {
            Ok(c) => c,
            Err(Error::NoCorrespondences) => break Termination::NoCorrespondences,
            Err(e) => return Err(e),
        };
        let Some(eps) = metric_error(config.metric, &moved, dest, &rematched, &lines) else {
            break Termination::NoCorrespondences;
        };
        transform = candidate;
        current = moved;
        corr = rematched;
        error_trace.push(eps);

        if eps <= config.theta0 {
            break Termination::Converged;
        }
        if !(previous - eps > config.min_decrease) {
            break Termination::Stalled;
        }
        previous = eps;
    };

    Ok(LevelOutcome {
        transform,
        error_trace,
        termination,
        correspondences: corr,
    })
}

fn subsample_indices(n: usize, fraction: f64, seed: u64) -> Option<Vec<usize>> {
    if fraction >= 1.0 {
        return None;
    }
    let keep = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, keep).into_vec();
    idx.sort_unstable();
    Some(idx)
}

/// Keeps the lowest-index point of every occupied `cell`-sized voxel,
/// with its normal and weight, in original order.
pub fn voxel_downsample(cloud: &PointCloud, cell: f64) -> PointCloud {
    let Some((lo, _)) = cloud.bounds() else {
        return cloud.clone();
    };
    if !(cell > 0.0) {
        return cloud.select(&[0]);
    }
    let mut first: HashMap<[i64; 3], usize> = HashMap::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let key = [0, 1, 2].map(|a| ((p[a] - lo[a]) / cell).floor() as i64);
        first.entry(key).or_insert(i);
    }
    let mut keep: Vec<usize> = first.into_values().collect();
    keep.sort_unstable();
    cloud.select(&keep)
}

/// Level 0 is `cloud`; level `k ≥ 1` is a voxel downsample with cell
/// `diameter / 100 · 2^(k−1)`. Index by level; consumers go coarsest first.
pub fn build_pyramid(cloud: &PointCloud, levels: usize) -> Result<Vec<PointCloud>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if levels == 0 {
        return Err(Error::InvalidConfig("pyramid needs at least one level".into()));
    }
    let base = cloud.diameter() * PYRAMID_BASE_FRACTION;
    let mut out = vec![cloud.clone()];
    for k in 1..levels {
        out.push(voxel_downsample(cloud, base * f64::powi(2.0, k as i32 - 1)));
    }
    Ok(out)
}
