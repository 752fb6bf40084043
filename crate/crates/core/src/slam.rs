//! Synthetic 2D scan-matching SLAM.
//!
//! A simulated range sensor sweeps a world of wall segments from each pose
//! of a ground-truth trajectory. Pose estimation registers every scan onto
//! the previous one and chains the increments; loop closure re-registers a
//! scan against an earlier keyframe it revisits and spreads the correction
//! linearly over the frames in between. The offline mode adds one refinement
//! pass over the stored keyframes.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::alignment::MetricKind;
use crate::correspondence::RejectionPolicy;
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RigidTransform, Vector};
use crate::icp::{run_icp_from, IcpConfig, IcpResult, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Segment {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { a: [x1, y1], b: [x2, y2] }
    }

    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }

    /// Ray parameter `t > 0` of the hit from `origin` along unit `dir`.
    fn intersect(&self, origin: [f64; 2], dir: [f64; 2]) -> Option<f64> {
        let e = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let denom = dir[0] * e[1] - dir[1] * e[0];
        if denom == 0.0 {
            return None;
        }
        let w = [self.a[0] - origin[0], self.a[1] - origin[1]];
        let t = (w[0] * e[1] - w[1] * e[0]) / denom;
        let s = (w[0] * dir[1] - w[1] * dir[0]) / denom;
        (t > 1e-12 && (0.0..=1.0).contains(&s)).then_some(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub x: f64,
    pub y: f64,
    /// Registration weight given to returns near this landmark; > 1.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    walls: Vec<Segment>,
    landmarks: Vec<Landmark>,
}

impl World {
    pub fn new(walls: Vec<Segment>, landmarks: Vec<Landmark>) -> Result<Self> {
        if walls.is_empty() {
            return Err(Error::InvalidModel("world needs at least one wall".into()));
        }
        for w in &walls {
            if !(w.a.iter().chain(&w.b).all(|v| v.is_finite()) && w.length() > 0.0) {
                return Err(Error::InvalidModel(format!("degenerate wall {w:?}")));
            }
        }
        for l in &landmarks {
            if !(l.x.is_finite() && l.y.is_finite() && l.confidence > 1.0) {
                return Err(Error::InvalidModel(format!("landmark {l:?} needs confidence > 1")));
            }
        }
        Ok(Self { walls, landmarks })
    }

    /// Axis-aligned rectangular room.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Segment> {
        vec![
            Segment::new(x0, y0, x1, y0),
            Segment::new(x1, y0, x1, y1),
            Segment::new(x1, y1, x0, y1),
            Segment::new(x0, y1, x0, y0),
        ]
    }

    pub fn walls(&self) -> &[Segment] {
        &self.walls
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform::planar(self.x, self.y, self.theta)
    }

    pub fn from_transform(t: &RigidTransform) -> Self {
        Self::new(t.translation().x, t.translation().y, t.yaw())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Root mean square of position errors.
pub fn absolute_trajectory_error(estimate: &[Pose2], truth: &[Pose2]) -> Result<f64> {
    if estimate.len() != truth.len() || estimate.is_empty() {
        return Err(Error::Precondition(format!(
            "trajectories have {} and {} poses",
            estimate.len(),
            truth.len()
        )));
    }
    let sum: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (e.x - t.x).powi(2) + (e.y - t.y).powi(2))
        .sum();
    Ok((sum / estimate.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub n_beams: usize,
    /// Angular span in radians; `2π` sweeps a full circle.
    pub fov: f64,
    pub max_range: f64,
    /// Standard deviation of the Gaussian range noise (m).
    pub noise_sigma: f64,
    pub seed: u64,
    /// Hits closer than this to a landmark are flagged with its confidence.
    pub capture_radius: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            n_beams: 360,
            fov: std::f64::consts::TAU,
            max_range: 10.0,
            noise_sigma: 0.0,
            seed: 0,
            capture_radius: 0.1,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_beams >= 1
            && self.fov > 0.0
            && self.fov <= std::f64::consts::TAU + 1e-12
            && self.max_range > 0.0
            && self.max_range.is_finite()
            && self.noise_sigma >= 0.0
            && self.noise_sigma.is_finite()
            && self.capture_radius >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid sensor {self:?}")))
        }
    }

    /// Beam bearings, strictly increasing.
    pub fn bearings(&self) -> Vec<f64> {
        let n = self.n_beams;
        if self.fov >= std::f64::consts::TAU - 1e-12 {
            let step = std::f64::consts::TAU / n as f64;
            (0..n).map(|i| -std::f64::consts::PI + step * i as f64).collect()
        } else if n == 1 {
            vec![0.0]
        } else {
            let step = self.fov / (n - 1) as f64;
            (0..n).map(|i| -self.fov / 2.0 + step * i as f64).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Return {
    pub bearing: f64,
    /// In `(0, max_range]`; `max_range` on a miss.
    pub range: f64,
    pub hit: bool,
    /// Confidence of the landmark this return landed on.
    pub landmark: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub returns: Vec<Return>,
}

impl Scan {
    pub fn hits(&self) -> usize {
        self.returns.iter().filter(|r| r.hit).count()
    }
}

pub fn simulate_scan(world: &World, pose: &Pose2, sensor: &SensorConfig) -> Result<Scan> {
    simulate_scan_stream(world, pose, sensor, 0)
}

/// As [`simulate_scan`] with the noise drawn from random stream `stream` of
/// `sensor.seed`, so every frame of a run gets independent noise.
pub fn simulate_scan_stream(
    world: &World,
    pose: &Pose2,
    sensor: &SensorConfig,
    stream: u64,
) -> Result<Scan> {
    sensor.validate()?;
    if !pose.is_finite() {
        return Err(Error::Precondition("pose must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sensor.seed);
    rng.set_stream(stream);
    let noise = Normal::new(0.0, sensor.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let origin = [pose.x, pose.y];

    let returns = sensor
        .bearings()
        .into_iter()
        .map(|bearing| {
            let (s, c) = (pose.theta + bearing).sin_cos();
            let nearest = world
                .walls
                .iter()
                .filter_map(|w| w.intersect(origin, [c, s]))
                .fold(f64::INFINITY, f64::min);
            let eps = noise.sample(&mut rng);
            if nearest > sensor.max_range {
                return Return { bearing, range: sensor.max_range, hit: false, landmark: None };
            }
            let hit = [origin[0] + nearest * c, origin[1] + nearest * s];
            let landmark = world
                .landmarks
                .iter()
                .find(|l| (l.x - hit[0]).hypot(l.y - hit[1]) <= sensor.capture_radius)
                .map(|l| l.confidence);
            let range = (nearest + eps).clamp(f64::MIN_POSITIVE, sensor.max_range);
            Return { bearing, range, hit: true, landmark }
        })
        .collect();
    Ok(Scan { returns })
}

/// Hits as points at `z = 0` in the `hint` frame. Landmark returns are
/// weighted by their confidence when any are present.
pub fn scan_to_cloud(scan: &Scan, hint: &Pose2) -> PointCloud {
    let frame = hint.to_transform();
    let hits: Vec<&Return> = scan.returns.iter().filter(|r| r.hit).collect();
    let points = hits
        .iter()
        .map(|r| {
            let (s, c) = r.bearing.sin_cos();
            frame.transform_point(&(Vector::new(r.range * c, r.range * s, 0.0).into()))
        })
        .collect();
    let cloud = PointCloud::new(points).expect("scan points are finite");
    if hits.iter().any(|r| r.landmark.is_some()) {
        let weights = hits.iter().map(|r| r.landmark.unwrap_or(1.0)).collect();
        cloud.with_weights(weights).expect("confidences are positive")
    } else {
        cloud
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Weighted point-to-point, landmark returns weighted by confidence.
    Landmark,
    /// Unweighted point-to-line.
    NonLandmark,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlamConfig {
    pub sensor: SensorConfig,
    pub icp: IcpConfig,
    pub mode: MatchMode,
    /// Replaces the mode's metric, weighting is still set by the mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_override: Option<MetricKind>,
    pub loop_closure: bool,
    pub closure_radius: f64,
    pub closure_min_separation: usize,
    pub keyframe_distance: f64,
    pub keyframe_angle: f64,
    /// Rejection used when the offline pass re-registers keyframes.
    pub refine_rejection: RejectionPolicy,
    pub max_step_distance: f64,
    pub max_step_angle: f64,
}

impl Default for SlamConfig {
    fn default() -> Self {
        Self {
            sensor: SensorConfig::default(),
            // a median cap would discard the few returns that constrain motion along a hall
            icp: IcpConfig { rejection: RejectionPolicy::MaxDistance(1.0), ..IcpConfig::default() },
            mode: MatchMode::NonLandmark,
            metric_override: None,
            loop_closure: true,
            closure_radius: 0.5,
            closure_min_separation: 10,
            keyframe_distance: 0.2,
            keyframe_angle: 0.1,
            refine_rejection: RejectionPolicy::MaxDistance(0.3),
            max_step_distance: 1.0,
            max_step_angle: 0.5,
        }
    }
}

impl SlamConfig {
    /// Defaults for a sensor with range noise `sigma`; `θ₀` becomes the noise
    /// variance, which a correct alignment of two noisy scans can reach.
    pub fn with_sensor_noise(sigma: f64, seed: u64) -> Self {
        let base = Self::default();
        Self {
            sensor: SensorConfig { noise_sigma: sigma, seed, ..base.sensor },
            icp: IcpConfig { theta0: (sigma * sigma).max(base.icp.theta0), ..base.icp },
            ..base
        }
    }

    fn metric(&self) -> MetricKind {
        self.metric_override.unwrap_or(match self.mode {
            MatchMode::Landmark => MetricKind::PointToPoint,
            MatchMode::NonLandmark => MetricKind::PointToLine,
        })
    }

    fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.icp.validate()?;
        self.refine_rejection.validate()?;
        let ok = self.closure_radius >= 0.0
            && self.keyframe_distance >= 0.0
            && self.keyframe_angle >= 0.0
            && self.max_step_distance > 0.0
            && self.max_step_angle > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("negative harness gate".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub frame: usize,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub termination: Option<Termination>,
    /// Why registration failed and odometry coasted.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<String>,
    pub keyframe: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlamReport {
    pub estimated: Vec<Pose2>,
    pub ground_truth: Vec<Pose2>,
    pub ate: f64,
    /// Every frame's estimate at the moment it was produced.
    pub online_estimates: Vec<Pose2>,
    pub frames: Vec<FrameDiagnostics>,
    pub keyframes: Vec<usize>,
    /// Accepted `[earlier, later]` keyframe pairs.
    pub loop_closures: Vec<[usize; 2]>,
    pub passes: usize,
    /// Wall-clock time per frame; not serialized with the estimates.
    #[serde(skip)]
    pub frame_ms: Vec<f64>,
}

fn check_inputs(truth: &[Pose2], config: &SlamConfig) -> Result<()> {
    config.validate()?;
    if truth.len() < 2 {
        return Err(Error::Precondition(format!("need at least 2 frames, got {}", truth.len())));
    }
    if let Some(p) = truth.iter().find(|p| !p.is_finite()) {
        return Err(Error::Precondition(format!("non-finite pose {p:?}")));
    }
    for (k, w) in truth.windows(2).enumerate() {
        let d = w[0].to_transform().distance(&w[1].to_transform());
        if d.shift > config.max_step_distance || d.angle > config.max_step_angle {
            return Err(Error::Precondition(format!(
                "frames {k} and {} move {:.3} m / {:.3} rad, above the step bound",
                k + 1,
                d.shift,
                d.angle
            )));
        }
    }
    Ok(())
}

struct Registrar<'a> {
    config: &'a SlamConfig,
    icp: IcpConfig,
}

impl<'a> Registrar<'a> {
    fn new(config: &'a SlamConfig, rejection: RejectionPolicy) -> Self {
        let icp = IcpConfig { metric: config.metric(), rejection, ..config.icp };
        Self { config, icp }
    }

    fn prepare(&self, cloud: &PointCloud) -> PointCloud {
        match self.config.mode {
            MatchMode::Landmark => cloud.clone(),
            MatchMode::NonLandmark => cloud.clone().without_weights(),
        }
    }

    /// Transform taking `source`'s frame into `dest`'s.
    fn register(&self, source: &PointCloud, dest: &PointCloud, guess: RigidTransform) -> Result<IcpResult> {
        let r = run_icp_from(&self.prepare(source), &self.prepare(dest), &self.icp, Some(guess))?;
        if r.termination == Termination::NoCorrespondences {
            return Err(Error::NoCorrespondences);
        }
        Ok(r)
    }

    fn verifies(&self, r: &IcpResult) -> bool {
        matches!(r.termination, Termination::Converged | Termination::Stalled)
            && r.final_error().is_some_and(|e| e <= 4.0 * self.icp.theta0)
    }
}

fn planar_motion(a: &RigidTransform, b: &RigidTransform) -> (f64, f64) {
    let d = a.distance(b);
    (d.shift, d.angle)
}

/// Moves `poses[j+1..=k]` by growing fractions of the rigid correction that
/// takes `poses[k]` onto `target`, rotating about `poses[j]`'s position.
/// Later poses take the full correction so the chain stays continuous.
fn distribute_correction(poses: &mut [RigidTransform], j: usize, k: usize, target: RigidTransform) {
    let c = target * poses[k].inverse();
    let angle = c.yaw();
    let pivot = *poses[j].translation();
    let shift = c.translation() + c.rotation() * pivot - pivot;
    for i in j + 1..k {
        let f = (i - j) as f64 / (k - j) as f64;
        let partial = RigidTransform::from_rotation_z(f * angle, Vector::zeros());
        let t = pivot - partial.rotation() * pivot + f * shift;
        let step = RigidTransform::from_rotation_z(f * angle, t);
        poses[i] = step * poses[i];
    }
    for pose in &mut poses[k + 1..] {
        *pose = c * *pose;
    }
    poses[k] = target;
}

fn scans(world: &World, truth: &[Pose2], sensor: &SensorConfig) -> Result<Vec<PointCloud>> {
    truth
        .iter()
        .enumerate()
        .map(|(k, p)| Ok(scan_to_cloud(&simulate_scan_stream(world, p, sensor, k as u64)?, &Pose2::new(0.0, 0.0, 0.0))))
        .collect()
}

fn finish(
    estimated: &[RigidTransform],
    truth: &[Pose2],
    online: Vec<Pose2>,
    frames: Vec<FrameDiagnostics>,
    keyframes: Vec<usize>,
    loop_closures: Vec<[usize; 2]>,
    passes: usize,
    frame_ms: Vec<f64>,
) -> Result<SlamReport> {
    let estimated: Vec<Pose2> = estimated.iter().map(Pose2::from_transform).collect();
    Ok(SlamReport {
        ate: absolute_trajectory_error(&estimated, truth)?,
        estimated,
        ground_truth: truth.to_vec(),
        online_estimates: online,
        frames,
        keyframes,
        loop_closures,
        passes,
        frame_ms,
    })
}

/// Sequential estimation: frame `k` only sees frames `0..=k`.
pub fn run_online(world: &World, truth: &[Pose2], config: &SlamConfig) -> Result<SlamReport> {
    check_inputs(truth, config)?;
    let clouds = scans(world, truth, &config.sensor)?;
    let registrar = Registrar::new(config, config.icp.rejection);

    let mut poses = vec![truth[0].to_transform()];
    let mut online = vec![truth[0]];
    let mut frames = vec![FrameDiagnostics {
        frame: 0,
        iterations: 0,
        final_error: None,
        termination: None,
        failure: None,
        keyframe: true,
    }];
    let mut frame_ms = vec![0.0];
    let mut keyframes = vec![0usize];
    let mut closures = Vec::new();
    let mut delta = RigidTransform::identity();

    for k in 1..truth.len() {
        let started = Instant::now();
        let mut diag = FrameDiagnostics {
            frame: k,
            iterations: 0,
            final_error: None,
            termination: None,
            failure: None,
            keyframe: false,
        };
        match registrar.register(&clouds[k], &clouds[k - 1], delta) {
            Ok(r) => {
                diag.iterations = r.iterations;
                diag.final_error = r.final_error();
                diag.termination = Some(r.termination);
                delta = r.transform;
            }
            Err(e) => diag.failure = Some(e.kind().to_string()),
        }
        poses.push(poses[k - 1] * delta);

        let last = *keyframes.last().expect("frame 0 is a keyframe");
        let (shift, angle) = planar_motion(&poses[last], &poses[k]);
        if shift > config.keyframe_distance || angle > config.keyframe_angle {
            diag.keyframe = true;
            if config.loop_closure {
                if let Some(j) = closure_candidate(&poses, &keyframes, k, config) {
                    let guess = poses[j].inverse() * poses[k];
                    if let Ok(r) = registrar.register(&clouds[k], &clouds[j], guess) {
                        if registrar.verifies(&r) {
                            let target = poses[j] * r.transform;
                distribute_correction(&mut poses, j, k, target);
                            closures.push([j, k]);
                        }
                    }
                }
            }
            keyframes.push(k);
        }
        online.push(Pose2::from_transform(&poses[k]));
        frames.push(diag);
        frame_ms.push(started.elapsed().as_secs_f64() * 1e3);
    }

    finish(&poses, truth, online, frames, keyframes, closures, 1, frame_ms)
}

/// Nearest earlier keyframe within the closure radius and far enough back.
fn closure_candidate(poses: &[RigidTransform], keyframes: &[usize], k: usize, config: &SlamConfig) -> Option<usize> {
    let here = poses[k].translation();
    keyframes
        .iter()
        .filter(|&&j| k - j >= config.closure_min_separation)
        .map(|&j| (j, (poses[j].translation() - here).norm()))
        .filter(|&(_, d)| d <= config.closure_radius)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(j, _)| j)
}

/// Online pass, then one refinement pass over the stored keyframes.
pub fn run_offline(world: &World, truth: &[Pose2], config: &SlamConfig) -> Result<SlamReport> {
    let first = run_online(world, truth, config)?;
    let clouds = scans(world, truth, &config.sensor)?;
    let registrar = Registrar::new(config, config.refine_rejection);
    let old: Vec<RigidTransform> = first.estimated.iter().map(Pose2::to_transform).collect();
    let keys = &first.keyframes;

    let mut poses = old.clone();
    for pair in keys.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let guess = old[a].inverse() * old[b];
        let relative = registrar
            .register(&clouds[b], &clouds[a], guess)
            .map(|r| r.transform)
            .unwrap_or(guess);
        poses[b] = poses[a] * relative;
    }
    // non-keyframes ride along with the keyframe before them
    let mut owner = 0;
    for i in 0..poses.len() {
        if keys.binary_search(&i).is_ok() {
            owner = i;
        } else {
            poses[i] = poses[owner] * (old[owner].inverse() * old[i]);
        }
    }

    let mut closures = Vec::new();
    for &[j, k] in &first.loop_closures {
        // pass 1 already verified this pairing; the re-chained poses may have drifted away from it
        let guess = old[j].inverse() * old[k];
        if let Ok(r) = registrar.register(&clouds[k], &clouds[j], guess) {
            if registrar.verifies(&r) {
                let target = poses[j] * r.transform;
                distribute_correction(&mut poses, j, k, target);
                closures.push([j, k]);
            }
        }
    }

    finish(
        &poses,
        truth,
        first.online_estimates,
        first.frames,
        first.keyframes,
        closures,
        2,
        first.frame_ms,
    )
}

/// Rectangular 12 × 3 m hall, the robot driving along its axis.
pub fn corridor_fixture(frames: usize, step: f64) -> (World, Vec<Pose2>) {
    let world = World::new(World::rectangle(0.0, 0.0, 12.0, 3.0), Vec::new()).expect("valid walls");
    let truth = (0..frames).map(|k| Pose2::new(2.0 + step * k as f64, 1.5, 0.0)).collect();
    (world, truth)
}

/// Square loop of side 4 m inside an 8 × 8 m room with two pillars,
/// returning to its start. Turns happen in place at the corners.
pub fn square_loop_fixture() -> (World, Vec<Pose2>) {
    let mut walls = World::rectangle(0.0, 0.0, 8.0, 8.0);
    walls.extend(World::rectangle(3.3, 3.3, 4.0, 4.0));
    walls.extend(World::rectangle(5.0, 4.5, 5.4, 5.6));
    walls.push(Segment::new(0.0, 6.5, 1.2, 8.0));
    let landmarks = vec![
        Landmark { x: 3.3, y: 3.3, confidence: 5.0 },
        Landmark { x: 5.4, y: 5.6, confidence: 5.0 },
        Landmark { x: 8.0, y: 0.0, confidence: 3.0 },
    ];
    let world = World::new(walls, landmarks).expect("valid walls");

    let step: f64 = 0.2;
    let turn_steps = 4;
    let corners = [(2.0, 2.0), (6.0, 2.0), (6.0, 6.0), (2.0, 6.0)];
    let mut truth = Vec::new();
    for (side, &(x, y)) in corners.iter().enumerate() {
        let heading = side as f64 * std::f64::consts::FRAC_PI_2;
        let (s, c) = heading.sin_cos();
        let n = (4.0 / step).round() as usize;
        for i in 0..n {
            truth.push(Pose2::new(x + c * step * i as f64, y + s * step * i as f64, heading));
        }
        let (ex, ey) = corners[(side + 1) % 4];
        for i in 0..turn_steps {
            let f = i as f64 / turn_steps as f64;
            truth.push(Pose2::new(ex, ey, heading + f * std::f64::consts::FRAC_PI_2));
        }
    }
    truth.push(Pose2::new(2.0, 2.0, std::f64::consts::TAU));
    (world, truth)
}
