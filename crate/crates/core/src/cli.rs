//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. Runtime errors
//! print `error[<Kind>]: <message>` to stderr, where `<Kind>` is
//! [`Error::kind`].

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use crate::alignment::{estimate_normals, solve_point_to_point, MetricKind};
use crate::bayes::{filter_run, FilterStep, GridBelief, MeasurementModel, MotionModel};
use crate::correspondence::{match_points, RejectionPolicy, SpatialIndex};
use crate::error::{Error, Result};
use crate::geometry::{centroid, Point, PointCloud, RigidTransform};
use crate::icp::{run_icp, IcpConfig, Termination};
use crate::io;
use crate::report::{FilterReport, RunReport};
use crate::slam::{run_offline, run_online, MatchMode, SensorConfig, SlamConfig};

#[derive(Parser, Debug)]
#[command(name = "icpkit", version, about = "Rigid point-cloud registration with ICP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Register SOURCE onto DEST.
    Register(RegisterArgs),
    /// Run the simulated 2D scan-matching SLAM harness.
    SlamSim(SlamArgs),
    /// Run the histogram Bayes filter on a model file.
    FilterDemo(FilterArgs),
    /// Time registration stages on seeded synthetic clouds.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricArg {
    P2p,
    P2l,
    P2plane,
}

impl From<MetricArg> for MetricKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::P2p => MetricKind::PointToPoint,
            MetricArg::P2l => MetricKind::PointToLine,
            MetricArg::P2plane => MetricKind::PointToPlane,
        }
    }
}

#[derive(Args, Debug)]
struct RegisterArgs {
    source: PathBuf,
    dest: PathBuf,
    #[arg(long, value_enum, default_value = "p2p")]
    metric: MetricArg,
    #[arg(long, default_value_t = 1e-10)]
    theta0: f64,
    #[arg(long = "max-iter", default_value_t = 100)]
    max_iter: usize,
    /// Drop this fraction of the worst pairs each iteration.
    #[arg(long, conflicts_with = "max_dist")]
    trim: Option<f64>,
    /// Drop pairs farther apart than this (m).
    #[arg(long = "max-dist")]
    max_dist: Option<f64>,
    /// Coarse-to-fine levels.
    #[arg(long, default_value_t = 0)]
    pyramid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of source points used, drawn with --seed.
    #[arg(long, default_value_t = 1.0)]
    subsample: f64,
    /// Neighbors used when destination normals must be estimated.
    #[arg(long = "normal-k", default_value_t = 10)]
    normal_k: usize,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Where to write the transformed source cloud.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RunMode {
    Online,
    Offline,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MatchArg {
    Landmark,
    Nonlandmark,
}

#[derive(Args, Debug)]
struct SlamArgs {
    #[arg(long)]
    world: PathBuf,
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long, value_enum, default_value = "online")]
    mode: RunMode,
    #[arg(long = "match", value_enum, default_value = "nonlandmark")]
    matching: MatchArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Range noise standard deviation (m).
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 360)]
    beams: usize,
    #[arg(long = "max-range", default_value_t = 10.0)]
    max_range: f64,
    #[arg(long = "no-loop-closure")]
    no_loop_closure: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FilterArgs {
    /// Grid width in cells.
    #[arg(long)]
    cells: usize,
    /// JSON file with motion, measurement and steps.
    #[arg(long)]
    steps: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 10_000)]
    size: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Model file for `filter-demo`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterFile {
    motion: MotionModel,
    measurement: MeasurementModel,
    steps: Vec<FilterStep>,
    /// Unnormalized prior; uniform when absent.
    #[serde(default)]
    initial: Option<Vec<f64>>,
    #[serde(default = "one")]
    height: usize,
    #[serde(default = "unit")]
    cell_size: f64,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Register(a) => register(a),
        Command::SlamSim(a) => slam_sim(a),
        Command::FilterDemo(a) => filter_demo(a),
        Command::Bench(a) => bench(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            2
        }
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn save(report: &RunReport, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => io::write_json(report, p),
        None => Ok(()),
    }
}

fn register(a: RegisterArgs) -> Result<()> {
    let rejection = match (a.trim, a.max_dist) {
        (Some(f), _) => RejectionPolicy::TrimFraction(f),
        (_, Some(d)) => RejectionPolicy::MaxDistance(d),
        _ => RejectionPolicy::default(),
    };
    let config = IcpConfig {
        metric: a.metric.into(),
        theta0: a.theta0,
        max_iterations: a.max_iter,
        rejection,
        pyramid_levels: a.pyramid,
        seed: a.seed,
        subsample_fraction: a.subsample,
        ..IcpConfig::default()
    };
    config.validate()?;

    let mut report = RunReport::new(
        "register",
        json!({
            "source": display(&a.source),
            "dest": display(&a.dest),
            "icp": config,
        }),
    );
    let started = Instant::now();
    let source = io::read_cloud_auto(&a.source)?;
    let mut dest = io::read_cloud_auto(&a.dest)?;
    report.timings.stages.insert("read".into(), ms(started));

    if config.metric == MetricKind::PointToPlane && dest.normals().is_none() {
        let started = Instant::now();
        let k = a.normal_k.min(dest.len());
        dest = estimate_normals(&dest, k, &Point::origin())?;
        report.config["normals_estimated_k"] = json!(k);
        report.timings.stages.insert("normals".into(), ms(started));
    }

    let started = Instant::now();
    let result = run_icp(&source, &dest, &config)?;
    report.timings.stages.insert("icp".into(), ms(started));
    let report = report.with_icp(&result);

    let t = result.transform;
    println!("termination: {:?}", result.termination);
    println!("iterations: {}", result.iterations);
    if let Some(e) = result.final_error() {
        println!("final error: {e:.6e}");
    }
    let (r, tr) = t.to_arrays();
    println!("rotation: {r:?}");
    println!("translation: {tr:?}");

    if let Some(out) = &a.out {
        io::write_cloud_auto(&t.apply(&source), out)?;
    }
    save(&report, a.report.as_deref())?;
    if result.termination == Termination::NoCorrespondences {
        return Err(Error::NoCorrespondences);
    }
    Ok(())
}

fn slam_sim(a: SlamArgs) -> Result<()> {
    let world = io::read_world(&a.world)?;
    let truth = io::read_trajectory(&a.trajectory)?;
    let mut config = SlamConfig::with_sensor_noise(a.noise, a.seed);
    config.sensor = SensorConfig { n_beams: a.beams, max_range: a.max_range, ..config.sensor };
    config.mode = match a.matching {
        MatchArg::Landmark => MatchMode::Landmark,
        MatchArg::Nonlandmark => MatchMode::NonLandmark,
    };
    config.loop_closure = !a.no_loop_closure;

    let mode = match a.mode {
        RunMode::Online => "online",
        RunMode::Offline => "offline",
    };
    let mut report = RunReport::new(
        "slam-sim",
        json!({
            "world": display(&a.world),
            "trajectory": display(&a.trajectory),
            "mode": mode,
            "slam": config,
        }),
    );
    let started = Instant::now();
    let slam = match a.mode {
        RunMode::Online => run_online(&world, &truth, &config)?,
        RunMode::Offline => run_offline(&world, &truth, &config)?,
    };
    report.timings.stages.insert("run".into(), ms(started));

    println!("frames: {}", slam.estimated.len());
    println!("keyframes: {}", slam.keyframes.len());
    println!("loop closures: {:?}", slam.loop_closures);
    println!("failed frames: {}", slam.frames.iter().filter(|f| f.failure.is_some()).count());
    println!("ate: {:.6e}", slam.ate);
    save(&report.with_slam(slam), a.report.as_deref())
}

fn filter_demo(a: FilterArgs) -> Result<()> {
    let file: FilterFile = io::read_json(&a.steps)?;
    let initial = match file.initial {
        Some(mass) => GridBelief::new(mass, a.cells, file.height, file.cell_size)?,
        None => GridBelief::uniform(a.cells, file.height, file.cell_size)?,
    };
    let started = Instant::now();
    let trace = filter_run(&initial, &file.steps, &file.motion, &file.measurement)?;
    let elapsed = ms(started);

    for (k, (belief, step)) in trace.iter().zip(&file.steps).enumerate() {
        let cells: Vec<String> = belief.cells().iter().map(|p| format!("{p:.6}")).collect();
        println!("step {} ({} / {}): {}", k + 1, step.command, step.observation, cells.join(" "));
    }

    let mut report = RunReport::new(
        "filter-demo",
        json!({
            "steps_file": display(&a.steps),
            "cells": a.cells,
            "height": file.height,
            "cell_size": file.cell_size,
            "motion": file.motion,
            "measurement": file.measurement,
            "steps": file.steps,
        }),
    );
    report.filter = Some(FilterReport {
        beliefs: trace.iter().map(|b| b.cells().to_vec()).collect(),
        most_likely: trace.iter().map(GridBelief::argmax).collect(),
    });
    report.timings.stages.insert("filter".into(), elapsed);
    save(&report, a.report.as_deref())
}

fn bench(a: BenchArgs) -> Result<()> {
    if a.size < 3 || a.reps == 0 {
        return Err(Error::InvalidConfig("bench needs --size >= 3 and --reps >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let dest = PointCloud::from_xyz((0..a.size).map(|_| {
        [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
    }))?;
    let truth = RigidTransform::planar(0.05, -0.03, 0.1);
    let source = truth.inverse().apply(&dest);
    let config = IcpConfig::default();

    let mut totals = [0.0f64; 4];
    for _ in 0..a.reps {
        let t = Instant::now();
        let index = SpatialIndex::build(&dest)?;
        totals[0] += ms(t);

        let shifted = RigidTransform::from_translation(centroid(&dest)? - centroid(&source)?).apply(&source);
        let t = Instant::now();
        let pairs = match_points(&shifted, &index, config.rejection)?;
        totals[1] += ms(t);

        let t = Instant::now();
        solve_point_to_point(&shifted, &dest, &pairs)?;
        totals[2] += ms(t);

        let t = Instant::now();
        run_icp(&source, &dest, &config)?;
        totals[3] += ms(t);
    }
    println!("points: {}  reps: {}", a.size, a.reps);
    for (name, total) in ["index build", "matching", "solve", "full registration"].iter().zip(totals) {
        println!("{name:>18}: {:10.3} ms", total / a.reps as f64);
    }
    Ok(())
}
