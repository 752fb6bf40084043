use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use icpkit::geometry::{PointCloud, RigidTransform, Vector};
use icpkit::io::{write_cloud_auto, write_trajectory};
use icpkit::report::RunReport;
use icpkit::slam::square_loop_fixture;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn icpkit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icpkit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn random_cloud(seed: u64, n: usize, scale: f64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::from_xyz((0..n).map(|_| {
        [
            scale * rng.random_range(-1.0..1.0),
            scale * rng.random_range(-1.0..1.0),
            scale * rng.random_range(-0.5..0.5),
        ]
    }))
    .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path, name: &str) -> RunReport {
    RunReport::from_json(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn self_registration_reports_identity() {
    let dir = tempfile::tempdir().unwrap();
    write_cloud_auto(&random_cloud(1, 400, 1.0), dir.path().join("a.xyz")).unwrap();
    let out = icpkit(&["register", "a.xyz", "a.xyz", "--report", "r.json", "--out", "moved.ply"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(dir.path(), "r.json");
    let t = r.transform.unwrap();
    let got = RigidTransform::from_arrays(t.rotation, t.translation).unwrap();
    assert!(got.distance(&RigidTransform::identity()).within(1e-9, 1e-9));
    assert_eq!(r.command, "register");
    assert!(dir.path().join("moved.ply").exists());
}

#[test]
fn recovers_a_known_motion_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let source = random_cloud(2, 800, 1.0);
    let truth = RigidTransform::from_axis_angle(&Vector::z_axis(), 0.2, Vector::new(0.1, 0.0, -0.05));
    write_cloud_auto(&source, dir.path().join("s.csv")).unwrap();
    write_cloud_auto(&truth.apply(&source), dir.path().join("d.ply")).unwrap();
    let out = icpkit(&["register", "s.csv", "d.ply", "--report", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let t = report(dir.path(), "r.json").transform.unwrap();
    let got = RigidTransform::from_arrays(t.rotation, t.translation).unwrap();
    assert!(got.distance(&truth).within(1e-6, 1e-6));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = icpkit(&["register", "a.xyz", "b.xyz", "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--bogus"));
    assert!(stderr(&out).contains("Usage"));
}

#[test]
fn conflicting_rejection_flags_are_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = icpkit(&["register", "a.xyz", "b.xyz", "--trim", "0.1", "--max-dist", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(icpkit(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(icpkit(&["--version"], dir.path()).status.code(), Some(0));
    assert_eq!(icpkit(&[], dir.path()).status.code(), Some(1));
}

#[test]
fn far_away_cloud_has_no_correspondences() {
    let dir = tempfile::tempdir().unwrap();
    write_cloud_auto(&random_cloud(3, 300, 1.0), dir.path().join("a.xyz")).unwrap();
    // a sparse, unrelated cloud; centroid alignment cannot make it overlap
    let far = RigidTransform::from_translation(Vector::new(500.0, 0.0, 0.0)).apply(&random_cloud(4, 40, 20.0));
    write_cloud_auto(&far, dir.path().join("far_away.xyz")).unwrap();
    let out = icpkit(&["register", "a.xyz", "far_away.xyz", "--max-dist", "0.01"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("NoCorrespondences"), "{}", stderr(&out));
}

#[test]
fn runtime_errors_name_their_case() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.xyz"), "0 0 0\n1 2\n").unwrap();
    let out = icpkit(&["register", "bad.xyz", "bad.xyz"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ParseError"));
    assert!(stderr(&out).contains(":2:"));

    let out = icpkit(&["register", "missing.xyz", "missing.xyz"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("IoError"));

    write_cloud_auto(&random_cloud(5, 50, 1.0), dir.path().join("a.xyz")).unwrap();
    let out = icpkit(&["register", "a.xyz", "a.xyz", "--metric", "p2l"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("NotPlanar"));
}

#[test]
fn point_to_plane_estimates_missing_normals() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut pts = Vec::new();
    for face in 0..3 {
        for _ in 0..400 {
            let (a, b) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            pts.push(match face {
                0 => [a, b, 0.0],
                1 => [a, 0.0, b],
                _ => [0.0, a, b],
            });
        }
    }
    let dest = PointCloud::from_xyz(pts).unwrap();
    let truth = RigidTransform::from_axis_angle(&Vector::y_axis(), 0.02, Vector::new(0.01, 0.02, 0.0));
    write_cloud_auto(&dest, dir.path().join("d.xyz")).unwrap();
    write_cloud_auto(&truth.inverse().apply(&dest), dir.path().join("s.xyz")).unwrap();
    let out = icpkit(&["register", "s.xyz", "d.xyz", "--metric", "p2plane", "--report", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(dir.path(), "r.json");
    assert!(r.config.get("normals_estimated_k").is_some());
    let t = r.transform.unwrap();
    let got = RigidTransform::from_arrays(t.rotation, t.translation).unwrap();
    assert!(got.distance(&truth).within(1e-3, 1e-3), "{:?}", got.distance(&truth));
}

#[test]
fn reports_are_reproducible_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let source = random_cloud(7, 500, 1.0);
    write_cloud_auto(&source, dir.path().join("s.xyz")).unwrap();
    write_cloud_auto(&RigidTransform::planar(0.1, 0.0, 0.1).apply(&random_cloud(8, 500, 1.0)), dir.path().join("d.xyz"))
        .unwrap();
    for name in ["r1.json", "r2.json"] {
        let out = icpkit(
            &["register", "s.xyz", "d.xyz", "--subsample", "0.5", "--seed", "11", "--pyramid", "2", "--report", name],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    assert_eq!(report(dir.path(), "r1.json").without_timings(), report(dir.path(), "r2.json").without_timings());
}

#[test]
fn slam_sim_runs_the_square_loop() {
    let dir = tempfile::tempdir().unwrap();
    let world = fixture("square_loop_world.json");
    let traj = fixture("square_loop_trajectory.csv");
    let out = icpkit(
        &["slam-sim", "--world", &world, "--trajectory", &traj, "--mode", "offline", "--seed", "3", "--report", "s.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(dir.path(), "s.json");
    let slam = r.slam.unwrap();
    assert_eq!(slam.passes, 2);
    assert!(!slam.loop_closures.is_empty());
    assert_eq!(r.timings.frames.len(), slam.estimated.len());
    assert!(String::from_utf8_lossy(&out.stdout).contains("ate:"));
}

#[test]
fn slam_sim_landmark_mode_and_precondition_errors() {
    let dir = tempfile::tempdir().unwrap();
    let world = fixture("square_loop_world.json");
    let (_, truth) = square_loop_fixture();
    write_trajectory(&truth[..30], dir.path().join("short.csv")).unwrap();
    let out = icpkit(
        &["slam-sim", "--world", &world, "--trajectory", "short.csv", "--match", "landmark"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    write_trajectory(&truth[..1], dir.path().join("one.csv")).unwrap();
    let out = icpkit(&["slam-sim", "--world", &world, "--trajectory", "one.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Precondition"));
}

#[test]
fn filter_demo_prints_and_reports_beliefs() {
    let dir = tempfile::tempdir().unwrap();
    let steps = fixture("corridor_filter.json");
    let out = icpkit(&["filter-demo", "--cells", "10", "--steps", &steps, "--report", "f.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("step")).count(), 5);
    let f = report(dir.path(), "f.json").filter.unwrap();
    assert_eq!(f.beliefs.len(), 5);
    for b in &f.beliefs {
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    let out = icpkit(&["filter-demo", "--cells", "4", "--steps", &steps], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("InvalidModel"));
}

#[test]
fn bench_prints_stage_timings() {
    let dir = tempfile::tempdir().unwrap();
    let out = icpkit(&["bench", "--size", "2000", "--reps", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for stage in ["index build", "matching", "solve", "full registration"] {
        assert!(stdout.contains(stage), "{stdout}");
    }
}
