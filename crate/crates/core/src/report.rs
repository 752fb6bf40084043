//! JSON run reports.
//!
//! Keys of stages that did not run are omitted, never `null`. Everything
//! measured with a clock lives under `timings`, so two runs with equal
//! inputs differ only there.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::RigidTransform;
use crate::icp::{IcpResult, Termination};
use crate::slam::SlamReport;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    /// Row-major 3×3.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl From<&RigidTransform> for TransformRecord {
    fn from(t: &RigidTransform) -> Self {
        let (rotation, translation) = t.to_arrays();
        Self { rotation, translation }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    /// Milliseconds per named stage.
    pub stages: BTreeMap<String, f64>,
    /// Milliseconds per SLAM frame.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frames: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    /// Posterior after every step.
    pub beliefs: Vec<Vec<f64>>,
    /// Most probable cell after every step.
    pub most_likely: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub error_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correspondences: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slam: Option<SlamReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterReport>,
    pub timings: Timings,
}

impl RunReport {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            config,
            error_trace: Vec::new(),
            transform: None,
            termination: None,
            iterations: None,
            correspondences: None,
            slam: None,
            filter: None,
            timings: Timings::default(),
        }
    }

    pub fn with_icp(mut self, result: &IcpResult) -> Self {
        self.error_trace = result.error_trace.clone();
        self.transform = Some(TransformRecord::from(&result.transform));
        self.termination = Some(result.termination);
        self.iterations = Some(result.iterations);
        self.correspondences = Some(result.final_correspondences.len());
        self
    }

    /// Moves per-frame latencies out of the SLAM section into `timings`.
    pub fn with_slam(mut self, mut slam: SlamReport) -> Self {
        self.timings.frames = std::mem::take(&mut slam.frame_ms);
        self.slam = Some(slam);
        self
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> crate::error::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn without_timings(&self) -> Self {
        Self { timings: Timings::default(), ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PointCloud, Vector};
    use crate::icp::{run_icp, IcpConfig};

    #[test]
    fn transform_record_is_row_major() {
        let t = RigidTransform::from_rotation_z(std::f64::consts::FRAC_PI_2, Vector::new(1., 2., 3.));
        let r = TransformRecord::from(&t);
        assert!((r.rotation[1] + 1.0).abs() < 1e-15);
        assert!((r.rotation[3] - 1.0).abs() < 1e-15);
        assert_eq!(r.translation, [1., 2., 3.]);
    }

    #[test]
    fn report_round_trips() {
        let c = PointCloud::from_xyz((0..50).map(|i| {
            let f = i as f64;
            [f.sin(), (0.7 * f).cos(), 0.01 * f]
        }))
        .unwrap();
        let moved = RigidTransform::from_rotation_z(0.1, Vector::new(0.01, 0., 0.)).apply(&c);
        let result = run_icp(&moved, &c, &IcpConfig::default()).unwrap();
        let mut report = RunReport::new("register", serde_json::to_value(IcpConfig::default()).unwrap()).with_icp(&result);
        report.timings.stages.insert("icp".into(), 1.25);
        let back = RunReport::from_json(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn absent_stages_omit_their_keys() {
        let json = RunReport::new("bench", serde_json::json!({})).to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        let keys: Vec<&String> = value.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["command", "config", "timings", "tool_version"]);
        assert!(!json.contains("null"));
    }
}
