//! Scenario configuration documents.

use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::apf::ApfParams;
use crate::error::{Error, Result};
use crate::follow::FollowParams;
use crate::sensor::{CameraModel, NoiseSpec};
use crate::tracker::TrackerParams;
use crate::world::{Pedestrian, Rect, RobotPlant};

/// Value of the `schema` field this build reads and writes.
pub const SCHEMA: &str = "warefollow/scenario-v1";

fn default_height() -> f64 {
    1.7
}

fn default_shoulder_width() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedestrianSpec {
    pub id: String,
    /// Start position followed by the points to walk through.
    pub waypoints: Vec<Vector2<f64>>,
    pub speed: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default = "default_shoulder_width")]
    pub shoulder_width: f64,
    #[serde(default)]
    pub spawn_time: f64,
    /// Ground-truth label of the person to follow; used for metrics only.
    #[serde(default)]
    pub target: bool,
}

impl PedestrianSpec {
    pub fn to_pedestrian(&self) -> Pedestrian<f64> {
        Pedestrian {
            id: self.id.clone(),
            position: self.waypoints[0],
            height: self.height,
            shoulder_width: self.shoulder_width,
            speed: self.speed,
            waypoints: self.waypoints.clone(),
            waypoint_index: usize::from(self.waypoints.len() > 1),
            spawn_time: self.spawn_time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuccessCriteria {
    /// Require the run to end by the arrival rule rather than `max_steps`.
    pub require_arrival: bool,
    pub min_clearance: f64,
    pub max_final_distance: f64,
}

impl Default for SuccessCriteria {
    fn default() -> Self {
        Self {
            require_arrival: true,
            min_clearance: 0.0,
            max_final_distance: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: String,
    pub name: String,
    pub dt: f64,
    pub max_steps: usize,
    pub rng_seed: u64,
    pub bounds: Rect<f64>,
    #[serde(default)]
    pub shelves: Vec<Rect<f64>>,
    pub robot: RobotPlant<f64>,
    #[serde(default)]
    pub pedestrians: Vec<PedestrianSpec>,
    #[serde(default)]
    pub camera: CameraModel<f64>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub tracker: TrackerParams<f64>,
    #[serde(default)]
    pub follow: FollowParams<f64>,
    #[serde(default)]
    pub apf: ApfParams<f64>,
    #[serde(default)]
    pub success: SuccessCriteria,
}

fn check(ok: bool, field: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, message))
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

impl ScenarioConfig {
    pub fn target(&self) -> Option<&PedestrianSpec> {
        self.pedestrians.iter().find(|p| p.target)
    }

    /// Changes the timestep while keeping the simulated horizon and the
    /// durations counted in frames (track age, search patience).
    pub fn with_dt(mut self, dt: f64) -> Self {
        let ratio = self.dt / dt;
        let rescale = |frames: f64| (frames * ratio).round().max(1.0);
        self.max_steps = rescale(self.max_steps as f64) as usize;
        self.tracker.max_age = rescale(self.tracker.max_age as f64) as usize;
        self.follow.search_patience = rescale(f64::from(self.follow.search_patience)) as u32;
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check(self.schema == SCHEMA, "schema", &format!("expected \"{SCHEMA}\""))?;
        check(positive(self.dt), "dt", "must be positive")?;
        check(self.max_steps > 0, "max_steps", "must be positive")?;
        check(self.bounds.is_valid(), "bounds", "min must be below max")?;
        for (i, s) in self.shelves.iter().enumerate() {
            check(s.is_valid(), &format!("shelves[{i}]"), "min must be below max")?;
        }

        let r = &self.robot;
        check(positive(r.radius), "robot.radius", "must be positive")?;
        check(non_negative(r.max_speed), "robot.max_speed", "must be non-negative")?;
        check(non_negative(r.max_turn_rate), "robot.max_turn_rate", "must be non-negative")?;
        check(
            r.pose.x.is_finite() && r.pose.y.is_finite() && r.pose.theta.is_finite(),
            "robot.pose",
            "must be finite",
        )?;

        let mut ids = std::collections::BTreeSet::new();
        for (i, p) in self.pedestrians.iter().enumerate() {
            let field = |name: &str| format!("pedestrians[{i}].{name}");
            check(ids.insert(p.id.as_str()), &field("id"), "duplicate id")?;
            check(!p.waypoints.is_empty(), &field("waypoints"), "needs at least a start point")?;
            check(
                p.waypoints.iter().all(|w| w.x.is_finite() && w.y.is_finite()),
                &field("waypoints"),
                "must be finite",
            )?;
            check(non_negative(p.speed), &field("speed"), "must be non-negative")?;
            check(positive(p.height), &field("height"), "must be positive")?;
            check(positive(p.shoulder_width), &field("shoulder_width"), "must be positive")?;
            check(non_negative(p.spawn_time), &field("spawn_time"), "must be non-negative")?;
        }
        let targets = self.pedestrians.iter().filter(|p| p.target).count();
        check(
            self.pedestrians.is_empty() || targets == 1,
            "pedestrians",
            "exactly one pedestrian must be marked as target",
        )?;

        let c = &self.camera;
        check(positive(c.focal_px), "camera.focal_px", "must be positive")?;
        check(
            positive(c.image_width) && positive(c.image_height),
            "camera.image_width",
            "image size must be positive",
        )?;
        check(positive(c.max_depth), "camera.max_depth", "must be positive")?;
        check(c.feature_dim > 0, "camera.feature_dim", "must be positive")?;
        check(
            c.occlusion_fraction > 0.0 && c.occlusion_fraction <= 1.0,
            "camera.occlusion_fraction",
            "must lie in (0, 1]",
        )?;
        check(self.noise.is_valid(), "noise", "sigmas must be non-negative and miss_rate in [0, 1]")?;

        self.tracker.validate()?;
        let f = &self.follow;
        check(non_negative(f.center_deadband), "follow.center_deadband", "must be non-negative")?;
        check(positive(f.desired_distance), "follow.desired_distance", "must be positive")?;
        check(non_negative(f.distance_deadband), "follow.distance_deadband", "must be non-negative")?;
        check(positive(f.k_linear), "follow.k_linear", "must be positive")?;
        check(non_negative(f.max_speed), "follow.max_speed", "must be non-negative")?;
        check(non_negative(f.turn_rate), "follow.turn_rate", "must be non-negative")?;
        check(positive(f.width_tolerance), "follow.width_tolerance", "must be positive")?;
        check(positive(f.center_tolerance), "follow.center_tolerance", "must be positive")?;
        self.apf.validate(self.robot.radius)?;
        check(non_negative(self.success.min_clearance), "success.min_clearance", "must be non-negative")?;
        check(
            positive(self.success.max_final_distance),
            "success.max_final_distance",
            "must be positive",
        )
    }

    /// Parses and validates a JSON scenario document.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
