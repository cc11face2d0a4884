//! Builtin scenarios.
//!
//! S1: a stationary camera watches three people cross; the nearer one walks
//! past the locked one and hides it completely for about 15 frames.
//! S2: the target turns a right angle into a 2 m aisle between two shelf
//! rows. S3: a corridor where a second person appears ahead and walks
//! toward the robot on a near-collision line.

use nalgebra::Vector2;

use super::config::{PedestrianSpec, ScenarioConfig, SuccessCriteria, SCHEMA};
use crate::apf::ApfParams;
use crate::follow::FollowParams;
use crate::sensor::{CameraModel, NoiseSpec};
use crate::tracker::TrackerParams;
use crate::world::{Pose2D, Rect, RobotPlant};

pub const BUILTIN_NAMES: [&str; 3] = ["S1", "S2", "S3"];

fn walker(id: &str, speed: f64, path: &[(f64, f64)]) -> PedestrianSpec {
    PedestrianSpec {
        id: id.into(),
        waypoints: path.iter().map(|&(x, y)| Vector2::new(x, y)).collect(),
        speed,
        height: 1.7,
        shoulder_width: 0.5,
        spawn_time: 0.0,
        target: false,
    }
}

fn robot(x: f64, y: f64, max_speed: f64, max_turn_rate: f64) -> RobotPlant<f64> {
    RobotPlant {
        pose: Pose2D::new(x, y, 0.0),
        radius: 0.3,
        max_speed,
        max_turn_rate,
    }
}

fn base(name: &str, max_steps: usize) -> ScenarioConfig {
    ScenarioConfig {
        schema: SCHEMA.into(),
        name: name.into(),
        dt: 0.1,
        max_steps,
        rng_seed: 0,
        bounds: Rect::new(-1.0, -5.0, 15.0, 11.0),
        shelves: Vec::new(),
        robot: robot(0.0, 0.0, 1.2, 1.0),
        pedestrians: Vec::new(),
        camera: CameraModel::default(),
        noise: NoiseSpec::default(),
        tracker: TrackerParams::default(),
        follow: FollowParams::default(),
        apf: ApfParams::default(),
        success: SuccessCriteria::default(),
    }
}

pub fn s1() -> ScenarioConfig {
    let mut cfg = base("S1", 170);
    cfg.bounds = Rect::new(-1.0, -5.0, 11.0, 5.0);
    cfg.robot = robot(0.0, 0.0, 0.0, 0.0);
    // The far walker starts nearest the image center, so it is the one the
    // robot locks onto; the near walker overtakes it in the image.
    let mut far = walker("far", 0.3, &[(9.0, 1.65), (9.0, -3.5)]);
    far.target = true;
    cfg.pedestrians = vec![
        walker("near", 0.5, &[(6.0, 3.5), (6.0, -3.5)]),
        far,
        walker("side", 0.4, &[(10.0, -3.0), (5.0, -2.2)]),
    ];
    cfg.success = SuccessCriteria {
        require_arrival: false,
        min_clearance: 0.0,
        max_final_distance: 20.0,
    };
    cfg
}

pub fn s2() -> ScenarioConfig {
    let mut cfg = base("S2", 320);
    // Aisle x in [9, 11] between two shelf rows. The entrance sits 2.5 m
    // past the corner so the camera loses the target only briefly.
    cfg.shelves = vec![Rect::new(7.0, 2.5, 9.0, 10.0), Rect::new(11.0, 2.5, 13.0, 10.0)];
    let mut target = walker("target", 0.9, &[(2.0, 0.0), (10.0, 0.0), (10.0, 8.0)]);
    target.target = true;
    cfg.pedestrians = vec![target];
    cfg
}

pub fn s3() -> ScenarioConfig {
    let mut cfg = base("S3", 260);
    cfg.bounds = Rect::new(-1.0, -4.0, 23.0, 4.0);
    cfg.shelves = vec![Rect::new(-1.0, 2.5, 23.0, 3.5), Rect::new(-1.0, -3.5, 23.0, -2.5)];
    let mut target = walker("target", 0.9, &[(2.0, -0.3), (18.0, -0.3)]);
    target.target = true;
    let mut oncoming = walker("oncoming", 1.0, &[(14.0, 0.15), (-1.0, 0.15)]);
    oncoming.spawn_time = 5.0;
    cfg.pedestrians = vec![target, oncoming];
    // A walker closing at ~2 m/s needs an earlier, stronger push than the
    // static shelves of S2.
    cfg.apf = ApfParams {
        k_rep: 3.0,
        rho0: 2.0,
        blend_distance: 2.5,
        ..ApfParams::default()
    };
    cfg
}

pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    vec![s1(), s2(), s3()]
}

/// Looks up a builtin scenario by name (`S1`, `S2`, `S3`).
pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    match name {
        "S1" => Some(s1()),
        "S2" => Some(s2()),
        "S3" => Some(s3()),
        _ => None,
    }
}
