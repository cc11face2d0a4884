//! Fixed-timestep scenario engine.
//!
//! One tick senses the world as it stands after the pedestrians moved, then
//! tracks, updates the lock, computes the follow and field commands, blends
//! and clamps them, and moves the robot. Runs are single threaded and
//! bit-for-bit reproducible for a given configuration.

mod config;
mod metrics;
mod scenarios;

use nalgebra::Vector2;
use rayon::prelude::*;

pub use config::{PedestrianSpec, ScenarioConfig, SuccessCriteria, SCHEMA};
pub use metrics::{
    attribute, ground_truth_id_switches, longest_id_hold, write_metrics, write_ticks_csv, AttributionFrame,
    Diagnostics, MetricsReport, TICKS_HEADER,
};
pub use scenarios::{builtin, builtin_scenarios, BUILTIN_NAMES};

use crate::apf::{blend, force_to_twist, limit_closing_speed, total_force};
use crate::error::{Error, Result};
use crate::follow::{
    acquire_target, candidates, follow_command, speed, steer, update_lock, CommandTwist, LockEvent, LockState,
    TargetLock,
};
use crate::num::wrap_angle;
use crate::sensor::{apply_occlusion, corrupt, project};
use crate::tracker::{TrackId, Tracker};
use crate::world::{
    advance_pedestrian, check_collision, step_unicycle, Pose2D, RobotPlant, WorldState,
};

/// A pedestrian within this distance of the goal estimate is taken to be
/// the person being followed and exerts no repulsion.
pub const FOLLOWED_MATCH_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    /// Simulated time at the end of the tick.
    pub t: f64,
    pub robot: Pose2D<f64>,
    pub pedestrians: Vec<(String, Vector2<f64>)>,
    pub target_position: Option<Vector2<f64>>,
    pub lock_id: Option<TrackId>,
    pub cmd: CommandTwist<f64>,
    pub min_clearance: f64,
    pub n_detections: usize,
    pub n_confirmed: usize,
    pub local_minimum: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub ticks: Vec<TickRecord>,
    pub metrics: MetricsReport,
    pub diagnostics: Diagnostics,
    pub attribution: Vec<AttributionFrame>,
}

impl ScenarioConfig {
    /// The world at time zero.
    pub fn initial_world(&self) -> WorldState<f64> {
        let r = &self.robot;
        WorldState {
            time: 0.0,
            robot: RobotPlant {
                pose: Pose2D::new(r.pose.x, r.pose.y, r.pose.theta),
                ..*r
            },
            pedestrians: self.pedestrians.iter().map(PedestrianSpec::to_pedestrian).collect(),
            shelves: self.shelves.clone(),
            bounds: self.bounds,
        }
    }
}

fn followed_pedestrian<'a>(world: &'a WorldState<f64>, goal: &Vector2<f64>) -> Option<&'a str> {
    world
        .active_pedestrians()
        .map(|p| ((p.position - goal).norm(), p.id.as_str()))
        .filter(|(d, _)| *d <= FOLLOWED_MATCH_RADIUS)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, id)| id)
}

/// Runs a scenario to termination.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let camera = cfg.camera;
    let mut noise = cfg.noise;
    noise.rng_seed = cfg.rng_seed;
    let target_id = cfg.target().map(|p| p.id.clone());
    let limits = cfg.robot.limits();

    let mut world = cfg.initial_world();
    let mut tracker = Tracker::new(cfg.tracker);
    let mut lock = TargetLock::default();
    let mut goal: Option<Vector2<f64>> = None;
    let mut last_locked: Option<TrackId> = None;
    let mut last_heading = world.robot.pose.theta;

    let mut ticks = Vec::with_capacity(cfg.max_steps);
    let mut attribution = Vec::with_capacity(cfg.max_steps);
    let mut diag = Diagnostics::default();
    let mut id_switches_on_lock = 0;
    let mut target_loss_events = 0;
    let mut collisions = 0;
    let mut min_clearance_overall = f64::INFINITY;
    let mut path_length = 0.0;

    for step in 0..cfg.max_steps {
        let dt = cfg.dt;
        let time = world.time;
        for p in &mut world.pedestrians {
            if p.is_active(time) {
                *p = advance_pedestrian(p, dt);
            }
        }
        world.time = (step + 1) as f64 * dt;

        // The camera turned during the previous tick; move remembered image
        // positions with it so the motion model only sees walking.
        let turned = wrap_angle(world.robot.pose.theta - last_heading);
        if turned != 0.0 {
            tracker.remap_columns(|u| camera.rotate_column(u, turned));
            lock.last_box.u_center = camera.rotate_column(lock.last_box.u_center, turned);
        }
        last_heading = world.robot.pose.theta;

        let visible = apply_occlusion(&project(&world, &camera), &world, &camera);
        let detections = corrupt(&visible, &noise, step as u64, &camera);
        let frame = tracker.step(&detections).map_err(|e| Error::Step {
            step,
            source: Box::new(e),
        })?;
        let confirmed = candidates(&frame, &detections);

        let (next, event) = if lock.state == LockState::Unlocked {
            let acquired = acquire_target(&confirmed, camera.image_width);
            let event = acquired.locked_track_id.map_or(LockEvent::None, LockEvent::Acquired);
            (acquired, event)
        } else {
            update_lock(&lock, &confirmed, &cfg.follow)
        };
        lock = next;
        match event {
            LockEvent::Reacquired { .. } => diag.reacquisitions += 1,
            LockEvent::TargetLoss => target_loss_events += 1,
            LockEvent::Acquired(_) if last_locked.is_some() => diag.reacquisitions_after_loss += 1,
            _ => {}
        }
        if let Some(id) = lock.locked_track_id {
            if last_locked.is_some_and(|prev| prev != id) {
                id_switches_on_lock += 1;
            }
            last_locked = Some(id);
        }

        let pose = world.robot.pose;
        match lock.state {
            LockState::Locked => {
                goal = Some(camera.ground_point(&pose, lock.last_box.u_center, lock.last_depth));
            }
            LockState::Unlocked => goal = None,
            LockState::Searching => {}
        }

        let turn = steer(lock.last_box.u_center, camera.image_width, &cfg.follow);
        let follow_cmd = follow_command(&lock, &cfg.follow, turn);
        let exclude = goal.as_ref().and_then(|g| followed_pedestrian(&world, g));
        let force = total_force(&world, goal.as_ref(), exclude, &cfg.apf);
        let mut apf_cmd = force_to_twist(&force.resultant, pose.theta, &cfg.apf, &limits);
        apf_cmd = match &goal {
            // Keep the following distance while the field steers.
            Some(g) => {
                let closing = speed((g - pose.position()).norm(), &cfg.follow);
                limit_closing_speed(&apf_cmd, pose.theta, &pose.position(), g, closing, limits.max_speed)
            }
            None => CommandTwist { v: 0.0, ..apf_cmd },
        };
        let cmd = blend(&follow_cmd, &apf_cmd, force.nearest_obstacle_distance, &cfg.apf).clamped(&limits);

        world.robot.pose = step_unicycle(&pose, cmd.v, cmd.omega, dt);
        path_length += (world.robot.pose.position() - pose.position()).norm();
        if force.local_minimum_flag {
            diag.local_minimum_ticks += 1;
        }

        let report = check_collision(&world);
        if report.any() {
            collisions += 1;
        }
        min_clearance_overall = min_clearance_overall.min(report.min_clearance);
        let robot_at = world.robot.pose.position();
        for p in world.active_pedestrians() {
            let c = (p.position - robot_at).norm() - p.radius();
            let slot = diag.min_clearance_by_pedestrian.entry(p.id.clone()).or_insert(f64::INFINITY);
            *slot = slot.min(c);
        }

        let target = target_id
            .as_ref()
            .and_then(|id| world.pedestrians.iter().find(|p| &p.id == id));
        if lock.state == LockState::Locked {
            diag.ticks_locked += 1;
        }
        let frame_truth = AttributionFrame {
            truth: visible
                .iter()
                .filter_map(|d| d.source.clone().map(|s| (s, d.bbox())))
                .collect(),
            tracks: frame.matched_confirmed().map(|(s, _)| (s.id, s.bbox)).collect(),
        };
        let attributed = attribute(&frame_truth);
        let locked_on_target = lock.state == LockState::Locked
            && target_id
                .as_ref()
                .is_some_and(|tid| attributed.get(tid) == lock.locked_track_id.as_ref());
        if locked_on_target {
            diag.ticks_locked_on_target += 1;
        }
        diag.final_lock_on_target = locked_on_target;

        ticks.push(TickRecord {
            t: world.time,
            robot: world.robot.pose,
            pedestrians: world.pedestrians.iter().map(|p| (p.id.clone(), p.position)).collect(),
            target_position: target.map(|p| p.position),
            lock_id: lock.locked_track_id,
            cmd,
            min_clearance: report.min_clearance,
            n_detections: detections.len(),
            n_confirmed: frame.confirmed.len(),
            local_minimum: force.local_minimum_flag,
        });
        attribution.push(frame_truth);

        if target.is_some_and(|p| p.has_arrived() && (p.position - robot_at).norm() <= cfg.apf.goal_radius) {
            diag.arrived = true;
            break;
        }
    }

    let final_distance_to_target = ticks
        .last()
        .and_then(|t| t.target_position.map(|p| (p - t.robot.position()).norm()))
        .unwrap_or(f64::INFINITY);
    let completed = target_id.is_some()
        && (diag.arrived || !cfg.success.require_arrival)
        && collisions == 0
        && lock.state == LockState::Locked
        && min_clearance_overall >= cfg.success.min_clearance
        && final_distance_to_target <= cfg.success.max_final_distance;
    diag.longest_id_hold = longest_id_hold(&attribution);

    let metrics = MetricsReport {
        id_switches_on_lock,
        tracker_id_switches_ground_truth: ground_truth_id_switches(&attribution),
        target_loss_events,
        collisions,
        min_clearance_overall,
        final_distance_to_target,
        completed,
        path_length,
        steps_run: ticks.len(),
    };
    Ok(RunOutput {
        ticks,
        metrics,
        diagnostics: diag,
        attribution,
    })
}

/// Runs independent scenarios on up to `jobs` threads; results keep the
/// input order.
pub fn run_batch(configs: &[ScenarioConfig], jobs: usize) -> Vec<Result<RunOutput>> {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(|| configs.par_iter().map(run).collect()),
        Err(_) => configs.iter().map(run).collect(),
    }
}
