//! Artificial potential field local planner.
//!
//! Quadratic attraction toward a goal point and the inverse-clearance
//! repulsion `U = k_rep/2 * (1/rho - 1/rho0)^2` from shelves and pedestrians.
//! The resultant force becomes a twist that is blended with the follow
//! command as obstacles get close. Local minima are flagged, never escaped.

use std::io::Write;

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::follow::CommandTwist;
use crate::num::{wrap_angle, Real};
use crate::world::{PlantLimits, WorldState};

/// Smallest clearance used in the repulsive field.
pub const RHO_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApfParams<T: Real> {
    pub k_att: T,
    pub k_rep: T,
    /// Influence distance in meters.
    pub rho0: T,
    pub force_cap: T,
    /// Clearance below which the field starts to take over.
    pub blend_distance: T,
    pub local_min_epsilon: T,
    pub goal_radius: T,
    /// Forward speed per unit force.
    pub k_v: T,
    /// Turn rate per radian of heading error.
    pub k_omega: T,
}

impl<T: Real> Default for ApfParams<T> {
    fn default() -> Self {
        Self {
            k_att: T::lit(1.0),
            k_rep: T::lit(0.5),
            rho0: T::lit(1.5),
            force_cap: T::lit(5.0),
            blend_distance: T::lit(2.0),
            local_min_epsilon: T::lit(0.05),
            goal_radius: T::lit(2.0),
            k_v: T::lit(0.5),
            k_omega: T::lit(1.5),
        }
    }
}

impl<T: Real> ApfParams<T> {
    pub fn validate(&self, robot_radius: T) -> Result<()> {
        let positive = [
            ("k_att", self.k_att),
            ("k_rep", self.k_rep),
            ("rho0", self.rho0),
            ("force_cap", self.force_cap),
            ("blend_distance", self.blend_distance),
            ("local_min_epsilon", self.local_min_epsilon),
            ("goal_radius", self.goal_radius),
            ("k_v", self.k_v),
            ("k_omega", self.k_omega),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= T::zero() {
                return Err(Error::config(format!("apf.{name}"), "must be positive and finite"));
            }
        }
        if self.rho0 <= robot_radius {
            return Err(Error::config("apf.rho0", "must exceed the robot radius"));
        }
        if self.blend_distance <= self.rho0 * T::lit(0.5) {
            return Err(Error::config("apf.blend_distance", "must exceed rho0 / 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceResult<T: Real> {
    pub attractive: Vector2<T>,
    pub repulsive: Vector2<T>,
    /// `attractive + repulsive`, capped at `force_cap`.
    pub resultant: Vector2<T>,
    /// Smallest obstacle clearance `rho`; infinity without obstacles.
    pub nearest_obstacle_distance: T,
    pub local_minimum_flag: bool,
}

/// Nearest point of one obstacle and the robot's clearance to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle<T: Real> {
    pub point: Vector2<T>,
    pub rho: T,
}

pub fn attractive_potential<T: Real>(robot: &Vector2<T>, goal: &Vector2<T>, k_att: T) -> T {
    T::lit(0.5) * k_att * (goal - robot).norm_squared()
}

pub fn attractive_force<T: Real>(robot: &Vector2<T>, goal: &Vector2<T>, k_att: T) -> Vector2<T> {
    (goal - robot) * k_att
}

pub fn repulsive_potential<T: Real>(rho: T, k_rep: T, rho0: T) -> T {
    let rho = rho.max(T::lit(RHO_FLOOR));
    if rho >= rho0 {
        return T::zero();
    }
    let a = T::one() / rho - T::one() / rho0;
    T::lit(0.5) * k_rep * a * a
}

/// Force pushing the robot away from `obstacle_point`.
///
/// A robot sitting exactly on the point has no defined direction and gets
/// no force.
pub fn repulsive_force<T: Real>(
    robot: &Vector2<T>,
    obstacle_point: &Vector2<T>,
    rho: T,
    k_rep: T,
    rho0: T,
) -> Vector2<T> {
    let rho = rho.max(T::lit(RHO_FLOOR));
    let away = robot - obstacle_point;
    let len = away.norm();
    if rho >= rho0 || len == T::zero() {
        return Vector2::zeros();
    }
    let magnitude = k_rep * (T::one() / rho - T::one() / rho0) / (rho * rho);
    away * (magnitude / len)
}

/// Every shelf and every active pedestrian other than `exclude_id`, seen
/// from a robot disc of `robot_radius` centered at `robot`.
pub fn obstacles<T: Real>(
    world: &WorldState<T>,
    robot: &Vector2<T>,
    robot_radius: T,
    exclude_id: Option<&str>,
) -> Vec<Obstacle<T>> {
    let floor = T::lit(RHO_FLOOR);
    let mut out: Vec<Obstacle<T>> = world
        .shelves
        .iter()
        .map(|s| {
            let point = s.nearest_point(robot);
            Obstacle {
                point,
                rho: ((robot - point).norm() - robot_radius).max(floor),
            }
        })
        .collect();
    for p in world.active_pedestrians() {
        if Some(p.id.as_str()) == exclude_id {
            continue;
        }
        let away = robot - p.position;
        let d = away.norm();
        let point = if d > T::zero() {
            p.position + away * (p.radius() / d)
        } else {
            p.position
        };
        out.push(Obstacle {
            point,
            rho: (d - p.radius() - robot_radius).max(floor),
        });
    }
    out
}

fn cap<T: Real>(f: Vector2<T>, limit: T) -> Vector2<T> {
    let n = f.norm();
    if n > limit {
        f * (limit / n)
    } else {
        f
    }
}

/// Field at the robot's current position.
pub fn total_force<T: Real>(
    world: &WorldState<T>,
    goal: Option<&Vector2<T>>,
    exclude_id: Option<&str>,
    params: &ApfParams<T>,
) -> ForceResult<T> {
    force_at(world, &world.robot.pose.position(), goal, exclude_id, params)
}

/// Field at an arbitrary robot position.
pub fn force_at<T: Real>(
    world: &WorldState<T>,
    robot: &Vector2<T>,
    goal: Option<&Vector2<T>>,
    exclude_id: Option<&str>,
    params: &ApfParams<T>,
) -> ForceResult<T> {
    let attractive = goal.map_or_else(Vector2::zeros, |g| attractive_force(robot, g, params.k_att));
    let mut repulsive = Vector2::zeros();
    let mut nearest = T::infinity();
    for o in obstacles(world, robot, world.robot.radius, exclude_id) {
        repulsive += repulsive_force(robot, &o.point, o.rho, params.k_rep, params.rho0);
        nearest = nearest.min(o.rho);
    }
    let resultant = cap(attractive + repulsive, params.force_cap);
    let local_minimum_flag = goal.is_some_and(|g| {
        resultant.norm() < params.local_min_epsilon && (g - robot).norm() > params.goal_radius
    });
    ForceResult {
        attractive,
        repulsive,
        resultant,
        nearest_obstacle_distance: nearest,
        local_minimum_flag,
    }
}

pub fn force_to_twist<T: Real>(
    force: &Vector2<T>,
    robot_heading: T,
    params: &ApfParams<T>,
    limits: &PlantLimits<T>,
) -> CommandTwist<T> {
    let magnitude = force.norm();
    if magnitude == T::zero() {
        return CommandTwist::stop();
    }
    let error = wrap_angle(force.y.atan2(force.x) - robot_heading);
    CommandTwist {
        v: params.k_v * magnitude * error.cos().max(T::zero()),
        omega: params.k_omega * error,
    }
    .clamped(limits)
}

/// Limits a field command so that its closing speed toward `goal` stays
/// within `max_closing`. Motion across or away from the goal is limited
/// only by `max_speed`.
pub fn limit_closing_speed<T: Real>(
    cmd: &CommandTwist<T>,
    heading: T,
    robot: &Vector2<T>,
    goal: &Vector2<T>,
    max_closing: T,
    max_speed: T,
) -> CommandTwist<T> {
    let to_goal = goal - robot;
    let d = to_goal.norm();
    let mut v = cmd.v.min(max_speed);
    if d > T::zero() {
        let cos = (to_goal.x * heading.cos() + to_goal.y * heading.sin()) / d;
        // Rounding leaves cos(pi/2) slightly positive; that is not closing.
        if cos > T::lit(1e-12) && v * cos > max_closing {
            v = max_closing / cos;
        }
    }
    CommandTwist { v, omega: cmd.omega }
}

/// Hands control from the follow command to the field command as the
/// nearest clearance drops from `blend_distance` to `rho0 / 2`.
pub fn blend<T: Real>(
    follow_cmd: &CommandTwist<T>,
    apf_cmd: &CommandTwist<T>,
    nearest_clearance: T,
    params: &ApfParams<T>,
) -> CommandTwist<T> {
    let full = params.rho0 * T::lit(0.5);
    if nearest_clearance >= params.blend_distance {
        return *follow_cmd;
    }
    if nearest_clearance <= full {
        return *apf_cmd;
    }
    let w = (nearest_clearance - full) / (params.blend_distance - full);
    CommandTwist {
        v: apf_cmd.v + w * (follow_cmd.v - apf_cmd.v),
        omega: apf_cmd.omega + w * (follow_cmd.omega - apf_cmd.omega),
    }
}

/// One row of a field dump. Forces are uncapped `-grad U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSample<T: Real> {
    pub x: T,
    pub y: T,
    pub fx: T,
    pub fy: T,
    pub u_total: T,
}

/// Samples the field at the centers of an `n x n` grid over the world bounds,
/// row by row from the bottom.
pub fn field_grid<T: Real>(
    world: &WorldState<T>,
    goal: Option<&Vector2<T>>,
    exclude_id: Option<&str>,
    params: &ApfParams<T>,
    n: usize,
) -> Vec<FieldSample<T>> {
    let b = &world.bounds;
    let count = T::from_usize(n).unwrap_or_else(T::one);
    let dx = (b.max_x - b.min_x) / count;
    let dy = (b.max_y - b.min_y) / count;
    let half = T::lit(0.5);
    (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % n, k / n);
            let p = Vector2::new(
                b.min_x + dx * (T::from_usize(i).unwrap() + half),
                b.min_y + dy * (T::from_usize(j).unwrap() + half),
            );
            let mut force = Vector2::zeros();
            let mut u_total = T::zero();
            if let Some(g) = goal {
                force += attractive_force(&p, g, params.k_att);
                u_total += attractive_potential(&p, g, params.k_att);
            }
            for o in obstacles(world, &p, world.robot.radius, exclude_id) {
                force += repulsive_force(&p, &o.point, o.rho, params.k_rep, params.rho0);
                u_total += repulsive_potential(o.rho, params.k_rep, params.rho0);
            }
            FieldSample {
                x: p.x,
                y: p.y,
                fx: force.x,
                fy: force.y,
                u_total,
            }
        })
        .collect()
}

pub fn write_field_csv<T: Real, W: Write>(samples: &[FieldSample<T>], mut out: W) -> Result<()> {
    writeln!(out, "x,y,fx,fy,u_total")?;
    for s in samples {
        writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.x.as_f64(),
            s.y.as_f64(),
            s.fx.as_f64(),
            s.fy.as_f64(),
            s.u_total.as_f64()
        )?;
    }
    Ok(())
}
