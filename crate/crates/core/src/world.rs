//! Metric 2D world: poses, shelf rectangles, walking pedestrians, the robot
//! plant and the collision/clearance geometry.
//!
//! All operations are pure: they take values and return new values.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::num::{wrap_angle, Real};

/// Turn rates below this magnitude use the straight-line update.
pub const STRAIGHT_LINE_OMEGA: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D<T: Real> {
    pub x: T,
    pub y: T,
    /// Heading in radians, kept in `(-pi, pi]`.
    pub theta: T,
}

impl<T: Real> Pose2D<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Vector2<T> {
        Vector2::new(self.x, self.y)
    }

    /// Expresses a world point in the robot frame (x forward, y left).
    pub fn to_local(&self, p: &Vector2<T>) -> Vector2<T> {
        let d = p - self.position();
        let (s, c) = self.theta.sin_cos();
        Vector2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    /// Maps a robot-frame point back into the world.
    pub fn to_world(&self, local: &Vector2<T>) -> Vector2<T> {
        let (s, c) = self.theta.sin_cos();
        Vector2::new(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
        )
    }
}

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T: Real> {
    pub min_x: T,
    pub min_y: T,
    pub max_x: T,
    pub max_y: T,
}

/// Shelves are axis-aligned rectangles.
pub type Shelf<T> = Rect<T>;

impl<T: Real> Rect<T> {
    pub fn new(min_x: T, min_y: T, max_x: T, max_y: T) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.min_x < self.max_x && self.min_y < self.max_y
    }

    pub fn contains(&self, p: &Vector2<T>) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    /// Closest point of the rectangle to `p` (`p` itself when inside).
    pub fn nearest_point(&self, p: &Vector2<T>) -> Vector2<T> {
        Vector2::new(
            p.x.clamp(self.min_x, self.max_x),
            p.y.clamp(self.min_y, self.max_y),
        )
    }

    pub fn distance_to(&self, p: &Vector2<T>) -> T {
        (p - self.nearest_point(p)).norm()
    }

    pub fn corners(&self) -> [Vector2<T>; 4] {
        [
            Vector2::new(self.min_x, self.min_y),
            Vector2::new(self.max_x, self.min_y),
            Vector2::new(self.max_x, self.max_y),
            Vector2::new(self.min_x, self.max_y),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pedestrian<T: Real> {
    pub id: String,
    pub position: Vector2<T>,
    pub height: T,
    pub shoulder_width: T,
    pub speed: T,
    pub waypoints: Vec<Vector2<T>>,
    pub waypoint_index: usize,
    pub spawn_time: T,
}

impl<T: Real> Pedestrian<T> {
    pub fn is_active(&self, time: T) -> bool {
        time >= self.spawn_time
    }

    /// True once the pedestrian stands on its final waypoint.
    pub fn has_arrived(&self) -> bool {
        match self.waypoints.last() {
            Some(last) => self.waypoint_index + 1 >= self.waypoints.len() && self.position == *last,
            None => true,
        }
    }

    pub fn radius(&self) -> T {
        self.shoulder_width * T::lit(0.5)
    }
}

/// Speed and turn-rate limits of the plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantLimits<T: Real> {
    pub max_speed: T,
    pub max_turn_rate: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotPlant<T: Real> {
    pub pose: Pose2D<T>,
    pub radius: T,
    pub max_speed: T,
    pub max_turn_rate: T,
}

impl<T: Real> RobotPlant<T> {
    pub fn limits(&self) -> PlantLimits<T> {
        PlantLimits {
            max_speed: self.max_speed,
            max_turn_rate: self.max_turn_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState<T: Real> {
    pub time: T,
    pub robot: RobotPlant<T>,
    pub pedestrians: Vec<Pedestrian<T>>,
    pub shelves: Vec<Shelf<T>>,
    pub bounds: Rect<T>,
}

impl<T: Real> WorldState<T> {
    pub fn active_pedestrians(&self) -> impl Iterator<Item = &Pedestrian<T>> {
        let time = self.time;
        self.pedestrians.iter().filter(move |p| p.is_active(time))
    }
}

/// Integrates unicycle kinematics over `dt` using the exact arc.
pub fn step_unicycle<T: Real>(pose: &Pose2D<T>, v: T, omega: T, dt: T) -> Pose2D<T> {
    debug_assert!(dt > T::zero(), "dt must be positive");
    let theta = pose.theta;
    if omega.abs() < T::lit(STRAIGHT_LINE_OMEGA) {
        return Pose2D {
            x: pose.x + v * theta.cos() * dt,
            y: pose.y + v * theta.sin() * dt,
            theta,
        };
    }
    let theta_next = theta + omega * dt;
    let r = v / omega;
    Pose2D {
        x: pose.x + r * (theta_next.sin() - theta.sin()),
        y: pose.y - r * (theta_next.cos() - theta.cos()),
        theta: wrap_angle(theta_next),
    }
}

/// Walks the pedestrian `speed * dt` toward its current waypoint.
///
/// Arriving within one step snaps onto the waypoint and moves on to the next
/// one; leftover distance in that step is not carried over. After the final
/// waypoint the pedestrian holds position.
pub fn advance_pedestrian<T: Real>(p: &Pedestrian<T>, dt: T) -> Pedestrian<T> {
    debug_assert!(dt > T::zero(), "dt must be positive");
    let mut next = p.clone();
    let Some(goal) = p.waypoints.get(p.waypoint_index).copied() else {
        return next;
    };
    let step = p.speed * dt;
    let to_goal = goal - p.position;
    let dist = to_goal.norm();
    if dist <= step {
        next.position = goal;
        if next.waypoint_index + 1 < p.waypoints.len() {
            next.waypoint_index += 1;
        }
    } else {
        next.position = p.position + to_goal * (step / dist);
    }
    next
}

/// Minimum distance from `point` to any shelf; zero inside one and
/// infinity for an empty list.
pub fn clearance<T: Real>(point: &Vector2<T>, shelves: &[Shelf<T>]) -> T {
    shelves
        .iter()
        .map(|s| s.distance_to(point))
        .fold(T::infinity(), |a, b| a.min(b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionReport<T: Real> {
    pub shelf_collision: bool,
    /// Ids of active pedestrians overlapping the robot disc.
    pub pedestrian_collisions: Vec<String>,
    /// Smallest distance from the robot center to a shelf or a pedestrian
    /// disc edge this tick.
    pub min_clearance: T,
}

impl<T: Real> CollisionReport<T> {
    pub fn any(&self) -> bool {
        self.shelf_collision || !self.pedestrian_collisions.is_empty()
    }
}

pub fn check_collision<T: Real>(world: &WorldState<T>) -> CollisionReport<T> {
    let robot = &world.robot;
    let center = robot.pose.position();
    let shelf_clearance = clearance(&center, &world.shelves);
    let mut min_clearance = shelf_clearance;
    let mut pedestrian_collisions = Vec::new();
    for p in world.active_pedestrians() {
        let center_distance = (p.position - center).norm();
        if center_distance < robot.radius + p.radius() {
            pedestrian_collisions.push(p.id.clone());
        }
        min_clearance = min_clearance.min(center_distance - p.radius());
    }
    CollisionReport {
        shelf_collision: shelf_clearance < robot.radius,
        pedestrian_collisions,
        min_clearance,
    }
}
