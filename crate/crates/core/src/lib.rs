//! Person-following for warehouse robots in a deterministic 2D simulator.
//!
//! The pipeline runs synthetic RGB-D detections through a DeepSort-style
//! tracker, locks onto one person with a width-based reacquisition rule,
//! steers with a pixel deadband and avoids shelves and other people with an
//! artificial potential field.
//!
//! Geometry, sensing, tracking, following and the field are generic over
//! [`num::Real`] (`f32` or `f64`); the scenario engine uses `f64`, and the
//! aliases below name the concrete types it works with.

pub mod apf;
pub mod error;
pub mod follow;
pub mod num;
pub mod sensor;
pub mod sim;
pub mod tracker;
pub mod world;

pub use error::{Error, Result};

pub type Point = nalgebra::Vector2<f64>;
pub type Pose = world::Pose2D<f64>;
pub type Shelf = world::Shelf<f64>;
pub type Pedestrian = world::Pedestrian<f64>;
pub type World = world::WorldState<f64>;
pub type Camera = sensor::CameraModel<f64>;
pub type Detection = sensor::Detection<f64>;
pub type Tracker = tracker::Tracker<f64>;
pub type TrackerParams = tracker::TrackerParams<f64>;
pub type FollowParams = follow::FollowParams<f64>;
pub type ApfParams = apf::ApfParams<f64>;
pub type Twist = follow::CommandTwist<f64>;
