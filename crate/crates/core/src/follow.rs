//! Target locking, width-based reacquisition and the follow controller.
//!
//! Steering is bang-bang on the horizontal box center with an inclusive
//! 20 px deadband; forward speed keeps a set distance using the depth
//! reading. When the locked track disappears, the lock searches among
//! confirmed tracks matched this frame for one whose box width and image
//! position are close to the last seen box.

use serde::{Deserialize, Serialize};

use crate::num::Real;
use crate::tracker::{FrameResult, TrackId};
use crate::sensor::Detection;
use crate::world::PlantLimits;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandTwist<T: Real> {
    pub v: T,
    pub omega: T,
}

impl<T: Real> CommandTwist<T> {
    pub fn stop() -> Self {
        Self {
            v: T::zero(),
            omega: T::zero(),
        }
    }

    pub fn clamped(&self, limits: &PlantLimits<T>) -> Self {
        Self {
            v: self.v.clamp(T::zero(), limits.max_speed),
            omega: self.omega.clamp(-limits.max_turn_rate, limits.max_turn_rate),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TurnDirection {
    Left,
    Straight,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LockState {
    Unlocked,
    Locked,
    Searching,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FollowParams<T: Real> {
    pub center_deadband: T,
    pub desired_distance: T,
    pub distance_deadband: T,
    pub k_linear: T,
    pub max_speed: T,
    pub turn_rate: T,
    pub width_tolerance: T,
    pub center_tolerance: T,
    pub search_patience: u32,
}

impl<T: Real> Default for FollowParams<T> {
    fn default() -> Self {
        Self {
            center_deadband: T::lit(20.0),
            desired_distance: T::lit(1.5),
            distance_deadband: T::lit(0.2),
            k_linear: T::lit(0.8),
            max_speed: T::lit(1.5),
            turn_rate: T::lit(0.8),
            width_tolerance: T::lit(0.3),
            center_tolerance: T::lit(80.0),
            search_patience: 30,
        }
    }
}

/// Horizontal box geometry remembered for the lock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockBox<T: Real> {
    pub u_center: T,
    pub width_px: T,
    pub height_px: T,
}

/// A confirmed track seen this frame, as the lock sees it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetCandidate<T: Real> {
    pub track_id: TrackId,
    pub bbox: LockBox<T>,
    pub depth: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetLock<T: Real> {
    pub locked_track_id: Option<TrackId>,
    pub last_box: LockBox<T>,
    pub last_depth: T,
    pub frames_lost: u32,
    pub state: LockState,
}

impl<T: Real> Default for TargetLock<T> {
    fn default() -> Self {
        Self {
            locked_track_id: None,
            last_box: LockBox {
                u_center: T::zero(),
                width_px: T::zero(),
                height_px: T::zero(),
            },
            last_depth: T::zero(),
            frames_lost: 0,
            state: LockState::Unlocked,
        }
    }
}

/// What changed in a lock update; the simulator counts these.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockEvent {
    None,
    Acquired(TrackId),
    Refreshed,
    Lost,
    Reacquired { from: TrackId, to: TrackId },
    /// Search patience ran out.
    TargetLoss,
}

impl<T: Real> TargetLock<T> {
    fn locked_on(c: &TargetCandidate<T>) -> Self {
        Self {
            locked_track_id: Some(c.track_id),
            last_box: c.bbox,
            last_depth: c.depth,
            frames_lost: 0,
            state: LockState::Locked,
        }
    }
}

/// Confirmed tracks matched this frame, with the depth of their detection.
pub fn candidates<T: Real>(frame: &FrameResult<T>, detections: &[Detection<T>]) -> Vec<TargetCandidate<T>> {
    frame
        .matched_confirmed()
        .map(|(snap, d)| TargetCandidate {
            track_id: snap.id,
            bbox: LockBox {
                u_center: snap.bbox.u,
                width_px: snap.bbox.w,
                height_px: snap.bbox.h,
            },
            depth: detections[d].depth,
        })
        .collect()
}

/// Locks onto the candidate nearest the image center (smaller id on ties).
pub fn acquire_target<T: Real>(confirmed: &[TargetCandidate<T>], image_width: T) -> TargetLock<T> {
    let center = image_width * T::lit(0.5);
    confirmed
        .iter()
        .min_by(|a, b| {
            let da = (a.bbox.u_center - center).abs();
            let db = (b.bbox.u_center - center).abs();
            da.partial_cmp(&db)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.track_id.cmp(&b.track_id))
        })
        .map(TargetLock::locked_on)
        .unwrap_or_default()
}

pub fn steer<T: Real>(u_center: T, image_width: T, params: &FollowParams<T>) -> TurnDirection {
    let error = u_center - image_width * T::lit(0.5);
    if error < -params.center_deadband {
        TurnDirection::Left
    } else if error > params.center_deadband {
        TurnDirection::Right
    } else {
        TurnDirection::Straight
    }
}

/// Distance-keeping forward speed; zero up to `desired + deadband`.
pub fn speed<T: Real>(depth: T, params: &FollowParams<T>) -> T {
    if depth <= params.desired_distance + params.distance_deadband {
        return T::zero();
    }
    (params.k_linear * (depth - params.desired_distance)).clamp(T::zero(), params.max_speed)
}

/// Picks the reacquisition candidate per the width and position gates.
pub fn reacquire<'a, T: Real>(
    last_box: &LockBox<T>,
    candidates: &'a [TargetCandidate<T>],
    params: &FollowParams<T>,
) -> Option<&'a TargetCandidate<T>> {
    let last_w = last_box.width_px;
    candidates
        .iter()
        .filter_map(|c| {
            let ratio = (c.bbox.width_px - last_w).abs() / last_w;
            let shift = (c.bbox.u_center - last_box.u_center).abs();
            (ratio <= params.width_tolerance && shift <= params.center_tolerance).then_some((ratio, c))
        })
        .min_by(|(ra, a), (rb, b)| {
            ra.partial_cmp(rb)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.track_id.cmp(&b.track_id))
        })
        .map(|(_, c)| c)
}

/// Advances the lock by one frame given this frame's candidates.
///
/// An unlocked lock is left alone; acquisition is a separate decision.
pub fn update_lock<T: Real>(
    lock: &TargetLock<T>,
    candidates: &[TargetCandidate<T>],
    params: &FollowParams<T>,
) -> (TargetLock<T>, LockEvent) {
    let Some(id) = lock.locked_track_id else {
        return (*lock, LockEvent::None);
    };
    if let Some(c) = candidates.iter().find(|c| c.track_id == id) {
        return (TargetLock::locked_on(c), LockEvent::Refreshed);
    }
    if let Some(c) = reacquire(&lock.last_box, candidates, params) {
        return (
            TargetLock::locked_on(c),
            LockEvent::Reacquired {
                from: id,
                to: c.track_id,
            },
        );
    }
    let mut next = *lock;
    next.frames_lost += 1;
    next.state = LockState::Searching;
    if next.frames_lost > params.search_patience {
        return (TargetLock::default(), LockEvent::TargetLoss);
    }
    let event = if lock.state == LockState::Locked {
        LockEvent::Lost
    } else {
        LockEvent::None
    };
    (next, event)
}

pub fn follow_command<T: Real>(lock: &TargetLock<T>, params: &FollowParams<T>, turn: TurnDirection) -> CommandTwist<T> {
    if lock.state != LockState::Locked {
        return CommandTwist::stop();
    }
    let omega = match turn {
        TurnDirection::Left => params.turn_rate,
        TurnDirection::Right => -params.turn_rate,
        TurnDirection::Straight => T::zero(),
    };
    CommandTwist {
        v: speed(lock.last_depth, params),
        omega,
    }
}
