//! Tracking-by-detection with a Kalman motion model, gated appearance
//! matching ordered by track staleness, and an IoU fallback.

pub mod assignment;
pub mod kalman;
mod matching;
mod tracklog;

pub use assignment::{matching_cost, solve_assignment, CostCell};
pub use kalman::{gate, kf_predict, kf_update, KalmanParams, KalmanState, CHI2_95_4DOF};
pub use matching::{appearance_cost, cascade_match, measurement_of, Match, MatchKind, MatchOutcome};
pub use tracklog::{write_track_header, write_track_rows};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::sensor::{BoxCwh, Detection};

pub type TrackId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStage {
    Tentative,
    Confirmed,
    Deleted,
}

impl TrackStage {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackStage::Tentative => "tentative",
            TrackStage::Confirmed => "confirmed",
            TrackStage::Deleted => "deleted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerParams<T: Real> {
    pub n_init: u32,
    pub max_age: usize,
    pub gating_threshold: T,
    pub appearance_threshold: T,
    pub lambda_motion: T,
    pub iou_threshold: T,
    pub gallery_size: usize,
    pub kalman: KalmanParams<T>,
}

impl<T: Real> Default for TrackerParams<T> {
    fn default() -> Self {
        Self {
            n_init: 3,
            max_age: 30,
            gating_threshold: T::lit(CHI2_95_4DOF),
            appearance_threshold: T::lit(0.4),
            lambda_motion: T::zero(),
            iou_threshold: T::lit(0.3),
            gallery_size: 50,
            kalman: KalmanParams::default(),
        }
    }
}

impl<T: Real> TrackerParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gating_threshold", self.gating_threshold),
            ("appearance_threshold", self.appearance_threshold),
            ("iou_threshold", self.iou_threshold),
        ];
        for (name, v) in positive {
            if v <= T::zero() {
                return Err(Error::config(format!("tracker.{name}"), "must be positive"));
            }
        }
        if self.lambda_motion < T::zero() || self.lambda_motion > T::one() {
            return Err(Error::config("tracker.lambda_motion", "must lie in [0, 1]"));
        }
        if self.n_init == 0 || self.max_age == 0 || self.gallery_size == 0 {
            return Err(Error::config("tracker", "n_init, max_age and gallery_size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track<T: Real> {
    pub id: TrackId,
    pub state: KalmanState<T>,
    pub stage: TrackStage,
    pub hits: u32,
    pub age: u32,
    pub time_since_update: usize,
    /// Most recent appearance descriptors, oldest first.
    pub gallery: VecDeque<Vec<T>>,
}

impl<T: Real> Track<T> {
    /// Current box estimate from the filter mean.
    pub fn bbox(&self) -> BoxCwh<T> {
        let m = &self.state.mean;
        BoxCwh {
            u: m[0],
            v: m[1],
            w: m[2] * m[3],
            h: m[3],
        }
    }

    pub fn is_confirmed(&self) -> bool {
        self.stage == TrackStage::Confirmed
    }

    fn push_feature(&mut self, feature: &[T], capacity: usize) {
        if self.gallery.len() == capacity {
            self.gallery.pop_front();
        }
        self.gallery.push_back(feature.to_vec());
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment<T: Real> {
    pub track_id: TrackId,
    pub detection: usize,
    pub kind: MatchKind,
    pub gate_distance: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSnapshot<T: Real> {
    pub id: TrackId,
    pub bbox: BoxCwh<T>,
    pub time_since_update: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameResult<T: Real> {
    pub assignments: Vec<Assignment<T>>,
    pub new_track_ids: Vec<TrackId>,
    pub deleted_track_ids: Vec<TrackId>,
    /// Confirmed tracks after the step, by ascending id.
    pub confirmed: Vec<TrackSnapshot<T>>,
}

impl<T: Real> FrameResult<T> {
    pub fn detection_for(&self, track_id: TrackId) -> Option<usize> {
        self.assignments.iter().find(|a| a.track_id == track_id).map(|a| a.detection)
    }

    /// Confirmed tracks that were matched this frame, with their detection.
    pub fn matched_confirmed(&self) -> impl Iterator<Item = (&TrackSnapshot<T>, usize)> {
        self.confirmed
            .iter()
            .filter_map(move |s| self.detection_for(s.id).map(|d| (s, d)))
    }
}

/// One tracker instance: its live tracks and the id counter.
#[derive(Debug, Clone)]
pub struct Tracker<T: Real> {
    params: TrackerParams<T>,
    tracks: Vec<Track<T>>,
    next_id: TrackId,
}

impl<T: Real> Tracker<T> {
    pub fn new(params: TrackerParams<T>) -> Self {
        Self {
            params,
            tracks: Vec::new(),
            next_id: 1,
        }
    }

    pub fn params(&self) -> &TrackerParams<T> {
        &self.params
    }

    pub fn tracks(&self) -> &[Track<T>] {
        &self.tracks
    }

    pub fn confirmed_tracks(&self) -> impl Iterator<Item = &Track<T>> {
        self.tracks.iter().filter(|t| t.is_confirmed())
    }

    /// Moves every track's horizontal box center through `map`, for camera
    /// rotation between frames. Velocities are left alone.
    pub fn remap_columns(&mut self, map: impl Fn(T) -> T) {
        for track in &mut self.tracks {
            track.state.mean[0] = map(track.state.mean[0]);
        }
    }

    /// Runs one frame: predict, match, update, manage lifecycles.
    pub fn step(&mut self, detections: &[Detection<T>]) -> Result<FrameResult<T>> {
        let params = self.params;
        for track in &mut self.tracks {
            track.state = kf_predict(&track.state, &params.kalman);
            track.age += 1;
        }

        let outcome = cascade_match(&self.tracks, detections, &params)?;
        let mut result = FrameResult::default();

        for m in &outcome.matches {
            let det = &detections[m.detection];
            let track = &mut self.tracks[m.track];
            track.state = kf_update(&track.state, &measurement_of(det), &params.kalman)?;
            track.hits += 1;
            track.time_since_update = 0;
            track.push_feature(&det.feature, params.gallery_size);
            if track.stage == TrackStage::Tentative && track.hits >= params.n_init {
                track.stage = TrackStage::Confirmed;
            }
            result.assignments.push(Assignment {
                track_id: track.id,
                detection: m.detection,
                kind: m.kind,
                gate_distance: m.gate_distance,
            });
        }

        for &i in &outcome.unmatched_tracks {
            let track = &mut self.tracks[i];
            track.time_since_update += 1;
            if track.stage == TrackStage::Tentative || track.time_since_update > params.max_age {
                track.stage = TrackStage::Deleted;
            }
        }

        for &d in &outcome.unmatched_detections {
            let det = &detections[d];
            let id = self.next_id;
            self.next_id += 1;
            let mut track = Track {
                id,
                state: kalman::initiate(&measurement_of(det), &params.kalman),
                stage: if params.n_init <= 1 {
                    TrackStage::Confirmed
                } else {
                    TrackStage::Tentative
                },
                hits: 1,
                age: 1,
                time_since_update: 0,
                gallery: VecDeque::new(),
            };
            track.push_feature(&det.feature, params.gallery_size);
            self.tracks.push(track);
            result.new_track_ids.push(id);
            result.assignments.push(Assignment {
                track_id: id,
                detection: d,
                kind: MatchKind::Seed,
                gate_distance: None,
            });
        }

        result.deleted_track_ids = self
            .tracks
            .iter()
            .filter(|t| t.stage == TrackStage::Deleted)
            .map(|t| t.id)
            .collect();
        self.tracks.retain(|t| t.stage != TrackStage::Deleted);

        result.confirmed = self
            .tracks
            .iter()
            .filter(|t| t.is_confirmed())
            .map(|t| TrackSnapshot {
                id: t.id,
                bbox: t.bbox(),
                time_since_update: t.time_since_update,
            })
            .collect();
        result.assignments.sort_by_key(|a| a.track_id);
        Ok(result)
    }
}
