//! Association costs and the matching cascade.

use super::assignment::{solve_assignment, CostCell};
use super::kalman::{self, Measurement};
use super::{Track, TrackStage, TrackerParams};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::sensor::Detection;

/// Minimum cosine distance between `feature` and the track's gallery.
pub fn appearance_cost<T: Real>(track: &Track<T>, feature: &[T]) -> Result<T> {
    if track.gallery.is_empty() {
        return Err(Error::EmptyGallery);
    }
    Ok(track
        .gallery
        .iter()
        .map(|g| T::one() - g.iter().zip(feature).fold(T::zero(), |acc, (a, b)| acc + *a * *b))
        .fold(T::infinity(), |a, b| a.min(b)))
}

/// Kalman measurement `(u, v, w / h, h)` of a detection box.
pub fn measurement_of<T: Real>(det: &Detection<T>) -> Measurement<T> {
    Measurement::new(det.u_center, det.v_center, det.width_px / det.height_px, det.height_px)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchKind {
    /// Appearance match in cascade tier `time_since_update == tier`.
    Appearance { tier: usize },
    Iou,
    /// The detection started a new track.
    Seed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Match<T: Real> {
    pub track: usize,
    pub detection: usize,
    pub kind: MatchKind,
    /// Squared Mahalanobis distance used by the gate, for appearance matches.
    pub gate_distance: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchOutcome<T: Real> {
    pub matches: Vec<Match<T>>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Matches already-predicted `tracks` against `detections`.
///
/// Confirmed tracks are matched tier by tier in order of
/// `time_since_update` on a gated appearance cost. Tentative tracks and
/// confirmed tracks updated on the previous frame that are still unmatched
/// then get an IoU round.
pub fn cascade_match<T: Real>(
    tracks: &[Track<T>],
    detections: &[Detection<T>],
    params: &TrackerParams<T>,
) -> Result<MatchOutcome<T>> {
    let mut remaining: Vec<usize> = (0..detections.len()).collect();
    let mut matched_track = vec![false; tracks.len()];
    let mut matches = Vec::new();
    let lambda = params.lambda_motion;
    let measurements: Vec<_> = detections.iter().map(measurement_of).collect();

    for tier in 0..=params.max_age {
        if remaining.is_empty() {
            break;
        }
        let tier_tracks: Vec<usize> = (0..tracks.len())
            .filter(|&i| tracks[i].stage == TrackStage::Confirmed && tracks[i].time_since_update == tier)
            .collect();
        if tier_tracks.is_empty() {
            continue;
        }
        let mut gates = vec![vec![None; remaining.len()]; tier_tracks.len()];
        let mut cost: Vec<Vec<CostCell<T>>> = vec![vec![None; remaining.len()]; tier_tracks.len()];
        for (r, &ti) in tier_tracks.iter().enumerate() {
            let track = &tracks[ti];
            for (c, &di) in remaining.iter().enumerate() {
                let (passes, d2) = kalman::gate(&track.state, &measurements[di], &params.kalman, params.gating_threshold)?;
                if !passes {
                    continue;
                }
                let Ok(app) = appearance_cost(track, &detections[di].feature) else {
                    continue;
                };
                if app > params.appearance_threshold {
                    continue;
                }
                gates[r][c] = Some(d2);
                cost[r][c] = Some(lambda * d2 + (T::one() - lambda) * app);
            }
        }
        let solved = solve_assignment(&cost);
        let mut used = vec![false; remaining.len()];
        for &(r, c) in &solved {
            matched_track[tier_tracks[r]] = true;
            used[c] = true;
            matches.push(Match {
                track: tier_tracks[r],
                detection: remaining[c],
                kind: MatchKind::Appearance { tier },
                gate_distance: gates[r][c],
            });
        }
        remaining = remaining
            .iter()
            .zip(&used)
            .filter(|(_, u)| !**u)
            .map(|(d, _)| *d)
            .collect();
    }

    let iou_tracks: Vec<usize> = (0..tracks.len())
        .filter(|&i| {
            !matched_track[i]
                && (tracks[i].stage == TrackStage::Tentative
                    || (tracks[i].stage == TrackStage::Confirmed && tracks[i].time_since_update == 0))
        })
        .collect();
    if !iou_tracks.is_empty() && !remaining.is_empty() {
        let max_cost = T::one() - params.iou_threshold;
        let cost: Vec<Vec<CostCell<T>>> = iou_tracks
            .iter()
            .map(|&ti| {
                let b = tracks[ti].bbox();
                remaining
                    .iter()
                    .map(|&di| {
                        let c = T::one() - b.iou(&detections[di].bbox());
                        (c <= max_cost).then_some(c)
                    })
                    .collect()
            })
            .collect();
        let solved = solve_assignment(&cost);
        let mut used = vec![false; remaining.len()];
        for &(r, c) in &solved {
            matched_track[iou_tracks[r]] = true;
            used[c] = true;
            matches.push(Match {
                track: iou_tracks[r],
                detection: remaining[c],
                kind: MatchKind::Iou,
                gate_distance: None,
            });
        }
        remaining = remaining
            .iter()
            .zip(&used)
            .filter(|(_, u)| !**u)
            .map(|(d, _)| *d)
            .collect();
    }

    Ok(MatchOutcome {
        matches,
        unmatched_tracks: (0..tracks.len()).filter(|&i| !matched_track[i]).collect(),
        unmatched_detections: remaining,
    })
}
