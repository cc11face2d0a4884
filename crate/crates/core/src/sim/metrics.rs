//! Run metrics, ground-truth identity attribution and the text writers.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::TickRecord;
use crate::error::Result;
use crate::sensor::BoxCwh;
use crate::tracker::TrackId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub id_switches_on_lock: usize,
    pub tracker_id_switches_ground_truth: usize,
    pub target_loss_events: usize,
    pub collisions: usize,
    pub min_clearance_overall: f64,
    pub final_distance_to_target: f64,
    pub completed: bool,
    pub path_length: f64,
    pub steps_run: usize,
}

/// Extra per-run facts that are not part of the report file.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    /// Lock moved to a new track id without going through a full loss.
    pub reacquisitions: usize,
    /// Acquisitions after the lock was given up.
    pub reacquisitions_after_loss: usize,
    pub local_minimum_ticks: usize,
    pub arrived: bool,
    /// Whether the lock at the final step was on the ground-truth target.
    pub final_lock_on_target: bool,
    pub ticks_locked: usize,
    pub ticks_locked_on_target: usize,
    /// Smallest center distance minus pedestrian radius, per pedestrian.
    pub min_clearance_by_pedestrian: BTreeMap<String, f64>,
    /// Longest stretch of frames each pedestrian kept one attributed id.
    pub longest_id_hold: BTreeMap<String, usize>,
}

/// Ground truth and matched confirmed tracks of one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttributionFrame {
    pub truth: Vec<(String, BoxCwh<f64>)>,
    pub tracks: Vec<(TrackId, BoxCwh<f64>)>,
}

/// Attributes each track to its highest-IoU pedestrian, keeping the best
/// track per pedestrian.
pub fn attribute(frame: &AttributionFrame) -> BTreeMap<String, TrackId> {
    let mut best: BTreeMap<&str, (f64, TrackId)> = BTreeMap::new();
    for (id, tbox) in &frame.tracks {
        let pick = frame
            .truth
            .iter()
            .map(|(name, gbox)| (gbox.iou(tbox), name.as_str()))
            .filter(|(iou, _)| *iou > 0.0)
            .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(a.1)));
        if let Some((iou, name)) = pick {
            let slot = best.entry(name).or_insert((iou, *id));
            if iou > slot.0 || (iou == slot.0 && *id < slot.1) {
                *slot = (iou, *id);
            }
        }
    }
    best.into_iter().map(|(k, (_, id))| (k.to_string(), id)).collect()
}

/// Counts frames where a pedestrian's attributed id differs from the one
/// it last had. Frames without an attribution do not reset the history.
pub fn ground_truth_id_switches(frames: &[AttributionFrame]) -> usize {
    let mut last: BTreeMap<String, TrackId> = BTreeMap::new();
    let mut switches = 0;
    for frame in frames {
        for (name, id) in attribute(frame) {
            if let Some(prev) = last.insert(name, id) {
                if prev != id {
                    switches += 1;
                }
            }
        }
    }
    switches
}

/// Longest span, in frames from first to last sighting, over which each
/// pedestrian kept the same attributed id. Unattributed frames inside the
/// span (occlusion) count toward it.
pub fn longest_id_hold(frames: &[AttributionFrame]) -> BTreeMap<String, usize> {
    // (current id, span start, last frame seen, best span)
    let mut state: BTreeMap<String, (TrackId, usize, usize, usize)> = BTreeMap::new();
    for (k, frame) in frames.iter().enumerate() {
        for (name, id) in attribute(frame) {
            let entry = state.entry(name).or_insert((id, k, k, 0));
            if entry.0 != id {
                *entry = (id, k, k, entry.3);
            }
            entry.2 = k;
            entry.3 = entry.3.max(k - entry.1 + 1);
        }
    }
    state.into_iter().map(|(k, v)| (k, v.3)).collect()
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

pub fn write_metrics<W: Write>(m: &MetricsReport, mut out: W) -> Result<()> {
    writeln!(out, "id_switches_on_lock={}", m.id_switches_on_lock)?;
    writeln!(out, "tracker_id_switches_ground_truth={}", m.tracker_id_switches_ground_truth)?;
    writeln!(out, "target_loss_events={}", m.target_loss_events)?;
    writeln!(out, "collisions={}", m.collisions)?;
    writeln!(out, "min_clearance_overall={}", fmt6(m.min_clearance_overall))?;
    writeln!(out, "final_distance_to_target={}", fmt6(m.final_distance_to_target))?;
    writeln!(out, "completed={}", m.completed)?;
    writeln!(out, "path_length={}", fmt6(m.path_length))?;
    writeln!(out, "steps_run={}", m.steps_run)?;
    Ok(())
}

pub const TICKS_HEADER: &str =
    "t,robot_x,robot_y,robot_theta,target_x,target_y,lock_id,cmd_v,cmd_omega,min_clearance,n_detections,n_confirmed";

/// Missing values (no target, no lock) are written as empty fields.
pub fn write_ticks_csv<W: Write>(ticks: &[TickRecord], mut out: W) -> Result<()> {
    writeln!(out, "{TICKS_HEADER}")?;
    for t in ticks {
        let (tx, ty) = match t.target_position {
            Some(p) => (fmt6(p.x), fmt6(p.y)),
            None => (String::new(), String::new()),
        };
        let lock = t.lock_id.map(|id| id.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{tx},{ty},{lock},{},{},{},{},{}",
            fmt6(t.t),
            fmt6(t.robot.x),
            fmt6(t.robot.y),
            fmt6(t.robot.theta),
            fmt6(t.cmd.v),
            fmt6(t.cmd.omega),
            fmt6(t.min_clearance),
            t.n_detections,
            t.n_confirmed
        )?;
    }
    Ok(())
}
