//! Synthetic forward-facing RGB-D camera.
//!
//! Pedestrians are projected through a pinhole model into image-space boxes
//! with a direct depth reading and a hashed appearance descriptor. Occlusion
//! works on horizontal image intervals only.

mod detlog;
mod noise;

pub use detlog::{read_detlog, read_detlog_file, write_detlog, write_detlog_file, DetectionLog};
pub use noise::{base_feature, corrupt, synth_feature, NoiseSpec};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::num::Real;
use crate::world::{Pose2D, Shelf, WorldState};

/// Near clipping distance for shelf silhouettes, in meters.
const NEAR_PLANE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel<T: Real> {
    pub focal_px: T,
    pub image_width: T,
    pub image_height: T,
    pub max_depth: T,
    /// Height of the optical center above the floor.
    pub mount_height: T,
    /// Dimension of the appearance descriptor attached to detections.
    pub feature_dim: usize,
    /// Covered fraction of a box above which it is suppressed.
    pub occlusion_fraction: T,
}

impl<T: Real> Default for CameraModel<T> {
    fn default() -> Self {
        Self {
            focal_px: T::lit(500.0),
            image_width: T::lit(640.0),
            image_height: T::lit(480.0),
            max_depth: T::lit(12.0),
            mount_height: T::lit(0.85),
            feature_dim: 16,
            occlusion_fraction: T::lit(0.6),
        }
    }
}

impl<T: Real> CameraModel<T> {
    pub fn horizontal_fov(&self) -> T {
        T::lit(2.0) * (self.image_width / (T::lit(2.0) * self.focal_px)).atan()
    }

    pub fn center_u(&self) -> T {
        self.image_width * T::lit(0.5)
    }

    /// Image column of a camera-frame point (x forward, y left).
    pub fn column(&self, local: &Vector2<T>) -> T {
        self.center_u() - self.focal_px * local.y / local.x
    }

    /// Bearing (left positive) of an image column.
    pub fn bearing(&self, u: T) -> T {
        ((self.center_u() - u) / self.focal_px).atan()
    }

    /// Column at which a static point seen at `u` appears after the camera
    /// turns by `dtheta` (left positive). Points that would end up behind
    /// the image plane keep their column.
    pub fn rotate_column(&self, u: T, dtheta: T) -> T {
        let bearing = self.bearing(u) - dtheta;
        if bearing.abs() >= T::frac_pi_2() {
            return u;
        }
        self.center_u() - self.focal_px * bearing.tan()
    }

    /// Ground-plane world position seen at column `u` and forward depth.
    pub fn ground_point(&self, pose: &Pose2D<T>, u: T, depth: T) -> Vector2<T> {
        let lateral = (self.center_u() - u) / self.focal_px * depth;
        pose.to_world(&Vector2::new(depth, lateral))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T: Real> {
    pub u_center: T,
    pub v_center: T,
    pub width_px: T,
    pub height_px: T,
    pub depth: T,
    pub confidence: T,
    pub feature: Vec<T>,
    /// Ground-truth pedestrian label; present for synthetic detections and
    /// for logs that carry a `gt` column.
    pub source: Option<String>,
}

impl<T: Real> Detection<T> {
    pub fn left(&self) -> T {
        self.u_center - self.width_px * T::lit(0.5)
    }

    pub fn right(&self) -> T {
        self.u_center + self.width_px * T::lit(0.5)
    }

    /// Box as `(u_center, v_center, width, height)`.
    pub fn bbox(&self) -> BoxCwh<T> {
        BoxCwh {
            u: self.u_center,
            v: self.v_center,
            w: self.width_px,
            h: self.height_px,
        }
    }
}

/// Image box stored as center, width and height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxCwh<T: Real> {
    pub u: T,
    pub v: T,
    pub w: T,
    pub h: T,
}

impl<T: Real> BoxCwh<T> {
    pub fn iou(&self, other: &Self) -> T {
        let half = T::lit(0.5);
        let ix = (self.u + self.w * half).min(other.u + other.w * half)
            - (self.u - self.w * half).max(other.u - other.w * half);
        let iy = (self.v + self.h * half).min(other.v + other.h * half)
            - (self.v - self.h * half).max(other.v - other.h * half);
        if ix <= T::zero() || iy <= T::zero() {
            return T::zero();
        }
        let inter = ix * iy;
        inter / (self.w * self.h + other.w * other.h - inter)
    }
}

/// Noise-free pinhole projection of every active pedestrian in view.
pub fn project<T: Real>(world: &WorldState<T>, camera: &CameraModel<T>) -> Vec<Detection<T>> {
    let pose = &world.robot.pose;
    let f = camera.focal_px;
    let (w_img, h_img) = (camera.image_width, camera.image_height);
    let half = T::lit(0.5);
    let mut out = Vec::new();
    for p in world.active_pedestrians() {
        let local = pose.to_local(&p.position);
        let forward = local.x;
        if forward <= T::zero() || forward > camera.max_depth {
            continue;
        }
        let u = camera.column(&local);
        if u < T::zero() || u > w_img {
            continue;
        }
        let half_w = f * p.shoulder_width / forward * half;
        let left = (u - half_w).max(T::zero());
        let right = (u + half_w).min(w_img);
        let top = (h_img * half + f * (camera.mount_height - p.height) / forward).max(T::zero());
        let bottom = (h_img * half + f * camera.mount_height / forward).min(h_img);
        if right <= left || bottom <= top {
            continue;
        }
        out.push(Detection {
            u_center: (left + right) * half,
            v_center: (top + bottom) * half,
            width_px: right - left,
            height_px: bottom - top,
            depth: forward,
            confidence: T::one(),
            feature: base_feature(&p.id, camera.feature_dim),
            source: Some(p.id.clone()),
        });
    }
    out
}

/// Horizontal image interval covered by the part of `shelf` that lies
/// between the camera and `max_forward`.
fn shelf_silhouette<T: Real>(
    shelf: &Shelf<T>,
    pose: &Pose2D<T>,
    camera: &CameraModel<T>,
    max_forward: T,
) -> Option<(T, T)> {
    let mut poly: Vec<Vector2<T>> = shelf.corners().iter().map(|c| pose.to_local(c)).collect();
    poly = clip_forward(&poly, T::lit(NEAR_PLANE), true);
    poly = clip_forward(&poly, max_forward, false);
    if poly.is_empty() {
        return None;
    }
    let cols = poly.iter().map(|p| camera.column(p));
    let lo = cols.clone().fold(T::infinity(), |a, b| a.min(b));
    let hi = cols.fold(-T::infinity(), |a, b| a.max(b));
    let lo = lo.max(T::zero());
    let hi = hi.min(camera.image_width);
    (hi > lo).then_some((lo, hi))
}

/// Sutherland-Hodgman against `x >= limit` (keep_above) or `x <= limit`.
fn clip_forward<T: Real>(poly: &[Vector2<T>], limit: T, keep_above: bool) -> Vec<Vector2<T>> {
    let inside = |p: &Vector2<T>| if keep_above { p.x >= limit } else { p.x <= limit };
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let cur = poly[i];
        let prev = poly[(i + poly.len() - 1) % poly.len()];
        match (inside(&prev), inside(&cur)) {
            (true, true) => out.push(cur),
            (true, false) => out.push(cross_at(&prev, &cur, limit)),
            (false, true) => {
                out.push(cross_at(&prev, &cur, limit));
                out.push(cur);
            }
            (false, false) => {}
        }
    }
    out
}

fn cross_at<T: Real>(a: &Vector2<T>, b: &Vector2<T>, x: T) -> Vector2<T> {
    let t = (x - a.x) / (b.x - a.x);
    Vector2::new(x, a.y + (b.y - a.y) * t)
}

/// Length of `[lo, hi]` covered by the union of `intervals`, plus the
/// merged union restricted to `[lo, hi]`.
fn covered(lo: f64, hi: f64, intervals: &mut [(f64, f64)]) -> (f64, Vec<(f64, f64)>) {
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for &(a, b) in intervals.iter() {
        let (a, b) = (a.max(lo), b.min(hi));
        if b <= a {
            continue;
        }
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    (merged.iter().map(|(a, b)| b - a).sum(), merged)
}

/// Suppresses or shrinks detections hidden behind nearer pedestrians or
/// shelves.
///
/// A box whose covered fraction exceeds `camera.occlusion_fraction` is
/// dropped; a box with a smaller (or exactly equal) covered fraction is
/// shrunk to its widest visible piece. Survivors keep their input order.
pub fn apply_occlusion<T: Real>(
    detections: &[Detection<T>],
    world: &WorldState<T>,
    camera: &CameraModel<T>,
) -> Vec<Detection<T>> {
    let pose = &world.robot.pose;
    let fraction = camera.occlusion_fraction.as_f64();
    let mut out = Vec::with_capacity(detections.len());
    for det in detections {
        let (lo, hi) = (det.left().as_f64(), det.right().as_f64());
        let mut occluders: Vec<(f64, f64)> = detections
            .iter()
            .filter(|o| o.depth < det.depth)
            .map(|o| (o.left().as_f64(), o.right().as_f64()))
            .collect();
        occluders.extend(
            world
                .shelves
                .iter()
                .filter_map(|s| shelf_silhouette(s, pose, camera, det.depth))
                .map(|(a, b)| (a.as_f64(), b.as_f64())),
        );
        let (cover, union) = covered(lo, hi, &mut occluders);
        if cover <= 0.0 {
            out.push(det.clone());
            continue;
        }
        if cover / (hi - lo) > fraction {
            continue;
        }
        // Widest visible piece; the leftmost one wins a tie.
        let mut best = (lo, lo);
        let mut cursor = lo;
        for &(a, b) in union.iter().chain(std::iter::once(&(hi, hi))) {
            if a - cursor > best.1 - best.0 {
                best = (cursor, a);
            }
            cursor = cursor.max(b);
        }
        let mut shrunk = det.clone();
        shrunk.u_center = T::lit((best.0 + best.1) * 0.5);
        shrunk.width_px = T::lit(best.1 - best.0);
        out.push(shrunk);
    }
    out
}

#[cfg(test)]
mod tests {
    #[test]
    fn rotate_column_matches_reprojection() {
        let cam = CameraModel::<f64>::default();
        let point = Vector2::new(6.0, 1.2);
        let before = Pose2D::new(0.0, 0.0, 0.0);
        let after = Pose2D::new(0.0, 0.0, 0.15);
        let u0 = cam.column(&before.to_local(&point));
        let u1 = cam.column(&after.to_local(&point));
        assert!((cam.rotate_column(u0, 0.15) - u1).abs() < 1e-9);
        assert_eq!(cam.rotate_column(u0, 0.0), u0);
    }

    use super::*;
    use crate::world::{Pedestrian, Rect, RobotPlant};

    fn ped(id: &str, x: f64, y: f64) -> Pedestrian<f64> {
        Pedestrian {
            id: id.into(),
            position: Vector2::new(x, y),
            height: 1.7,
            shoulder_width: 0.5,
            speed: 0.0,
            waypoints: vec![Vector2::new(x, y)],
            waypoint_index: 0,
            spawn_time: 0.0,
        }
    }

    fn world(peds: Vec<Pedestrian<f64>>, shelves: Vec<Shelf<f64>>) -> WorldState<f64> {
        WorldState {
            time: 0.0,
            robot: RobotPlant {
                pose: Pose2D::new(0.0, 0.0, 0.0),
                radius: 0.3,
                max_speed: 1.0,
                max_turn_rate: 1.0,
            },
            pedestrians: peds,
            shelves,
            bounds: Rect::new(-20.0, -20.0, 20.0, 20.0),
        }
    }

    fn det(u: f64, w: f64, depth: f64) -> Detection<f64> {
        Detection {
            u_center: u,
            v_center: 240.0,
            width_px: w,
            height_px: 100.0,
            depth,
            confidence: 1.0,
            feature: vec![1.0],
            source: None,
        }
    }

    #[test]
    fn projection_examples() {
        let cam = CameraModel::<f64>::default();
        let d = project(&world(vec![ped("a", 5.0, 0.0)], vec![]), &cam);
        assert_eq!(d.len(), 1);
        assert!((d[0].u_center - 320.0).abs() < 1e-9);
        assert!((d[0].width_px - 50.0).abs() < 1e-9);
        assert!((d[0].height_px - 170.0).abs() < 1e-9);
        assert_eq!(d[0].depth, 5.0);
        assert!((d[0].v_center - 240.0).abs() < 1e-9);

        let d = project(&world(vec![ped("a", 10.0, 0.0)], vec![]), &cam);
        assert!((d[0].width_px - 25.0).abs() < 1e-9);
        assert!((d[0].height_px - 85.0).abs() < 1e-9);
        assert!((d[0].u_center - 320.0).abs() < 1e-9);

        assert!(project(&world(vec![ped("a", -3.0, 0.0)], vec![]), &cam).is_empty());
    }

    #[test]
    fn left_of_robot_projects_left_of_center() {
        let cam = CameraModel::<f64>::default();
        let d = project(&world(vec![ped("a", 5.0, 1.0)], vec![]), &cam);
        assert!((d[0].u_center - 220.0).abs() < 1e-9);
        assert!((cam.bearing(d[0].u_center) - (0.2f64).atan()).abs() < 1e-12);
        let g = cam.ground_point(&Pose2D::new(0.0, 0.0, 0.0), d[0].u_center, d[0].depth);
        assert!((g - Vector2::new(5.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn close_pedestrian_is_clipped_vertically() {
        let cam = CameraModel::<f64>::default();
        let d = project(&world(vec![ped("a", 1.0, 0.0)], vec![]), &cam);
        assert_eq!(d[0].height_px, 480.0);
        assert!((d[0].width_px - 250.0).abs() < 1e-9);
    }

    #[test]
    fn edge_pedestrian_is_clipped_horizontally() {
        let cam = CameraModel::<f64>::default();
        // Center at u = 320 - 500 * 3.1 / 5 = 10, half width 25.
        let d = project(&world(vec![ped("a", 5.0, 3.1)], vec![]), &cam);
        assert!((d[0].left() - 0.0).abs() < 1e-9);
        assert!((d[0].right() - 35.0).abs() < 1e-9);
    }

    #[test]
    fn occlusion_examples() {
        let cam = CameraModel::<f64>::default();
        let w = world(vec![ped("a", 4.0, 0.0), ped("b", 8.0, 0.0)], vec![]);
        let d = apply_occlusion(&project(&w, &cam), &w, &cam);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].source.as_deref(), Some("a"));

        let w1 = world(vec![ped("a", 4.0, 0.0)], vec![]);
        let p = project(&w1, &cam);
        assert_eq!(apply_occlusion(&p, &w1, &cam), p);

        let empty = world(vec![], vec![]);
        let d = apply_occlusion(&[det(320.0, 40.0, 4.0), det(335.0, 50.0, 8.0)], &empty, &cam);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0], det(320.0, 40.0, 4.0));
        assert_eq!((d[1].left(), d[1].right()), (340.0, 360.0));
    }

    #[test]
    fn occlusion_above_fraction_suppresses() {
        let cam = CameraModel::<f64>::default();
        let empty = world(vec![], vec![]);
        // A covers [300, 340]; B spans [305, 355]: 35 / 50 = 0.7.
        let d = apply_occlusion(&[det(320.0, 40.0, 4.0), det(330.0, 50.0, 8.0)], &empty, &cam);
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn middle_occluder_keeps_widest_side() {
        let cam = CameraModel::<f64>::default();
        let empty = world(vec![], vec![]);
        // Far box [300, 400], near box [330, 360]; pieces 30 and 40 wide.
        let d = apply_occlusion(&[det(350.0, 100.0, 8.0), det(345.0, 30.0, 3.0)], &empty, &cam);
        assert_eq!((d[0].left(), d[0].right()), (360.0, 400.0));
    }

    #[test]
    fn shelf_between_camera_and_pedestrian_hides_it() {
        let cam = CameraModel::<f64>::default();
        let shelf = Rect::new(2.0, -1.0, 3.0, 1.0);
        let w = world(vec![ped("a", 6.0, 0.0)], vec![shelf]);
        assert!(apply_occlusion(&project(&w, &cam), &w, &cam).is_empty());

        // The same shelf behind the pedestrian does not.
        let w = world(vec![ped("a", 1.5, 0.0)], vec![shelf]);
        assert_eq!(apply_occlusion(&project(&w, &cam), &w, &cam).len(), 1);
    }

    #[test]
    fn side_shelf_does_not_hide_pedestrian_in_aisle() {
        let cam = CameraModel::<f64>::default();
        // Aisle of width 2 along +x; pedestrian in the middle 4 m ahead.
        let shelves = vec![Rect::new(-1.0, 1.0, 10.0, 2.0), Rect::new(-1.0, -2.0, 10.0, -1.0)];
        let w = world(vec![ped("a", 4.0, 0.0)], shelves);
        let d = apply_occlusion(&project(&w, &cam), &w, &cam);
        assert_eq!(d, project(&w, &cam));
    }
}
