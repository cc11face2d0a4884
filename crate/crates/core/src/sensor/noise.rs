//! Counter-based sensor noise and hashed appearance descriptors.
//!
//! Every random draw comes from a ChaCha stream seeded by hashing
//! `(tag, seed, frame, pedestrian id)`, so one pedestrian's noise does not
//! depend on which other pedestrians exist or on detection order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CameraModel, Detection};
use crate::num::Real;

const MIN_BOX_PX: f64 = 1.0;
const MIN_DEPTH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub pixel_sigma: f64,
    pub depth_sigma: f64,
    pub feature_sigma: f64,
    pub miss_rate: f64,
    /// Not part of scenario files; the engine copies the scenario seed in.
    #[serde(skip)]
    pub rng_seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            pixel_sigma: 1.0,
            depth_sigma: 0.02,
            feature_sigma: 0.05,
            miss_rate: 0.0,
            rng_seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn noiseless(rng_seed: u64) -> Self {
        Self {
            pixel_sigma: 0.0,
            depth_sigma: 0.0,
            feature_sigma: 0.0,
            miss_rate: 0.0,
            rng_seed,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.pixel_sigma >= 0.0
            && self.depth_sigma >= 0.0
            && self.feature_sigma >= 0.0
            && (0.0..=1.0).contains(&self.miss_rate)
    }
}

fn stream(tag: &str, seed: u64, frame: u64, id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    h.update(seed.to_le_bytes());
    h.update(frame.to_le_bytes());
    h.update(id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Deterministic unit descriptor for a pedestrian label.
pub fn base_feature<T: Real>(pedestrian_id: &str, dim: usize) -> Vec<T> {
    base_feature_f64(pedestrian_id, dim).into_iter().map(T::lit).collect()
}

fn base_feature_f64(pedestrian_id: &str, dim: usize) -> Vec<f64> {
    let mut rng = stream("appearance-base", 0, 0, pedestrian_id);
    normalized((0..dim).map(|_| gaussian(&mut rng)).collect())
}

/// Per-frame noisy descriptor: `normalize(base + N(0, feature_sigma))`.
pub fn synth_feature<T: Real>(pedestrian_id: &str, noise: &NoiseSpec, frame: u64, dim: usize) -> Vec<T> {
    let base = base_feature_f64(pedestrian_id, dim);
    if noise.feature_sigma == 0.0 {
        return base.into_iter().map(T::lit).collect();
    }
    let mut rng = stream("appearance-noise", noise.rng_seed, frame, pedestrian_id);
    let noisy = base
        .into_iter()
        .map(|b| b + noise.feature_sigma * gaussian(&mut rng))
        .collect();
    normalized(noisy).into_iter().map(T::lit).collect()
}

/// Applies box/depth jitter, descriptor noise and random misses.
pub fn corrupt<T: Real>(
    detections: &[Detection<T>],
    noise: &NoiseSpec,
    frame: u64,
    camera: &CameraModel<T>,
) -> Vec<Detection<T>> {
    let image_width = camera.image_width.as_f64();
    let mut out = Vec::with_capacity(detections.len());
    for (index, det) in detections.iter().enumerate() {
        let key = match &det.source {
            Some(id) => id.clone(),
            None => format!("#{index}"),
        };
        let mut rng = stream("detection", noise.rng_seed, frame, &key);
        if rng.random::<f64>() < noise.miss_rate {
            continue;
        }
        let mut jitter = |value: T, sigma: f64| value.as_f64() + sigma * gaussian(&mut rng);
        let u = jitter(det.u_center, noise.pixel_sigma).clamp(0.0, image_width);
        let v = jitter(det.v_center, noise.pixel_sigma);
        let w = jitter(det.width_px, noise.pixel_sigma).max(MIN_BOX_PX);
        let h = jitter(det.height_px, noise.pixel_sigma).max(MIN_BOX_PX);
        let depth = jitter(det.depth, noise.depth_sigma).max(MIN_DEPTH);
        let feature = match &det.source {
            Some(id) => synth_feature(id, noise, frame, det.feature.len()),
            None => det.feature.clone(),
        };
        out.push(Detection {
            u_center: T::lit(u),
            v_center: T::lit(v),
            width_px: T::lit(w),
            height_px: T::lit(h),
            depth: T::lit(depth),
            confidence: det.confidence,
            feature,
            source: det.source.clone(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(id: &str, u: f64) -> Detection<f64> {
        Detection {
            u_center: u,
            v_center: 240.0,
            width_px: 50.0,
            height_px: 170.0,
            depth: 5.0,
            confidence: 1.0,
            feature: base_feature(id, 16),
            source: Some(id.into()),
        }
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_noise_leaves_detections_unchanged() {
        let cam = CameraModel::default();
        let dets = vec![det("a", 100.0), det("b", 400.0)];
        assert_eq!(corrupt(&dets, &NoiseSpec::noiseless(3), 7, &cam), dets);
    }

    #[test]
    fn full_miss_rate_drops_everything() {
        let cam = CameraModel::default();
        let noise = NoiseSpec {
            miss_rate: 1.0,
            ..NoiseSpec::default()
        };
        assert!(corrupt(&[det("a", 100.0), det("b", 400.0)], &noise, 0, &cam).is_empty());
    }

    #[test]
    fn noise_is_reproducible_and_order_independent() {
        let cam = CameraModel::default();
        let noise = NoiseSpec {
            pixel_sigma: 2.0,
            rng_seed: 11,
            ..NoiseSpec::default()
        };
        let dets = vec![det("a", 100.0), det("b", 400.0)];
        let first = corrupt(&dets, &noise, 5, &cam);
        assert_eq!(first, corrupt(&dets, &noise, 5, &cam));
        assert_ne!(first[0].u_center, 100.0);

        let reversed: Vec<_> = dets.iter().rev().cloned().collect();
        let mut again = corrupt(&reversed, &noise, 5, &cam);
        again.reverse();
        assert_eq!(first, again);

        // Dropping one pedestrian leaves the other's noise untouched.
        assert_eq!(corrupt(&dets[1..], &noise, 5, &cam)[0], first[1]);
        assert_ne!(corrupt(&dets, &noise, 6, &cam), first);
    }

    #[test]
    fn features_are_unit_and_distinct() {
        let a: Vec<f64> = synth_feature("a", &NoiseSpec::noiseless(0), 0, 16);
        assert_eq!(a, base_feature::<f64>("a", 16));
        assert_eq!(a, synth_feature::<f64>("a", &NoiseSpec::noiseless(9), 4, 16));
        let b: Vec<f64> = base_feature("b", 16);
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!(1.0 - dot > 0.0);

        let noisy = NoiseSpec {
            feature_sigma: 0.1,
            ..NoiseSpec::default()
        };
        for frame in 0..20 {
            let f: Vec<f64> = synth_feature("a", &noisy, frame, 16);
            assert!((norm(&f) - 1.0).abs() < 1e-9);
        }
        assert!((norm(&a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn corrupted_boxes_stay_valid() {
        let cam = CameraModel::default();
        let noise = NoiseSpec {
            pixel_sigma: 30.0,
            depth_sigma: 10.0,
            ..NoiseSpec::default()
        };
        let mut small = det("edge", 1.0);
        small.width_px = 2.0;
        small.depth = 0.1;
        for frame in 0..50 {
            for d in corrupt(&[small.clone()], &noise, frame, &cam) {
                assert!((0.0..=640.0).contains(&d.u_center));
                assert!(d.width_px > 0.0 && d.height_px > 0.0 && d.depth > 0.0);
            }
        }
    }
}
