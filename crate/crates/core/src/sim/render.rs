//! Synthetic detector: projects each person's skeleton into both cameras,
//! applies occlusion, pixel noise, quantization and dropout, and samples
//! torso clothing pixels under the current lighting.
//!
//! A keypoint is absent in a camera when its image coordinate leaves the
//! frame or when the straight line from that camera's optical center to the
//! keypoint passes through another person's occlusion cylinder. Lighting
//! scales only the value channel of the sampled clothing pixels (hue is
//! untouched) and, optionally, drives extra detection dropout to model a
//! detector failing in the dark.

use super::world::{
    camera_world_position, skeleton_world_points, World, CLOTHING_BASE_VALUE,
    OCCLUSION_CYLINDER_TOP_M,
};
use crate::appearance::HsvPixel;
use crate::detection::{Keypoint, PersonDetection, KEYPOINT_COUNT};
use crate::stereo::{CameraSide, StereoRig};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Number of clothing pixels sampled per detection.
pub const TORSO_SAMPLES: usize = 500;

/// Sensor-realism knobs. All default to off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Gaussian noise added to each keypoint coordinate, in pixels.
    pub keypoint_noise_std_px: f64,
    /// Round keypoint coordinates to integer pixels (after noise).
    pub quantize_pixels: bool,
    /// Probability that a whole per-camera detection is dropped.
    pub detection_dropout_prob: f64,
    /// Lighting-coupled dropout: below this value-scale the dropout
    /// probability rises by `dropout_scale_gain * (threshold - scale)`.
    pub dropout_scale_threshold: f64,
    pub dropout_scale_gain: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            keypoint_noise_std_px: 0.0,
            quantize_pixels: false,
            detection_dropout_prob: 0.0,
            dropout_scale_threshold: 0.0,
            dropout_scale_gain: 0.0,
        }
    }
}

impl NoiseModel {
    /// Effective dropout probability under the given lighting scale.
    pub fn effective_dropout(&self, lighting_scale: f64) -> f64 {
        let extra =
            self.dropout_scale_gain * (self.dropout_scale_threshold - lighting_scale).max(0.0);
        (self.detection_dropout_prob + extra).clamp(0.0, 0.98)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.keypoint_noise_std_px.is_finite() && self.keypoint_noise_std_px >= 0.0) {
            return Err(format!(
                "noise.keypoint_noise_std_px must be >= 0, got {}",
                self.keypoint_noise_std_px
            ));
        }
        if !(0.0..1.0).contains(&self.detection_dropout_prob) {
            return Err(format!(
                "noise.detection_dropout_prob must be in [0, 1), got {}",
                self.detection_dropout_prob
            ));
        }
        if !(0.0..=1.0).contains(&self.dropout_scale_threshold) {
            return Err(format!(
                "noise.dropout_scale_threshold must be in [0, 1], got {}",
                self.dropout_scale_threshold
            ));
        }
        if !(self.dropout_scale_gain.is_finite() && self.dropout_scale_gain >= 0.0) {
            return Err(format!(
                "noise.dropout_scale_gain must be >= 0, got {}",
                self.dropout_scale_gain
            ));
        }
        Ok(())
    }
}

/// One synthetic detection with the person it came from.
#[derive(Debug, Clone)]
pub struct RenderedDetection {
    pub person_index: usize,
    pub detection: PersonDetection,
}

/// Both cameras' detections for one frame.
#[derive(Debug, Clone, Default)]
pub struct RenderedFrame {
    pub left: Vec<RenderedDetection>,
    pub right: Vec<RenderedDetection>,
}

/// True when the segment from `a` to `b` (3D, heights included) passes
/// through the vertical cylinder of radius `r` centered at `axis`, between
/// the ground and the cylinder top. Tangency does not block.
pub fn segment_hits_cylinder(
    a: (f64, f64, f64),
    b: (f64, f64, f64),
    axis: (f64, f64),
    r: f64,
) -> bool {
    // Horizontal quadratic |a_xy + t d_xy - axis|^2 < r^2.
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let (ex, ey) = (a.0 - axis.0, a.1 - axis.1);
    let qa = dx * dx + dy * dy;
    let qb = 2.0 * (dx * ex + dy * ey);
    let qc = ex * ex + ey * ey - r * r;
    let (mut t0, mut t1) = if qa <= 1e-18 {
        // Vertical (or degenerate) segment: inside or outside for all t.
        if qc < 0.0 {
            (0.0, 1.0)
        } else {
            return false;
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc <= 0.0 {
            return false;
        }
        let sq = disc.sqrt();
        ((-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa))
    };
    t0 = t0.max(0.0);
    t1 = t1.min(1.0);
    if t0 >= t1 {
        return false;
    }
    // Height constraint over the surviving t interval.
    let (h0, h1) = (a.2 + t0 * (b.2 - a.2), a.2 + t1 * (b.2 - a.2));
    let (hmin, hmax) = (h0.min(h1), h0.max(h1));
    hmin <= OCCLUSION_CYLINDER_TOP_M && hmax >= 0.0
}

/// Brute-force occlusion check: densely sample the segment and test each
/// point against the cylinder. Reference oracle for the analytic test.
pub fn segment_hits_cylinder_sampled(
    a: (f64, f64, f64),
    b: (f64, f64, f64),
    axis: (f64, f64),
    r: f64,
    samples: usize,
) -> bool {
    for i in 0..=samples {
        let t = i as f64 / samples as f64;
        let x = a.0 + t * (b.0 - a.0);
        let y = a.1 + t * (b.1 - a.1);
        let h = a.2 + t * (b.2 - a.2);
        let d2 = (x - axis.0).powi(2) + (y - axis.1).powi(2);
        if d2 < r * r && (0.0..=OCCLUSION_CYLINDER_TOP_M).contains(&h) {
            return true;
        }
    }
    false
}

/// Sample clothing pixels for one person under the given lighting scale.
pub fn sample_torso_pixels<R: Rng>(
    hue_deg: f64,
    hue_std_deg: f64,
    saturation: f64,
    lighting_scale: f64,
    hue_jitter_std_deg: f64,
    rng: &mut R,
) -> Vec<HsvPixel> {
    let hue_dist = Normal::new(hue_deg, hue_std_deg.max(1e-12)).expect("valid normal");
    let jitter_dist = Normal::new(0.0, hue_jitter_std_deg.max(1e-12)).expect("valid normal");
    let v = (CLOTHING_BASE_VALUE * lighting_scale).clamp(0.0, 1.0);
    (0..TORSO_SAMPLES)
        .map(|_| {
            let mut h = hue_dist.sample(rng);
            if hue_jitter_std_deg > 0.0 {
                h += jitter_dist.sample(rng);
            }
            HsvPixel::new(h, saturation, v)
        })
        .collect()
}

/// Render one frame of synthetic detections from both cameras.
///
/// Draw order is fixed (left camera then right, persons in scenario order),
/// so a given world, noise model and RNG state always produce identical
/// output.
pub fn render_detections<R: Rng>(
    world: &World,
    rig: &StereoRig,
    rig_height_m: f64,
    noise: &NoiseModel,
    frame_index: u64,
    timestamp_s: f64,
    rng: &mut R,
) -> RenderedFrame {
    let lighting_scale = world.lighting.scale(world.time_s);
    let dropout = noise.effective_dropout(lighting_scale);
    let kp_noise = if noise.keypoint_noise_std_px > 0.0 {
        Some(Normal::new(0.0, noise.keypoint_noise_std_px).expect("valid normal"))
    } else {
        None
    };

    let mut out = RenderedFrame::default();
    for camera in CameraSide::BOTH {
        let cam_pos =
            camera_world_position(&world.robot, rig_height_m, rig.camera_offset_x(camera));
        let detections = match camera {
            CameraSide::Left => &mut out.left,
            CameraSide::Right => &mut out.right,
        };
        for (person_index, person) in world.persons.iter().enumerate() {
            if dropout > 0.0 && rng.random::<f64>() < dropout {
                continue;
            }
            let skeleton = skeleton_world_points(person, world.time_s);
            let mut keypoints = [Keypoint::absent(); KEYPOINT_COUNT];
            let mut any_present = false;
            for (k, &world_pt) in skeleton.iter().enumerate() {
                let rig_pt = super::world::world_to_rig(&world.robot, rig_height_m, world_pt);
                let Ok((ul, vl, ur, vr)) = rig.project(rig_pt) else {
                    continue;
                };
                let (mut u, mut v) = match camera {
                    CameraSide::Left => (ul, vl),
                    CameraSide::Right => (ur, vr),
                };
                if !rig.in_frame(u, v) {
                    continue;
                }
                let blocked = world.persons.iter().enumerate().any(|(j, other)| {
                    j != person_index
                        && segment_hits_cylinder(
                            cam_pos,
                            world_pt,
                            other.position(world.time_s),
                            other.body.occlusion_radius_m,
                        )
                });
                if blocked {
                    continue;
                }
                if let Some(dist) = kp_noise {
                    u += dist.sample(rng);
                    v += dist.sample(rng);
                }
                if noise.quantize_pixels {
                    u = u.round();
                    v = v.round();
                }
                keypoints[k] = Keypoint::present(u, v, 1.0);
                any_present = true;
            }
            if !any_present {
                continue;
            }
            let torso_pixels = sample_torso_pixels(
                person.clothing_hue_deg,
                person.clothing_hue_std_deg,
                person.clothing_saturation,
                lighting_scale,
                world.lighting.hue_jitter_std_deg,
                rng,
            );
            detections.push(RenderedDetection {
                person_index,
                detection: PersonDetection {
                    camera,
                    frame_index,
                    timestamp_s,
                    keypoints,
                    torso_pixels,
                },
            });
        }
    }
    out
}
