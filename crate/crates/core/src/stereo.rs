//! Parallel stereo rig geometry: pinhole projection, disparity depth, bearing.
//!
//! Two identical cameras share parallel optical axes and are separated by a
//! horizontal baseline. A world point at forward distance `z` appears in both
//! images shifted only along the horizontal axis; the shift (disparity) is
//! `focal_px * baseline / z`, so depth falls straight out of the pixel offset
//! of a matched point, with no dense matching or extrinsic calibration.
//!
//! Coordinates are continuous (sub-pixel) throughout. Integer quantization is
//! a simulator noise stage, not part of the model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid rig parameter: {0}")]
    InvalidParameter(String),
    #[error("point behind camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("non-positive disparity ({disparity} px): no finite depth for this match")]
    NonPositiveDisparity { disparity: f64 },
}

/// A pair of identical pinhole cameras mounted in parallel.
///
/// The rig frame has its origin at the midpoint between the two optical
/// centers: x points right, y points down, z points forward along the shared
/// optical axis. The left camera sits at x = -baseline/2, the right camera
/// at x = +baseline/2.
///
/// `focal_px` is the lens focal length divided by the pixel pitch, i.e. the
/// single number that converts metric angles into pixel offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoRig {
    pub baseline_m: f64,
    pub focal_px: f64,
    /// (c_x, c_y) in pixels. Defaults to the image center.
    pub principal_point: (f64, f64),
    /// (width, height) in pixels.
    pub resolution: (u32, u32),
    /// Horizontal field of view in degrees; `focal_px` is derived from it.
    pub hfov_deg: f64,
}

/// Horizontal-FOV to focal-length conversion: `(width/2) / tan(hfov/2)`.
pub fn focal_px_from_fov(width: u32, hfov_deg: f64) -> Result<f64, GeometryError> {
    if width == 0 {
        return Err(GeometryError::InvalidParameter("width must be > 0".into()));
    }
    if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
        return Err(GeometryError::InvalidParameter(format!(
            "hfov_deg must be in (0, 180), got {hfov_deg}"
        )));
    }
    let half = hfov_deg.to_radians() / 2.0;
    Ok((width as f64 / 2.0) / half.tan())
}

impl StereoRig {
    /// Build a rig from baseline, resolution and horizontal field of view,
    /// with the principal point at the image center.
    pub fn from_fov(
        baseline_m: f64,
        resolution: (u32, u32),
        hfov_deg: f64,
    ) -> Result<Self, GeometryError> {
        if !(baseline_m > 0.0) {
            return Err(GeometryError::InvalidParameter(format!(
                "baseline_m must be > 0, got {baseline_m}"
            )));
        }
        let (w, h) = resolution;
        if h == 0 {
            return Err(GeometryError::InvalidParameter("height must be > 0".into()));
        }
        let focal_px = focal_px_from_fov(w, hfov_deg)?;
        Ok(StereoRig {
            baseline_m,
            focal_px,
            principal_point: ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0),
            resolution,
            hfov_deg,
        })
    }

    /// Project a rig-frame point into both image planes.
    ///
    /// Returns `(u_left, v_left, u_right, v_right)` in continuous pixels.
    /// `v_left == v_right` always holds for a parallel rig.
    pub fn project(&self, p: RigPoint3) -> Result<(f64, f64, f64, f64), GeometryError> {
        if !(p.z > 0.0) {
            return Err(GeometryError::BehindCamera { z: p.z });
        }
        let (cx, cy) = self.principal_point;
        let half_b = self.baseline_m / 2.0;
        let u_left = cx + self.focal_px * (p.x + half_b) / p.z;
        let u_right = cx + self.focal_px * (p.x - half_b) / p.z;
        let v = cy + self.focal_px * p.y / p.z;
        Ok((u_left, v, u_right, v))
    }

    /// Depth from the horizontal offset of a matched point:
    /// `z = baseline_m * focal_px / (u_left - u_right)`.
    ///
    /// A non-positive disparity means the match is bad (a point at or beyond
    /// infinity); it is reported as an error, never a crash.
    pub fn depth_from_disparity(&self, u_left: f64, u_right: f64) -> Result<f64, GeometryError> {
        let disparity = u_left - u_right;
        if !(disparity > 0.0) {
            return Err(GeometryError::NonPositiveDisparity { disparity });
        }
        Ok(self.baseline_m * self.focal_px / disparity)
    }

    /// Horizontal bearing of an image abscissa, in radians.
    ///
    /// Zero means straight ahead; positive means the target is to the right.
    /// `u_center` is usually the mean of the left/right target center
    /// abscissas.
    pub fn bearing(&self, u_center: f64) -> f64 {
        ((u_center - self.principal_point.0) / self.focal_px).atan()
    }

    /// True when a continuous image coordinate lies inside the image.
    pub fn in_frame(&self, u: f64, v: f64) -> bool {
        let (w, h) = self.resolution;
        u >= 0.0 && u <= w as f64 - 1.0 && v >= 0.0 && v <= h as f64 - 1.0
    }

    /// World position of each optical center relative to the rig origin,
    /// as a signed x offset in meters.
    pub fn camera_offset_x(&self, camera: CameraSide) -> f64 {
        match camera {
            CameraSide::Left => -self.baseline_m / 2.0,
            CameraSide::Right => self.baseline_m / 2.0,
        }
    }
}

/// Which camera of the pair an observation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraSide {
    Left,
    Right,
}

impl CameraSide {
    pub const BOTH: [CameraSide; 2] = [CameraSide::Left, CameraSide::Right];
}

impl std::fmt::Display for CameraSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CameraSide::Left => write!(f, "left"),
            CameraSide::Right => write!(f, "right"),
        }
    }
}

/// A point in the rig frame: x right, y down, z forward, all in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigPoint3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl RigPoint3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        RigPoint3 { x, y, z }
    }
}

/// One fused range observation of the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthMeasurement {
    pub z_m: f64,
    /// Radians; 0 = straight ahead, positive = target to the right.
    pub bearing_rad: f64,
    pub u_left: f64,
    pub u_right: f64,
    pub timestamp_s: f64,
}
