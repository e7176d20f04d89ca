//! The simulated world: walking persons, a lighting schedule, and a
//! differential-drive robot carrying the stereo rig.
//!
//! Persons move along timed waypoint paths (linear interpolation, holding
//! the last waypoint). The robot integrates unicycle kinematics with explicit
//! Euler steps. Everything lives on a flat ground plane; heights only exist
//! for the skeleton layout and the camera.

use crate::stereo::RigPoint3;
use serde::{Deserialize, Serialize};

/// Top of the vertical occlusion cylinder every person carries, in meters.
pub const OCCLUSION_CYLINDER_TOP_M: f64 = 1.7;

/// Value channel of clothing pixels under full lighting.
pub const CLOTHING_BASE_VALUE: f64 = 0.8;

/// Fixed body proportions. Only the shoulders and hips feed the tracking
/// logic; the rest of the skeleton is decoration at plausible offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyGeometry {
    pub shoulder_height_m: f64,
    pub hip_height_m: f64,
    pub shoulder_halfwidth_m: f64,
    pub hip_halfwidth_m: f64,
    /// Radius of the vertical cylinder used for line-of-sight blocking.
    pub occlusion_radius_m: f64,
}

impl Default for BodyGeometry {
    fn default() -> Self {
        BodyGeometry {
            shoulder_height_m: 1.4,
            hip_height_m: 0.9,
            shoulder_halfwidth_m: 0.2,
            hip_halfwidth_m: 0.15,
            occlusion_radius_m: 0.25,
        }
    }
}

/// A timed waypoint on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t_s: f64,
    pub x: f64,
    pub y: f64,
}

/// One simulated person: a path, a body, and clothing color.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonModel {
    pub id: String,
    pub path: Vec<Waypoint>,
    pub body: BodyGeometry,
    pub clothing_hue_deg: f64,
    pub clothing_hue_std_deg: f64,
    pub clothing_saturation: f64,
}

impl PersonModel {
    /// Ground position at time `t`: linear interpolation between waypoints,
    /// clamped to the path ends.
    pub fn position(&self, t: f64) -> (f64, f64) {
        let path = &self.path;
        if t <= path[0].t_s {
            return (path[0].x, path[0].y);
        }
        for pair in path.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if t <= b.t_s {
                let span = b.t_s - a.t_s;
                let f = if span > 0.0 { (t - a.t_s) / span } else { 1.0 };
                return (a.x + f * (b.x - a.x), a.y + f * (b.y - a.y));
            }
        }
        let last = path[path.len() - 1];
        (last.x, last.y)
    }

    /// Unit facing direction at time `t`: the tangent of the current path
    /// segment. A stationary person keeps the direction of the last segment
    /// actually walked, defaulting to +x.
    pub fn facing(&self, t: f64) -> (f64, f64) {
        let path = &self.path;
        let mut dir = (1.0, 0.0);
        for pair in path.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let len = (dx * dx + dy * dy).sqrt();
            if len > 1e-12 {
                dir = (dx / len, dy / len);
            }
            if t <= b.t_s {
                break;
            }
        }
        dir
    }

    /// Ground-plane centroid height of the four torso keypoints.
    pub fn torso_centroid_height(&self) -> f64 {
        (self.body.shoulder_height_m + self.body.hip_height_m) / 2.0
    }
}

/// The 18 skeleton keypoints of a person at time `t`, as 3D world points
/// `(x, y, height)`, COCO order. Keypoints sit on the person's frontal
/// plane: lateral offsets run along the person's left direction
/// (perpendicular to facing), so a follower directly behind sees the
/// shoulders at their full width.
pub fn skeleton_world_points(person: &PersonModel, t: f64) -> [(f64, f64, f64); 18] {
    let (px, py) = person.position(t);
    let (fx, fy) = person.facing(t);
    // Person's left direction.
    let (lx, ly) = (-fy, fx);
    let sw = person.body.shoulder_halfwidth_m;
    let hw = person.body.hip_halfwidth_m;
    let sh = person.body.shoulder_height_m;
    let hh = person.body.hip_height_m;
    // (lateral offset along person-left, height); right side is negative.
    let offsets: [(f64, f64); 18] = [
        (0.0, 1.62),          // nose
        (0.0, 1.45),          // neck
        (-sw, sh),            // right shoulder
        (-(sw + 0.03), 1.12), // right elbow
        (-(sw + 0.05), 0.84), // right wrist
        (sw, sh),             // left shoulder
        (sw + 0.03, 1.12),    // left elbow
        (sw + 0.05, 0.84),    // left wrist
        (-hw, hh),            // right hip
        (-hw, 0.48),          // right knee
        (-hw, 0.08),          // right ankle
        (hw, hh),             // left hip
        (hw, 0.48),           // left knee
        (hw, 0.08),           // left ankle
        (-0.035, 1.66),       // right eye
        (0.035, 1.66),        // left eye
        (-0.075, 1.63),       // right ear
        (0.075, 1.63),        // left ear
    ];
    offsets.map(|(lat, h)| (px + lx * lat, py + ly * lat, h))
}

/// Brightness over time: a piecewise-linear value-scale factor in (0, 1],
/// with optional hue jitter for extreme-lighting runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightingSchedule {
    pub points: Vec<(f64, f64)>,
    pub hue_jitter_std_deg: f64,
}

impl Default for LightingSchedule {
    fn default() -> Self {
        LightingSchedule {
            points: vec![(0.0, 1.0)],
            hue_jitter_std_deg: 0.0,
        }
    }
}

impl LightingSchedule {
    pub fn scale(&self, t: f64) -> f64 {
        let pts = &self.points;
        if pts.is_empty() {
            return 1.0;
        }
        if t <= pts[0].0 {
            return pts[0].1;
        }
        for pair in pts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if t <= b.0 {
                let span = b.0 - a.0;
                let f = if span > 0.0 { (t - a.0) / span } else { 1.0 };
                return a.1 + f * (b.1 - a.1);
            }
        }
        pts[pts.len() - 1].1
    }
}

/// The robot's planar pose and currently commanded twist.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub w: f64,
}

/// The full simulation state.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub time_s: f64,
    pub persons: Vec<PersonModel>,
    pub robot: RobotState,
    pub lighting: LightingSchedule,
}

/// Advance the world by one Euler step: persons follow their timed paths
/// implicitly (they are functions of time), the robot integrates
/// `x += v cos(theta) dt, y += v sin(theta) dt, theta += w dt`.
pub fn step_world(world: &mut World, dt: f64) {
    debug_assert!(dt > 0.0);
    let r = &mut world.robot;
    r.x += r.v * r.theta.cos() * dt;
    r.y += r.v * r.theta.sin() * dt;
    r.theta += r.w * dt;
    world.time_s += dt;
}

/// Transform a 3D world point `(x, y, height)` into the rig frame of a robot
/// whose rig is mounted at `rig_height_m`: x right, y down, z forward.
pub fn world_to_rig(robot: &RobotState, rig_height_m: f64, p: (f64, f64, f64)) -> RigPoint3 {
    let (dx, dy) = (p.0 - robot.x, p.1 - robot.y);
    let (c, s) = (robot.theta.cos(), robot.theta.sin());
    let forward = c * dx + s * dy;
    let left = -s * dx + c * dy;
    RigPoint3 {
        x: -left,
        y: rig_height_m - p.2,
        z: forward,
    }
}

/// World position (x, y, height) of a camera optical center offset
/// `offset_x` meters to the rig's right of the robot center.
pub fn camera_world_position(
    robot: &RobotState,
    rig_height_m: f64,
    offset_x: f64,
) -> (f64, f64, f64) {
    // Rig right direction in world coordinates.
    let (rx, ry) = (robot.theta.sin(), -robot.theta.cos());
    (
        robot.x + rx * offset_x,
        robot.y + ry * offset_x,
        rig_height_m,
    )
}
