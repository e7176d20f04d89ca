//! Deterministic closed-loop simulator: walking persons with colored
//! clothing, a lighting schedule, a differential-drive robot carrying the
//! stereo rig, and a synthetic detector with occlusion, noise and dropout.

mod render;
mod runner;
mod scenario;
mod world;

pub use render::{
    render_detections, sample_torso_pixels, segment_hits_cylinder, segment_hits_cylinder_sampled,
    NoiseModel, RenderedDetection, RenderedFrame, TORSO_SAMPLES,
};
pub use runner::{run_scenario, RunOptions, ScenarioRun};
pub use scenario::{
    BodyConfig, GainsConfig, GainsPatch, LightPoint, LightingConfig, PathPoint, PersonConfig,
    RigConfig, RobotStart, Scenario, ScenarioError,
};
pub use world::{
    camera_world_position, skeleton_world_points, step_world, world_to_rig, BodyGeometry,
    LightingSchedule, PersonModel, RobotState, Waypoint, World, CLOTHING_BASE_VALUE,
    OCCLUSION_CYLINDER_TOP_M,
};
