//! The closed loop: render detections, identify, fuse, advance the track
//! state, compute the drive command, move the world. One fixed-rate pass per
//! frame, fully deterministic for a given scenario and seed.

use super::render::{render_detections, sample_torso_pixels, RenderedFrame};
use super::scenario::{Scenario, ScenarioError};
use super::world::{step_world, PersonModel, World};
use crate::appearance::{build_histogram, Template};
use crate::control::FollowController;
use crate::detection::{FrameDetections, PersonDetection};
use crate::stereo::CameraSide;
use crate::trace::{compute_metrics, IdentityTruth, Metrics, Trace, TraceRecord};
use crate::tracker::{self, TrackMode, TrackState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Optional extras recorded during a run.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Keep every rendered detection so the run can be exported as canonical
    /// keypoint logs and replayed offline.
    pub record_detections: bool,
}

/// Everything a scenario run produces.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub trace: Trace,
    pub metrics: Metrics,
    /// The appearance template built from the target at t = 0, when a target
    /// is configured.
    pub template: Option<Template>,
    /// Canonical keypoint logs (left, right), when recording was requested.
    pub detection_logs: Option<(String, String)>,
}

fn build_template(
    person: &PersonModel,
    scenario: &Scenario,
    world: &World,
    rng: &mut ChaCha8Rng,
) -> Result<Template, ScenarioError> {
    let pixels = sample_torso_pixels(
        person.clothing_hue_deg,
        person.clothing_hue_std_deg,
        person.clothing_saturation,
        world.lighting.scale(0.0),
        world.lighting.hue_jitter_std_deg,
        rng,
    );
    let histogram = build_histogram(&pixels, scenario.tracker.min_saturation);
    if histogram.is_empty() {
        return Err(ScenarioError::Invalid(vec![format!(
            "target '{}' clothing yields an empty appearance histogram \
             (clothing_saturation {} below tracker.min_saturation {}?)",
            person.id, person.clothing_saturation, scenario.tracker.min_saturation
        )]));
    }
    Ok(Template::new(
        person.id.clone(),
        histogram,
        scenario.tracker.min_saturation,
    ))
}

fn true_distance_to(world: &World, rig_height_m: f64, person: &PersonModel) -> f64 {
    let (px, py) = person.position(world.time_s);
    let ch = person.torso_centroid_height();
    let dx = px - world.robot.x;
    let dy = py - world.robot.y;
    let dh = ch - rig_height_m;
    (dx * dx + dy * dy + dh * dh).sqrt()
}

fn detections_of(frame: &RenderedFrame, camera: CameraSide) -> Vec<PersonDetection> {
    let side = match camera {
        CameraSide::Left => &frame.left,
        CameraSide::Right => &frame.right,
    };
    side.iter().map(|r| r.detection.clone()).collect()
}

/// Run one scenario end to end.
///
/// The loop per frame: render -> identify per camera -> fuse -> step the
/// track state -> update the controller -> integrate the robot. Returns the
/// per-frame trace plus summary metrics; bit-identical across runs with the
/// same scenario and seed.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<ScenarioRun, ScenarioError> {
    scenario.validate()?;
    let rig = scenario
        .rig
        .build()
        .map_err(|e| ScenarioError::Invalid(vec![e]))?;
    let rig_height = scenario.rig.height_m;
    let dt = scenario.dt_s;
    let n_frames = (scenario.duration_s / dt).round().max(1.0) as u64;

    let mut world = scenario.build_world();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let target_index = scenario.target_index();
    let template = match target_index {
        Some(i) => Some(build_template(
            &world.persons[i],
            scenario,
            &world,
            &mut rng,
        )?),
        None => None,
    };

    let mut state = TrackState::new();
    let mut controller = FollowController::new(scenario.gains.build(), scenario.controller);
    let mut trace = Trace::default();
    let mut truth = target_index.map(|target_index| IdentityTruth {
        target_index,
        chosen: Vec::with_capacity(n_frames as usize),
    });
    let mut log_left: Vec<FrameDetections> = Vec::new();
    let mut log_right: Vec<FrameDetections> = Vec::new();

    for frame in 0..n_frames {
        let t = frame as f64 * dt;
        world.time_s = t;

        let rendered = render_detections(
            &world,
            &rig,
            rig_height,
            &scenario.noise,
            frame,
            t,
            &mut rng,
        );
        let dets_left = detections_of(&rendered, CameraSide::Left);
        let dets_right = detections_of(&rendered, CameraSide::Right);

        let pick_left = template
            .as_ref()
            .and_then(|tpl| tracker::identify(&dets_left, tpl, &scenario.tracker));
        let pick_right = template
            .as_ref()
            .and_then(|tpl| tracker::identify(&dets_right, tpl, &scenario.tracker));

        if let Some(truth) = truth.as_mut() {
            truth.chosen.push((
                pick_left
                    .as_ref()
                    .map(|p| rendered.left[p.index].person_index),
                pick_right
                    .as_ref()
                    .map(|p| rendered.right[p.index].person_index),
            ));
        }

        let fused = match (&pick_left, &pick_right) {
            (Some(l), Some(r)) => tracker::fuse(l, r, &rig, &scenario.tracker, t).ok(),
            _ => None,
        };
        state = tracker::step(&state, fused.as_ref(), dt, &scenario.tracker);
        let cmd = controller.update(&state, dt);

        let tracking = state.mode == TrackMode::Tracking;
        trace.records.push(TraceRecord {
            t_s: t,
            true_distance_m: target_index
                .map(|i| true_distance_to(&world, rig_height, &world.persons[i])),
            estimated_z_m: tracking.then(|| state.last_measurement.unwrap().z_m),
            bearing_rad: tracking.then(|| state.last_measurement.unwrap().bearing_rad),
            track_mode: state.mode,
            v_cmd: cmd.v,
            w_cmd: cmd.w,
            engaged: cmd.engaged,
            similarity_left: pick_left.as_ref().map(|p| p.similarity),
            similarity_right: pick_right.as_ref().map(|p| p.similarity),
        });

        if opts.record_detections {
            log_left.push(FrameDetections {
                frame,
                t_s: t,
                camera: CameraSide::Left,
                people: dets_left,
            });
            log_right.push(FrameDetections {
                frame,
                t_s: t,
                camera: CameraSide::Right,
                people: dets_right,
            });
        }

        world.robot.v = cmd.v;
        world.robot.w = cmd.w;
        step_world(&mut world, dt);
    }

    let metrics = compute_metrics(&trace, truth.as_ref(), scenario.controller.z_setpoint_m);
    let detection_logs = opts.record_detections.then(|| {
        (
            crate::detection::write_canonical_frames(&log_left),
            crate::detection::write_canonical_frames(&log_right),
        )
    });
    Ok(ScenarioRun {
        trace,
        metrics,
        template,
        detection_logs,
    })
}
