//! Offline replay: run the identify -> fuse -> track -> control loop over a
//! pair of recorded keypoint logs instead of live cameras.
//!
//! Frames are paired across the two streams by equal frame index (the
//! hardware-sync assumption). Control commands are computed exactly as in a
//! live run but actuate nothing. Replaying logs exported from the simulator
//! reproduces the simulator's estimated-range sequence exactly, because the
//! same code path sees the same numbers.

use crate::appearance::Template;
use crate::control::{ControllerConfig, FollowController, FollowGains};
use crate::detection::FrameDetections;
use crate::stereo::StereoRig;
use crate::trace::{compute_metrics, Metrics, Trace, TraceRecord};
use crate::tracker::{self, TrackMode, TrackState, TrackerConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("streams misaligned at pair {index}: left frame {left:?}, right frame {right:?}")]
    Misaligned {
        index: usize,
        left: Option<u64>,
        right: Option<u64>,
    },
    #[error("no frames to replay")]
    Empty,
    #[error("a template is required unless --assume-single-person is set")]
    MissingTemplate,
}

/// Everything replay needs besides the two streams.
#[derive(Debug, Clone)]
pub struct ReplayConfig {
    pub rig: StereoRig,
    pub tracker: TrackerConfig,
    pub controller: ControllerConfig,
    pub gains: FollowGains,
    /// Geometry-only fallback: when a camera sees exactly one person, treat
    /// it as the target without the appearance gate.
    pub assume_single_person: bool,
    /// Frame period used when timestamps do not advance.
    pub default_dt_s: f64,
}

/// Run the tracking loop over paired left/right frame streams.
pub fn replay(
    left: &[FrameDetections],
    right: &[FrameDetections],
    template: Option<&Template>,
    cfg: &ReplayConfig,
) -> Result<(Trace, Metrics), ReplayError> {
    if template.is_none() && !cfg.assume_single_person {
        return Err(ReplayError::MissingTemplate);
    }
    if left.is_empty() && right.is_empty() {
        return Err(ReplayError::Empty);
    }
    align_check(left, right)?;

    let mut state = TrackState::new();
    let mut controller = FollowController::new(cfg.gains, cfg.controller);
    let mut trace = Trace::default();
    let mut prev_t: Option<f64> = None;

    for (l, r) in left.iter().zip(right.iter()) {
        let t = l.t_s;
        let dt = match prev_t {
            Some(p) if t - p > 0.0 => t - p,
            _ => cfg.default_dt_s,
        };
        prev_t = Some(t);

        let (pick_left, pick_right) = if cfg.assume_single_person {
            (
                tracker::identify_single(&l.people),
                tracker::identify_single(&r.people),
            )
        } else {
            let tpl = template.expect("checked above");
            (
                tracker::identify(&l.people, tpl, &cfg.tracker),
                tracker::identify(&r.people, tpl, &cfg.tracker),
            )
        };

        let fused = match (&pick_left, &pick_right) {
            (Some(a), Some(b)) => tracker::fuse(a, b, &cfg.rig, &cfg.tracker, t).ok(),
            _ => None,
        };
        state = tracker::step(&state, fused.as_ref(), dt, &cfg.tracker);
        let cmd = controller.update(&state, dt);

        let tracking = state.mode == TrackMode::Tracking;
        let score_of = |p: &Option<tracker::IdentifiedTarget>| {
            p.as_ref().map(|c| c.similarity).filter(|s| !s.is_nan())
        };
        trace.records.push(TraceRecord {
            t_s: t,
            true_distance_m: None,
            estimated_z_m: tracking.then(|| state.last_measurement.unwrap().z_m),
            bearing_rad: tracking.then(|| state.last_measurement.unwrap().bearing_rad),
            track_mode: state.mode,
            v_cmd: cmd.v,
            w_cmd: cmd.w,
            engaged: cmd.engaged,
            similarity_left: score_of(&pick_left),
            similarity_right: score_of(&pick_right),
        });
    }

    let metrics = compute_metrics(&trace, None, cfg.controller.z_setpoint_m);
    Ok((trace, metrics))
}

fn align_check(left: &[FrameDetections], right: &[FrameDetections]) -> Result<(), ReplayError> {
    let n = left.len().max(right.len());
    for i in 0..n {
        let lf = left.get(i).map(|f| f.frame);
        let rf = right.get(i).map(|f| f.frame);
        if lf != rf {
            return Err(ReplayError::Misaligned {
                index: i,
                left: lf,
                right: rf,
            });
        }
    }
    Ok(())
}
