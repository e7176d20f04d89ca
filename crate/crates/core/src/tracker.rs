//! Late-fusion target tracker: per-camera identification, cross-camera
//! disparity fusion, and the occlusion-aware track state machine.
//!
//! Each camera independently picks the detection whose torso histogram best
//! matches the template (and beats the threshold). Only when both cameras
//! agree on a pick is a depth measurement produced; a single-camera sighting
//! carries no range and counts as a miss. The state machine tolerates misses
//! up to `t_lost` before declaring the target lost; reacquisition re-runs the
//! same appearance gate every frame, with no motion model.

use crate::appearance::{self, Template};
use crate::detection::{self, PersonDetection, TorsoRegion};
use crate::stereo::{DepthMeasurement, StereoRig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tracker tunables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Similarity gate: a detection qualifies only if its score strictly
    /// exceeds this.
    pub threshold: f64,
    /// Maximum |v_left - v_right| of a fused pair, in pixels.
    pub epipolar_tol_px: f64,
    /// Seconds without a fused observation before the track is lost.
    pub t_lost_s: f64,
    /// Saturation floor for torso histograms.
    pub min_saturation: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            threshold: 0.6,
            epipolar_tol_px: 20.0,
            t_lost_s: 2.0,
            min_saturation: appearance::DEFAULT_MIN_SATURATION,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(format!(
                "tracker.threshold must be in (0, 1), got {}",
                self.threshold
            ));
        }
        if !(self.epipolar_tol_px.is_finite() && self.epipolar_tol_px >= 0.0) {
            return Err(format!(
                "tracker.epipolar_tol_px must be >= 0, got {}",
                self.epipolar_tol_px
            ));
        }
        if !(self.t_lost_s.is_finite() && self.t_lost_s > 0.0) {
            return Err(format!(
                "tracker.t_lost_s must be > 0, got {}",
                self.t_lost_s
            ));
        }
        if !(0.0..=1.0).contains(&self.min_saturation) {
            return Err(format!(
                "tracker.min_saturation must be in [0, 1], got {}",
                self.min_saturation
            ));
        }
        Ok(())
    }
}

/// The per-camera identification result: which detection was chosen and why.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedTarget {
    /// Index into the per-camera detection list passed to `identify`.
    pub index: usize,
    pub similarity: f64,
    pub torso: TorsoRegion,
}

/// Choose the target among one camera's detections.
///
/// Among detections with a valid torso, a non-empty histogram and similarity
/// strictly above the threshold, the winner has maximal similarity; ties
/// break toward the larger torso area, then the lower list index. `None`
/// means no detection qualified, which is a valid result, not an error.
pub fn identify(
    detections: &[PersonDetection],
    template: &Template,
    cfg: &TrackerConfig,
) -> Option<IdentifiedTarget> {
    let mut best: Option<IdentifiedTarget> = None;
    for (index, det) in detections.iter().enumerate() {
        let Ok(torso) = detection::torso_region(det) else {
            continue;
        };
        let Ok(hist) = detection::detection_histogram(det, cfg.min_saturation) else {
            continue;
        };
        let Ok(score) = appearance::similarity(&hist, &template.histogram) else {
            continue;
        };
        if !appearance::is_target(score, cfg.threshold) {
            continue;
        }
        let candidate = IdentifiedTarget {
            index,
            similarity: score,
            torso,
        };
        best = match best {
            None => Some(candidate),
            Some(cur) => {
                let replace = score > cur.similarity
                    || (score == cur.similarity && torso.area() > cur.torso.area());
                // Equal similarity and area keeps the earlier index.
                Some(if replace { candidate } else { cur })
            }
        };
    }
    best
}

/// Pick one camera's sole detection without the appearance gate.
///
/// Geometry-only replay fallback: when exactly one person is visible in the
/// camera and it has a valid torso, treat it as the target. Used by replay
/// with `--assume-single-person`; no similarity score is produced.
pub fn identify_single(detections: &[PersonDetection]) -> Option<IdentifiedTarget> {
    if detections.len() != 1 {
        return None;
    }
    let torso = detection::torso_region(&detections[0]).ok()?;
    Some(IdentifiedTarget {
        index: 0,
        similarity: f64::NAN,
        torso,
    })
}

/// Both cameras' picks for one frame, fused into a range observation.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedObservation {
    pub u_left_center: f64,
    pub u_right_center: f64,
    pub v_left_center: f64,
    pub v_right_center: f64,
    pub similarity_left: f64,
    pub similarity_right: f64,
    pub measurement: DepthMeasurement,
}

#[derive(Debug, Error, PartialEq)]
pub enum FuseError {
    #[error("bad match: non-positive disparity {disparity} px")]
    BadMatch { disparity: f64 },
    #[error("epipolar violation: |v_l - v_r| = {dv} px exceeds tolerance {tol} px")]
    EpipolarViolation { dv: f64, tol: f64 },
}

/// Combine the left and right picks into a depth measurement.
///
/// Disparity is the difference of the torso center abscissas; bearing comes
/// from their mean. Pairs whose vertical centers disagree by more than the
/// epipolar tolerance are rejected as mismatches.
pub fn fuse(
    left: &IdentifiedTarget,
    right: &IdentifiedTarget,
    rig: &StereoRig,
    cfg: &TrackerConfig,
    timestamp_s: f64,
) -> Result<FusedObservation, FuseError> {
    let dv = (left.torso.center_v - right.torso.center_v).abs();
    if dv > cfg.epipolar_tol_px {
        return Err(FuseError::EpipolarViolation {
            dv,
            tol: cfg.epipolar_tol_px,
        });
    }
    let u_l = left.torso.center_u;
    let u_r = right.torso.center_u;
    let z_m = rig
        .depth_from_disparity(u_l, u_r)
        .map_err(|_| FuseError::BadMatch {
            disparity: u_l - u_r,
        })?;
    let bearing_rad = rig.bearing((u_l + u_r) / 2.0);
    Ok(FusedObservation {
        u_left_center: u_l,
        u_right_center: u_r,
        v_left_center: left.torso.center_v,
        v_right_center: right.torso.center_v,
        similarity_left: left.similarity,
        similarity_right: right.similarity,
        measurement: DepthMeasurement {
            z_m,
            bearing_rad,
            u_left: u_l,
            u_right: u_r,
            timestamp_s,
        },
    })
}

/// Track mode. TRACKING means a fused observation arrived this frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrackMode {
    Searching,
    Tracking,
    Occluded,
    Lost,
}

impl std::fmt::Display for TrackMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TrackMode::Searching => "SEARCHING",
            TrackMode::Tracking => "TRACKING",
            TrackMode::Occluded => "OCCLUDED",
            TrackMode::Lost => "LOST",
        };
        write!(f, "{s}")
    }
}

/// The fusion state machine's state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub mode: TrackMode,
    /// Most recent fused measurement; always present while TRACKING, retained
    /// through OCCLUDED/LOST for diagnostics.
    pub last_measurement: Option<DepthMeasurement>,
    /// Seconds since the last fused observation; 0 while TRACKING.
    pub time_since_seen_s: f64,
}

impl TrackState {
    pub fn new() -> Self {
        TrackState {
            mode: TrackMode::Searching,
            last_measurement: None,
            time_since_seen_s: 0.0,
        }
    }
}

impl Default for TrackState {
    fn default() -> Self {
        Self::new()
    }
}

/// Advance the state machine by one frame.
///
/// A fused observation puts the track in TRACKING and zeroes the miss timer
/// from any mode. A miss moves TRACKING to OCCLUDED, accumulates `dt`, and
/// tips OCCLUDED into LOST once the timer exceeds `t_lost_s`. SEARCHING and
/// LOST absorb further misses.
pub fn step(
    state: &TrackState,
    fused: Option<&FusedObservation>,
    dt: f64,
    cfg: &TrackerConfig,
) -> TrackState {
    debug_assert!(dt > 0.0);
    match fused {
        Some(obs) => TrackState {
            mode: TrackMode::Tracking,
            last_measurement: Some(obs.measurement),
            time_since_seen_s: 0.0,
        },
        None => {
            let elapsed = state.time_since_seen_s + dt;
            let mode = match state.mode {
                TrackMode::Searching => TrackMode::Searching,
                TrackMode::Tracking | TrackMode::Occluded => {
                    if elapsed > cfg.t_lost_s {
                        TrackMode::Lost
                    } else {
                        TrackMode::Occluded
                    }
                }
                TrackMode::Lost => TrackMode::Lost,
            };
            TrackState {
                mode,
                last_measurement: state.last_measurement,
                time_since_seen_s: elapsed,
            }
        }
    }
}
