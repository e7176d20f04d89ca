//! Two-camera late-fusion person tracking and following.
//!
//! Instead of computing a dense range image and mining it for the target,
//! each camera of a parallel pair runs detection and appearance
//! identification on its own, and only the two identified target centers are
//! fused: their horizontal offset (disparity) gives the range, their mean
//! gives the bearing. The person is identified by the hue histogram of their
//! clothing below the shoulders, which is insensitive to brightness, and a
//! PID controller drives a differential-drive robot to follow at a set
//! distance.
//!
//! Module map:
//!
//! * [`stereo`]: parallel-rig pinhole projection, disparity depth, bearing.
//! * [`appearance`]: HSV conversion, hue histograms, templates, similarity.
//! * [`detection`]: skeleton keypoints, torso regions, keypoint log parsing.
//! * [`tracker`]: per-camera identification, fusion, track state machine.
//! * [`control`]: PID follow controller with engage/stop hysteresis.
//! * [`sim`]: deterministic closed-loop scenario simulator.
//! * [`replay`]: offline runs over recorded keypoint logs.
//! * [`trace`]: per-frame traces, metrics, and their file encodings.

// `!(x > 0.0)` guards are deliberate throughout: they reject NaN where
// `x <= 0.0` would let it through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appearance;
pub mod control;
pub mod detection;
pub mod replay;
pub mod sim;
pub mod stereo;
pub mod trace;
pub mod tracker;

pub use appearance::{HsvPixel, HueHistogram, RgbPixel, Template};
pub use control::{ControlCommand, ControllerConfig, FollowController, FollowGains, PidGains};
pub use detection::{Keypoint, PersonDetection, TorsoRegion};
pub use stereo::{CameraSide, DepthMeasurement, RigPoint3, StereoRig};
pub use trace::{Metrics, Trace, TraceRecord};
pub use tracker::{FusedObservation, TrackMode, TrackState, TrackerConfig};
