//! PID follow controller: forward speed from range error, turn rate from
//! bearing, with engage/stop hysteresis and a safe stop during occlusion.
//!
//! Engagement is hysteretic: the robot starts moving only once the target is
//! farther than `z_engage_m` and keeps following until the range drops to
//! `z_stop_m`, so a range hovering between the two bounds never chatters the
//! drive on and off. While the track is occluded the commanded speed ramps
//! linearly to zero over `decel_time_s` with the integrators frozen; a lost
//! track zeroes everything.

use crate::tracker::{TrackMode, TrackState};
use serde::{Deserialize, Serialize};

/// Gains for one PID axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Anti-windup clamp on the integral term (the `ki * integral`
    /// contribution), in output units.
    pub integral_limit: f64,
}

impl PidGains {
    pub fn validate(&self, axis: &str) -> Result<(), String> {
        for (name, g) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(g.is_finite() && g >= 0.0) {
                return Err(format!("gains.{axis}.{name} must be >= 0, got {g}"));
            }
        }
        if !(self.integral_limit.is_finite() && self.integral_limit > 0.0) {
            return Err(format!(
                "gains.{axis}.integral_limit must be > 0, got {}",
                self.integral_limit
            ));
        }
        Ok(())
    }
}

/// The two control axes: range (drives forward speed) and heading (drives
/// turn rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowGains {
    pub distance: PidGains,
    pub heading: PidGains,
}

impl Default for FollowGains {
    fn default() -> Self {
        FollowGains {
            distance: PidGains {
                kp: 0.5,
                ki: 0.05,
                kd: 0.1,
                integral_limit: 1.0,
            },
            heading: PidGains {
                kp: 1.5,
                ki: 0.0,
                kd: 0.2,
                integral_limit: 1.0,
            },
        }
    }
}

/// Controller limits and distance thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    /// Desired following distance.
    pub z_setpoint_m: f64,
    /// Engage only when the target is farther than this.
    pub z_engage_m: f64,
    /// Disengage (stop) when the target is at or closer than this.
    pub z_stop_m: f64,
    pub v_max: f64,
    pub w_max: f64,
    /// Time for the commanded speed to ramp to zero during occlusion.
    pub decel_time_s: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            z_setpoint_m: 2.0,
            z_engage_m: 2.0,
            z_stop_m: 1.5,
            v_max: 0.7,
            w_max: 1.0,
            decel_time_s: 0.5,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.z_stop_m > 0.0
            && self.z_stop_m <= self.z_setpoint_m
            && self.z_setpoint_m <= self.z_engage_m)
        {
            return Err(format!(
                "require 0 < z_stop_m <= z_setpoint_m <= z_engage_m, got ({}, {}, {})",
                self.z_stop_m, self.z_setpoint_m, self.z_engage_m
            ));
        }
        let finite = [
            self.z_setpoint_m,
            self.z_engage_m,
            self.z_stop_m,
            self.v_max,
            self.w_max,
            self.decel_time_s,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err("controller fields must be finite".into());
        }
        if !(self.v_max > 0.0 && self.w_max > 0.0) {
            return Err(format!(
                "v_max and w_max must be > 0, got ({}, {})",
                self.v_max, self.w_max
            ));
        }
        if !(self.decel_time_s > 0.0) {
            return Err(format!(
                "decel_time_s must be > 0, got {}",
                self.decel_time_s
            ));
        }
        Ok(())
    }
}

/// One drive command for the differential base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    /// Forward speed, m/s; never negative.
    pub v: f64,
    /// Turn rate, rad/s; positive turns left.
    pub w: f64,
    pub engaged: bool,
}

impl ControlCommand {
    pub const STOP: ControlCommand = ControlCommand {
        v: 0.0,
        w: 0.0,
        engaged: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct PidAxis {
    integral: f64,
    prev_error: Option<f64>,
}

impl PidAxis {
    /// One PID step with output clamped to [out_lo, out_hi].
    ///
    /// Anti-windup is twofold: the integral term is clamped to
    /// ±integral_limit, and the integrator freezes whenever the output is
    /// saturated in the direction the error is pushing; otherwise a long
    /// saturated approach winds up enough integral to drag the system far
    /// past the setpoint.
    fn update(&mut self, error: f64, dt: f64, gains: &PidGains, out_lo: f64, out_hi: f64) -> f64 {
        let derivative = match self.prev_error {
            Some(prev) => (error - prev) / dt,
            None => 0.0,
        };
        self.prev_error = Some(error);

        let previous_integral = self.integral;
        self.integral += error * dt;
        if gains.ki > 0.0 {
            let bound = gains.integral_limit / gains.ki;
            self.integral = self.integral.clamp(-bound, bound);
        }
        let i_term = (gains.ki * self.integral).clamp(-gains.integral_limit, gains.integral_limit);
        let unsaturated = gains.kp * error + i_term + gains.kd * derivative;
        if (unsaturated > out_hi && error > 0.0) || (unsaturated < out_lo && error < 0.0) {
            self.integral = previous_integral;
        }
        let i_term = (gains.ki * self.integral).clamp(-gains.integral_limit, gains.integral_limit);
        (gains.kp * error + i_term + gains.kd * derivative).clamp(out_lo, out_hi)
    }

    fn reset(&mut self) {
        *self = PidAxis::default();
    }
}

/// The follow controller. One owner updates it once per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowController {
    pub gains: FollowGains,
    pub config: ControllerConfig,
    engaged: bool,
    distance_axis: PidAxis,
    heading_axis: PidAxis,
    last_v: f64,
    /// Speed at the moment the current occlusion began; None outside
    /// occlusion.
    occlusion_ramp_v0: Option<f64>,
    last_mode: Option<TrackMode>,
}

impl FollowController {
    pub fn new(gains: FollowGains, config: ControllerConfig) -> Self {
        FollowController {
            gains,
            config,
            engaged: false,
            distance_axis: PidAxis::default(),
            heading_axis: PidAxis::default(),
            last_v: 0.0,
            occlusion_ramp_v0: None,
            last_mode: None,
        }
    }

    pub fn engaged(&self) -> bool {
        self.engaged
    }

    /// Zero the integrators, forget the previous error, disengage.
    /// Idempotent.
    pub fn reset(&mut self) {
        self.engaged = false;
        self.distance_axis.reset();
        self.heading_axis.reset();
        self.last_v = 0.0;
        self.occlusion_ramp_v0 = None;
        self.last_mode = None;
    }

    /// Compute the command for one frame given the current track state.
    pub fn update(&mut self, track: &TrackState, dt: f64) -> ControlCommand {
        debug_assert!(dt > 0.0);
        let cmd = match track.mode {
            TrackMode::Tracking => {
                self.occlusion_ramp_v0 = None;
                // Restart the derivative after any gap so a stale error
                // cannot produce a kick on the resume frame.
                if self.last_mode != Some(TrackMode::Tracking) {
                    self.distance_axis.prev_error = None;
                    self.heading_axis.prev_error = None;
                }
                let m = track
                    .last_measurement
                    .expect("TRACKING state always carries a measurement");
                if !self.engaged && m.z_m > self.config.z_engage_m {
                    self.engaged = true;
                }
                if self.engaged && m.z_m <= self.config.z_stop_m {
                    self.engaged = false;
                    self.distance_axis.reset();
                    self.heading_axis.reset();
                }
                if self.engaged {
                    let e_z = m.z_m - self.config.z_setpoint_m;
                    let v = self.distance_axis.update(
                        e_z,
                        dt,
                        &self.gains.distance,
                        0.0,
                        self.config.v_max,
                    );
                    // Positive bearing = target to the right; positive w =
                    // turn left, so the heading error is the negated bearing.
                    let w = self.heading_axis.update(
                        -m.bearing_rad,
                        dt,
                        &self.gains.heading,
                        -self.config.w_max,
                        self.config.w_max,
                    );
                    ControlCommand {
                        v,
                        w,
                        engaged: true,
                    }
                } else {
                    ControlCommand::STOP
                }
            }
            TrackMode::Occluded => {
                // Integrators frozen; speed ramps linearly to zero.
                let v0 = *self.occlusion_ramp_v0.get_or_insert(self.last_v);
                let fraction = 1.0 - track.time_since_seen_s / self.config.decel_time_s;
                let v = (v0 * fraction.max(0.0)).clamp(0.0, self.config.v_max);
                ControlCommand {
                    v,
                    w: 0.0,
                    engaged: self.engaged,
                }
            }
            TrackMode::Searching | TrackMode::Lost => {
                self.engaged = false;
                self.distance_axis.reset();
                self.heading_axis.reset();
                self.occlusion_ramp_v0 = None;
                ControlCommand::STOP
            }
        };
        self.last_v = cmd.v;
        self.last_mode = Some(track.mode);
        cmd
    }
}
