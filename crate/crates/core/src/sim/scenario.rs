//! Scenario configuration: a TOML document describing the rig, the persons
//! and their paths, lighting, noise, and the tracker/controller tuning for
//! one deterministic run.
//!
//! Validation gathers every offending field instead of stopping at the
//! first, so a bad file is fixable in one pass. Overrides are dotted paths
//! (`controller.v_max=0.5`) applied to the parsed document before
//! deserialization.

use super::render::NoiseModel;
use super::world::{BodyGeometry, LightingSchedule, PersonModel, RobotState, Waypoint, World};
use crate::control::{ControllerConfig, FollowGains};
use crate::stereo::StereoRig;
use crate::tracker::TrackerConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario TOML: {0}")]
    Parse(String),
    #[error("invalid scenario:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error("bad override '{0}': {1}")]
    BadOverride(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RigConfig {
    pub baseline_m: f64,
    pub resolution: [u32; 2],
    pub hfov_deg: f64,
    /// Mounting height of the rig above the ground.
    pub height_m: f64,
}

impl Default for RigConfig {
    fn default() -> Self {
        RigConfig {
            baseline_m: 0.094,
            resolution: [640, 480],
            hfov_deg: 54.0,
            height_m: 1.15,
        }
    }
}

impl RigConfig {
    pub fn build(&self) -> Result<StereoRig, String> {
        StereoRig::from_fov(
            self.baseline_m,
            (self.resolution[0], self.resolution[1]),
            self.hfov_deg,
        )
        .map_err(|e| format!("rig: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BodyConfig {
    pub shoulder_height_m: f64,
    pub hip_height_m: f64,
    pub shoulder_halfwidth_m: f64,
    pub hip_halfwidth_m: f64,
    pub occlusion_radius_m: f64,
}

impl Default for BodyConfig {
    fn default() -> Self {
        let b = BodyGeometry::default();
        BodyConfig {
            shoulder_height_m: b.shoulder_height_m,
            hip_height_m: b.hip_height_m,
            shoulder_halfwidth_m: b.shoulder_halfwidth_m,
            hip_halfwidth_m: b.hip_halfwidth_m,
            occlusion_radius_m: b.occlusion_radius_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t_s: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonConfig {
    pub id: String,
    pub path: Vec<PathPoint>,
    pub clothing_hue_deg: f64,
    #[serde(default = "default_hue_std")]
    pub clothing_hue_std_deg: f64,
    #[serde(default = "default_saturation")]
    pub clothing_saturation: f64,
    #[serde(default)]
    pub body: BodyConfig,
}

fn default_hue_std() -> f64 {
    8.0
}

fn default_saturation() -> f64 {
    0.8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightPoint {
    pub t_s: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LightingConfig {
    pub points: Vec<LightPoint>,
    pub hue_jitter_std_deg: f64,
}

impl Default for LightingConfig {
    fn default() -> Self {
        LightingConfig {
            points: vec![LightPoint {
                t_s: 0.0,
                scale: 1.0,
            }],
            hue_jitter_std_deg: 0.0,
        }
    }
}

/// Partial gain overrides for one axis; unset fields keep the shipped
/// defaults for that axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GainsPatch {
    pub kp: Option<f64>,
    pub ki: Option<f64>,
    pub kd: Option<f64>,
    pub integral_limit: Option<f64>,
}

impl GainsPatch {
    fn apply(&self, base: crate::control::PidGains) -> crate::control::PidGains {
        crate::control::PidGains {
            kp: self.kp.unwrap_or(base.kp),
            ki: self.ki.unwrap_or(base.ki),
            kd: self.kd.unwrap_or(base.kd),
            integral_limit: self.integral_limit.unwrap_or(base.integral_limit),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GainsConfig {
    pub distance: GainsPatch,
    pub heading: GainsPatch,
}

impl GainsConfig {
    /// The effective gains: shipped defaults with the patches applied.
    pub fn build(&self) -> FollowGains {
        let base = FollowGains::default();
        FollowGains {
            distance: self.distance.apply(base.distance),
            heading: self.heading.apply(base.heading),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotStart {
    pub x: f64,
    pub y: f64,
    pub theta_rad: f64,
}

impl Default for RobotStart {
    fn default() -> Self {
        RobotStart {
            x: 0.0,
            y: 0.0,
            theta_rad: 0.0,
        }
    }
}

/// A complete scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub name: String,
    pub duration_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub seed: u64,
    /// Person id the template is built from; absent means no identification
    /// runs at all (the tracker stays searching).
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub rig: RigConfig,
    #[serde(default)]
    pub robot: RobotStart,
    #[serde(default)]
    pub persons: Vec<PersonConfig>,
    #[serde(default)]
    pub lighting: LightingConfig,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub gains: GainsConfig,
}

fn default_schema_version() -> u32 {
    crate::trace::SCHEMA_VERSION
}

fn default_dt() -> f64 {
    0.1
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Parse with `key.path=value` overrides applied before deserialization.
    pub fn from_toml_with_overrides(
        text: &str,
        overrides: &[(String, String)],
    ) -> Result<Scenario, ScenarioError> {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        for (path, literal) in overrides {
            apply_override(&mut value, path, literal)?;
        }
        let scenario: Scenario = value
            .try_into()
            .map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Check every field, collecting all problems.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut problems = Vec::new();
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            problems.push(format!("duration_s must be > 0, got {}", self.duration_s));
        }
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            problems.push(format!("dt_s must be > 0, got {}", self.dt_s));
        } else if self.duration_s > 0.0 && self.duration_s / self.dt_s > 1e7 {
            problems.push(format!(
                "duration_s / dt_s is {} frames; the limit is 1e7",
                self.duration_s / self.dt_s
            ));
        }
        if self.schema_version != crate::trace::SCHEMA_VERSION {
            problems.push(format!(
                "unsupported schema_version {} (this build reads {})",
                self.schema_version,
                crate::trace::SCHEMA_VERSION
            ));
        }
        if let Err(e) = self.rig.build() {
            problems.push(e);
        }
        if !(self.rig.height_m.is_finite() && self.rig.height_m >= 0.0) {
            problems.push(format!(
                "rig.height_m must be >= 0, got {}",
                self.rig.height_m
            ));
        }
        if !(self.rig.baseline_m.is_finite() && self.rig.hfov_deg.is_finite()) {
            problems.push("rig: baseline_m and hfov_deg must be finite".into());
        }
        if !(self.robot.x.is_finite()
            && self.robot.y.is_finite()
            && self.robot.theta_rad.is_finite())
        {
            problems.push("robot: start pose must be finite".into());
        }
        if let Some(target) = &self.target {
            if !self.persons.iter().any(|p| &p.id == target) {
                problems.push(format!("target '{target}' does not match any person id"));
            }
        }
        let mut seen_ids = std::collections::BTreeSet::new();
        for p in &self.persons {
            if !seen_ids.insert(p.id.clone()) {
                problems.push(format!("persons: duplicate id '{}'", p.id));
            }
            if p.path.is_empty() {
                problems.push(format!(
                    "persons.{}: path must have at least one waypoint",
                    p.id
                ));
            }
            for pair in p.path.windows(2) {
                if !(pair[1].t_s > pair[0].t_s) {
                    problems.push(format!(
                        "persons.{}: waypoint times must be strictly increasing ({} then {})",
                        p.id, pair[0].t_s, pair[1].t_s
                    ));
                }
            }
            if p.path
                .iter()
                .any(|w| !(w.t_s.is_finite() && w.x.is_finite() && w.y.is_finite()))
            {
                problems.push(format!("persons.{}: waypoints must be finite", p.id));
            }
            if !(p.clothing_hue_deg.is_finite()) {
                problems.push(format!("persons.{}: clothing_hue_deg must be finite", p.id));
            }
            if !(p.clothing_hue_std_deg.is_finite() && p.clothing_hue_std_deg >= 0.0) {
                problems.push(format!(
                    "persons.{}: clothing_hue_std_deg must be >= 0, got {}",
                    p.id, p.clothing_hue_std_deg
                ));
            }
            if !(0.0..=1.0).contains(&p.clothing_saturation) {
                problems.push(format!(
                    "persons.{}: clothing_saturation must be in [0, 1], got {}",
                    p.id, p.clothing_saturation
                ));
            }
            if !(p.body.occlusion_radius_m > 0.0) {
                problems.push(format!(
                    "persons.{}: body.occlusion_radius_m must be > 0, got {}",
                    p.id, p.body.occlusion_radius_m
                ));
            }
            if !(p.body.shoulder_height_m > p.body.hip_height_m && p.body.hip_height_m > 0.0) {
                problems.push(format!(
                    "persons.{}: require shoulder_height_m > hip_height_m > 0",
                    p.id
                ));
            }
            if !(p.body.shoulder_halfwidth_m > 0.0 && p.body.hip_halfwidth_m > 0.0) {
                problems.push(format!("persons.{}: body half-widths must be > 0", p.id));
            }
        }
        if self.lighting.points.is_empty() {
            problems.push("lighting.points must not be empty".into());
        }
        for pt in &self.lighting.points {
            if !(pt.scale > 0.0 && pt.scale <= 1.0) {
                problems.push(format!(
                    "lighting: scale must be in (0, 1], got {} at t={}",
                    pt.scale, pt.t_s
                ));
            }
        }
        for pair in self.lighting.points.windows(2) {
            if !(pair[1].t_s > pair[0].t_s) {
                problems.push(format!(
                    "lighting: point times must be strictly increasing ({} then {})",
                    pair[0].t_s, pair[1].t_s
                ));
            }
        }
        if self.lighting.points.iter().any(|p| !p.t_s.is_finite()) {
            problems.push("lighting: point times must be finite".into());
        }
        if !(self.lighting.hue_jitter_std_deg.is_finite()
            && self.lighting.hue_jitter_std_deg >= 0.0)
        {
            problems.push(format!(
                "lighting.hue_jitter_std_deg must be >= 0, got {}",
                self.lighting.hue_jitter_std_deg
            ));
        }
        if let Err(e) = self.noise.validate() {
            problems.push(e);
        }
        if let Err(e) = self.tracker.validate() {
            problems.push(e);
        }
        if let Err(e) = self.controller.validate() {
            problems.push(e);
        }
        let gains = self.gains.build();
        if let Err(e) = gains.distance.validate("distance") {
            problems.push(e);
        }
        if let Err(e) = gains.heading.validate("heading") {
            problems.push(e);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(problems))
        }
    }

    /// Index of the target in the person list, when configured.
    pub fn target_index(&self) -> Option<usize> {
        let target = self.target.as_ref()?;
        self.persons.iter().position(|p| &p.id == target)
    }

    /// Materialize the initial world state.
    pub fn build_world(&self) -> World {
        World {
            time_s: 0.0,
            persons: self
                .persons
                .iter()
                .map(|p| PersonModel {
                    id: p.id.clone(),
                    path: p
                        .path
                        .iter()
                        .map(|w| Waypoint {
                            t_s: w.t_s,
                            x: w.x,
                            y: w.y,
                        })
                        .collect(),
                    body: BodyGeometry {
                        shoulder_height_m: p.body.shoulder_height_m,
                        hip_height_m: p.body.hip_height_m,
                        shoulder_halfwidth_m: p.body.shoulder_halfwidth_m,
                        hip_halfwidth_m: p.body.hip_halfwidth_m,
                        occlusion_radius_m: p.body.occlusion_radius_m,
                    },
                    clothing_hue_deg: p.clothing_hue_deg,
                    clothing_hue_std_deg: p.clothing_hue_std_deg,
                    clothing_saturation: p.clothing_saturation,
                })
                .collect(),
            robot: RobotState {
                x: self.robot.x,
                y: self.robot.y,
                theta: self.robot.theta_rad,
                v: 0.0,
                w: 0.0,
            },
            lighting: LightingSchedule {
                points: self
                    .lighting
                    .points
                    .iter()
                    .map(|p| (p.t_s, p.scale))
                    .collect(),
                hue_jitter_std_deg: self.lighting.hue_jitter_std_deg,
            },
        }
    }
}

/// Set a dotted path inside a parsed TOML document. The value literal is
/// parsed as TOML; anything that does not parse is taken as a bare string.
fn apply_override(root: &mut toml::Value, path: &str, literal: &str) -> Result<(), ScenarioError> {
    let new_value: toml::Value = match toml::from_str::<toml::Value>(&format!("v = {literal}")) {
        Ok(toml::Value::Table(mut t)) => t.remove("v").expect("key v exists"),
        _ => toml::Value::String(literal.to_string()),
    };
    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(ScenarioError::BadOverride(
            path.into(),
            "empty path segment".into(),
        ));
    }
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        // Numeric segments index into arrays (persons.0.clothing_hue_deg).
        if let Ok(idx) = seg.parse::<usize>() {
            let arr = cursor.as_array_mut().ok_or_else(|| {
                ScenarioError::BadOverride(path.into(), format!("'{seg}' indexes a non-array"))
            })?;
            if idx >= arr.len() {
                return Err(ScenarioError::BadOverride(
                    path.into(),
                    format!("index {idx} out of bounds (len {})", arr.len()),
                ));
            }
            if last {
                arr[idx] = new_value;
                return Ok(());
            }
            cursor = &mut arr[idx];
        } else {
            let table = cursor.as_table_mut().ok_or_else(|| {
                ScenarioError::BadOverride(path.into(), format!("'{seg}' addresses a non-table"))
            })?;
            if last {
                table.insert(seg.to_string(), new_value);
                return Ok(());
            }
            cursor = table
                .entry(seg.to_string())
                .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
        }
    }
    Ok(())
}
