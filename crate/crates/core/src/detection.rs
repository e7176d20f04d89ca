//! Keypoint-based person detections, torso region extraction, and keypoint
//! log ingestion.
//!
//! A detection is one person seen by one camera in one frame: 18 skeleton
//! keypoints in the COCO-18 order plus the hue pixels sampled from the torso.
//! The torso (the shoulder-to-hip rectangle) is where the appearance
//! histogram comes from, and its center point is what the stereo pair
//! triangulates.
//!
//! Two log formats are understood:
//!
//! * the canonical line format (one JSON object per frame per camera), which
//!   round-trips losslessly, and
//! * a pose-estimator-native adapter: per-frame JSON with flat 75-number
//!   `pose_keypoints_2d` arrays (25 keypoints), remapped onto the 18-point
//!   layout via a fixed index map. Native logs carry no torso pixels and are
//!   only usable for geometry replay.

use crate::appearance::{self, HsvPixel, HueHistogram};
use crate::stereo::CameraSide;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Keypoint count of the canonical skeleton layout.
pub const KEYPOINT_COUNT: usize = 18;

/// Confidence floor for the four keypoints that define the torso.
pub const TORSO_CONFIDENCE_FLOOR: f64 = 0.3;

/// COCO-18 keypoint indices, in the order common pose estimators emit them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum KeypointIndex {
    Nose = 0,
    Neck = 1,
    RShoulder = 2,
    RElbow = 3,
    RWrist = 4,
    LShoulder = 5,
    LElbow = 6,
    LWrist = 7,
    RHip = 8,
    RKnee = 9,
    RAnkle = 10,
    LHip = 11,
    LKnee = 12,
    LAnkle = 13,
    REye = 14,
    LEye = 15,
    REar = 16,
    LEar = 17,
}

/// BODY-25 -> COCO-18 correspondence. Entry `i` is the BODY-25 index that
/// supplies COCO keypoint `i`; MidHip (8) and the foot points (19-24) are
/// dropped.
pub const BODY25_TO_COCO18: [usize; KEYPOINT_COUNT] = [
    0, 1, 2, 3, 4, 5, 6, 7, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18,
];

/// One 2D keypoint in continuous pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub u: f64,
    pub v: f64,
    pub confidence: f64,
    pub present: bool,
}

impl Keypoint {
    pub fn present(u: f64, v: f64, confidence: f64) -> Self {
        Keypoint {
            u,
            v,
            confidence,
            present: true,
        }
    }

    pub fn absent() -> Self {
        Keypoint {
            u: 0.0,
            v: 0.0,
            confidence: 0.0,
            present: false,
        }
    }
}

/// One person seen by one camera in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonDetection {
    pub camera: CameraSide,
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub keypoints: [Keypoint; KEYPOINT_COUNT],
    /// Hue pixels sampled from the torso region; may be empty (geometry-only
    /// logs).
    pub torso_pixels: Vec<HsvPixel>,
}

/// Axis-aligned shoulder-to-hip rectangle and its center point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorsoRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Centroid of the two shoulders and two hips; the point the stereo pair
    /// triangulates.
    pub center_u: f64,
    pub center_v: f64,
}

impl TorsoRegion {
    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DetectionError {
    #[error("no usable torso: keypoint {keypoint} missing or below confidence floor")]
    NoTorso { keypoint: &'static str },
    #[error("no appearance data in torso region")]
    NoAppearanceData,
}

/// Extract the torso rectangle from the two shoulders and two hips.
///
/// All four must be present with confidence >= 0.3; otherwise the detection
/// is unusable for identification this frame.
pub fn torso_region(d: &PersonDetection) -> Result<TorsoRegion, DetectionError> {
    const CORNERS: [(KeypointIndex, &str); 4] = [
        (KeypointIndex::RShoulder, "right shoulder"),
        (KeypointIndex::LShoulder, "left shoulder"),
        (KeypointIndex::RHip, "right hip"),
        (KeypointIndex::LHip, "left hip"),
    ];
    let mut pts = [(0.0_f64, 0.0_f64); 4];
    for (slot, (idx, name)) in CORNERS.iter().enumerate() {
        let kp = &d.keypoints[*idx as usize];
        if !kp.present || kp.confidence < TORSO_CONFIDENCE_FLOOR {
            return Err(DetectionError::NoTorso { keypoint: name });
        }
        pts[slot] = (kp.u, kp.v);
    }
    let x_min = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y_min = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y_max = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(TorsoRegion {
        x_min,
        x_max,
        y_min,
        y_max,
        center_u: pts.iter().map(|p| p.0).sum::<f64>() / 4.0,
        center_v: pts.iter().map(|p| p.1).sum::<f64>() / 4.0,
    })
}

/// The hue histogram of a detection's torso pixels.
pub fn detection_histogram(
    d: &PersonDetection,
    min_saturation: f64,
) -> Result<HueHistogram, DetectionError> {
    torso_region(d)?;
    let h = appearance::build_histogram(&d.torso_pixels, min_saturation);
    if h.is_empty() {
        return Err(DetectionError::NoAppearanceData);
    }
    Ok(h)
}

// --- Keypoint log formats ---------------------------------------------------

#[derive(Debug, Error)]
pub enum LogParseError {
    #[error("line {line}: malformed record: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: schema error: {msg}")]
    Schema { line: usize, msg: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct CanonicalFrame {
    frame: u64,
    t: f64,
    camera: CameraSide,
    people: Vec<CanonicalPerson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CanonicalPerson {
    kp: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    torso_hsv: Vec<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
struct NativeFrame {
    people: Vec<NativePerson>,
}

#[derive(Debug, Deserialize)]
struct NativePerson {
    pose_keypoints_2d: Vec<f64>,
}

fn keypoint_from_triplet(t: &[f64; 3], line: usize) -> Result<Keypoint, LogParseError> {
    let [u, v, c] = *t;
    if !(u.is_finite() && v.is_finite() && c.is_finite()) {
        return Err(LogParseError::Schema {
            line,
            msg: "non-finite keypoint value".into(),
        });
    }
    if !(0.0..=1.0).contains(&c) {
        return Err(LogParseError::Schema {
            line,
            msg: format!("keypoint confidence {c} outside [0, 1]"),
        });
    }
    // Confidence 0 is the absent marker.
    if c > 0.0 {
        Ok(Keypoint::present(u, v, c))
    } else {
        Ok(Keypoint::absent())
    }
}

fn hsv_from_triplet(t: &[f64; 3], line: usize) -> Result<HsvPixel, LogParseError> {
    let [h, s, v] = *t;
    if !(h.is_finite() && s.is_finite() && v.is_finite()) {
        return Err(LogParseError::Schema {
            line,
            msg: "non-finite torso_hsv value".into(),
        });
    }
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&v) {
        return Err(LogParseError::Schema {
            line,
            msg: format!("torso_hsv saturation/value ({s}, {v}) outside [0, 1]"),
        });
    }
    Ok(HsvPixel::new(h, s, v))
}

/// One camera frame of a parsed log: every person it contains, plus the
/// frame index and timestamp. Frames in which nobody was detected are kept;
/// they carry the timing of detection gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections {
    pub frame: u64,
    pub t_s: f64,
    pub camera: CameraSide,
    pub people: Vec<PersonDetection>,
}

/// Parse the canonical line format, keeping the per-frame grouping.
/// Unknown JSON fields are ignored; frame indices must be non-decreasing
/// within the stream.
pub fn parse_canonical_frames(text: &str) -> Result<Vec<FrameDetections>, LogParseError> {
    let mut out = Vec::new();
    let mut last_frame: Option<u64> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: CanonicalFrame =
            serde_json::from_str(raw).map_err(|e| LogParseError::Malformed {
                line,
                msg: e.to_string(),
            })?;
        if !rec.t.is_finite() {
            return Err(LogParseError::Schema {
                line,
                msg: "non-finite timestamp".into(),
            });
        }
        if let Some(prev) = last_frame {
            if rec.frame < prev {
                return Err(LogParseError::Schema {
                    line,
                    msg: format!("frame index {} goes backwards (previous {prev})", rec.frame),
                });
            }
        }
        last_frame = Some(rec.frame);
        let mut people = Vec::with_capacity(rec.people.len());
        for person in &rec.people {
            if person.kp.len() != KEYPOINT_COUNT {
                return Err(LogParseError::Schema {
                    line,
                    msg: format!(
                        "expected {KEYPOINT_COUNT} keypoints, got {}",
                        person.kp.len()
                    ),
                });
            }
            let mut keypoints = [Keypoint::absent(); KEYPOINT_COUNT];
            for (k, triplet) in person.kp.iter().enumerate() {
                keypoints[k] = keypoint_from_triplet(triplet, line)?;
            }
            let torso_pixels = person
                .torso_hsv
                .iter()
                .map(|t| hsv_from_triplet(t, line))
                .collect::<Result<Vec<_>, _>>()?;
            people.push(PersonDetection {
                camera: rec.camera,
                frame_index: rec.frame,
                timestamp_s: rec.t,
                keypoints,
                torso_pixels,
            });
        }
        out.push(FrameDetections {
            frame: rec.frame,
            t_s: rec.t,
            camera: rec.camera,
            people,
        });
    }
    Ok(out)
}

/// Parse the canonical line format into a flat detection sequence.
pub fn parse_canonical_log(text: &str) -> Result<Vec<PersonDetection>, LogParseError> {
    Ok(parse_canonical_frames(text)?
        .into_iter()
        .flat_map(|f| f.people)
        .collect())
}

/// Parse a pose-estimator-native log, keeping per-frame grouping: one JSON
/// document per line, each with a `people` array of flat 75-number keypoint
/// arrays. The camera side and frame period are supplied by the caller since
/// the native format carries neither. Torso pixels are absent, so the result is
/// geometry-only.
pub fn parse_native_frames(
    text: &str,
    camera: CameraSide,
    frame_period_s: f64,
) -> Result<Vec<FrameDetections>, LogParseError> {
    let mut out = Vec::new();
    let mut frame = 0u64;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: NativeFrame = serde_json::from_str(raw).map_err(|e| LogParseError::Malformed {
            line,
            msg: e.to_string(),
        })?;
        let t_s = frame as f64 * frame_period_s;
        let mut people = Vec::with_capacity(rec.people.len());
        for person in &rec.people {
            if person.pose_keypoints_2d.len() != 75 {
                return Err(LogParseError::Schema {
                    line,
                    msg: format!(
                        "expected 75 values in pose_keypoints_2d, got {}",
                        person.pose_keypoints_2d.len()
                    ),
                });
            }
            let mut keypoints = [Keypoint::absent(); KEYPOINT_COUNT];
            for (coco_idx, body25_idx) in BODY25_TO_COCO18.iter().enumerate() {
                let base = body25_idx * 3;
                let triplet = [
                    person.pose_keypoints_2d[base],
                    person.pose_keypoints_2d[base + 1],
                    person.pose_keypoints_2d[base + 2],
                ];
                keypoints[coco_idx] = keypoint_from_triplet(&triplet, line)?;
            }
            people.push(PersonDetection {
                camera,
                frame_index: frame,
                timestamp_s: t_s,
                keypoints,
                torso_pixels: Vec::new(),
            });
        }
        out.push(FrameDetections {
            frame,
            t_s,
            camera,
            people,
        });
        frame += 1;
    }
    Ok(out)
}

/// Parse a pose-estimator-native log into a flat detection sequence.
pub fn parse_native_log(
    text: &str,
    camera: CameraSide,
    frame_period_s: f64,
) -> Result<Vec<PersonDetection>, LogParseError> {
    Ok(parse_native_frames(text, camera, frame_period_s)?
        .into_iter()
        .flat_map(|f| f.people)
        .collect())
}

/// Parse a keypoint log in either supported format, keeping per-frame
/// grouping and sniffing the format from the first non-empty line. `camera`
/// and `frame_period_s` apply only to the native format, which carries
/// neither.
pub fn parse_keypoint_frames(
    text: &str,
    camera: CameraSide,
    frame_period_s: f64,
) -> Result<Vec<FrameDetections>, LogParseError> {
    let first = text.lines().find(|l| !l.trim().is_empty());
    match first {
        None => Ok(Vec::new()),
        Some(line) if line.contains("pose_keypoints_2d") => {
            parse_native_frames(text, camera, frame_period_s)
        }
        Some(_) => parse_canonical_frames(text),
    }
}

/// Parse a keypoint log in either supported format into a flat detection
/// sequence.
pub fn parse_keypoint_log(
    text: &str,
    camera: CameraSide,
    frame_period_s: f64,
) -> Result<Vec<PersonDetection>, LogParseError> {
    Ok(parse_keypoint_frames(text, camera, frame_period_s)?
        .into_iter()
        .flat_map(|f| f.people)
        .collect())
}

/// Serialize frame-grouped detections to the canonical line format, one line
/// per frame. Frames with no people are written too; they carry gap timing.
pub fn write_canonical_frames(frames: &[FrameDetections]) -> String {
    let mut out = String::new();
    for f in frames {
        let rec = CanonicalFrame {
            frame: f.frame,
            t: f.t_s,
            camera: f.camera,
            people: f
                .people
                .iter()
                .map(|d| CanonicalPerson {
                    kp: d
                        .keypoints
                        .iter()
                        .map(|k| {
                            if k.present {
                                [k.u, k.v, k.confidence]
                            } else {
                                [0.0, 0.0, 0.0]
                            }
                        })
                        .collect(),
                    torso_hsv: d.torso_pixels.iter().map(|p| [p.h, p.s, p.v]).collect(),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("log serialization cannot fail"));
        out.push('\n');
    }
    out
}

/// Serialize detections back to the canonical line format.
///
/// Detections are grouped into one line per (frame, camera) pair in their
/// input order, so `parse_canonical_log(write_canonical_log(dets)) == dets`.
pub fn write_canonical_log(detections: &[PersonDetection]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < detections.len() {
        let d0 = &detections[i];
        let mut people = Vec::new();
        let mut j = i;
        while j < detections.len()
            && detections[j].frame_index == d0.frame_index
            && detections[j].camera == d0.camera
        {
            let d = &detections[j];
            people.push(CanonicalPerson {
                kp: d
                    .keypoints
                    .iter()
                    .map(|k| {
                        if k.present {
                            [k.u, k.v, k.confidence]
                        } else {
                            [0.0, 0.0, 0.0]
                        }
                    })
                    .collect(),
                torso_hsv: d.torso_pixels.iter().map(|p| [p.h, p.s, p.v]).collect(),
            });
            j += 1;
        }
        let rec = CanonicalFrame {
            frame: d0.frame_index,
            t: d0.timestamp_s,
            camera: d0.camera,
            people,
        };
        out.push_str(&serde_json::to_string(&rec).expect("log serialization cannot fail"));
        out.push('\n');
        i = j;
    }
    out
}
