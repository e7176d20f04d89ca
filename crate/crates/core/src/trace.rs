//! Per-frame run traces, summary metrics, and their on-disk encodings.
//!
//! A trace is the flight recorder of one run: range estimates, track mode and
//! drive command for every frame. It serializes as JSON lines (full records)
//! and as a two-column CSV of time vs estimated range, ready for plotting the
//! distance-over-time curve of a run; frames without a measurement leave the
//! second column empty, so occlusion gaps are visible in the plot.

use crate::tracker::TrackMode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version stamp written into every output document.
pub const SCHEMA_VERSION: u32 = 1;

/// One frame of a run.
///
/// `estimated_z_m` and `bearing_rad` are present exactly when the track mode
/// is TRACKING. `true_distance_m` exists only for simulated runs. The
/// similarity scores are present for the cameras in which the target was
/// identified this frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_distance_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimated_z_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bearing_rad: Option<f64>,
    pub track_mode: TrackMode,
    pub v_cmd: f64,
    pub w_cmd: f64,
    pub engaged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity_left: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity_right: Option<f64>,
}

/// A whole run, in frame order with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Serialize)]
struct RecordLine<'a> {
    schema_version: u32,
    #[serde(flatten)]
    record: &'a TraceRecord,
}

#[derive(Debug, Deserialize)]
struct RecordLineOwned {
    #[allow(dead_code)]
    schema_version: u32,
    #[serde(flatten)]
    record: TraceRecord,
}

impl Trace {
    /// JSON-lines encoding; one record per line, each stamped with the
    /// schema version. Byte-deterministic for identical traces.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            let line = RecordLine {
                schema_version: SCHEMA_VERSION,
                record,
            };
            out.push_str(&serde_json::to_string(&line).expect("trace serialization cannot fail"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, TraceParseError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: RecordLineOwned =
                serde_json::from_str(line).map_err(|e| TraceParseError::Malformed {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            records.push(parsed.record);
        }
        Ok(Trace { records })
    }

    /// Two-column CSV (`t_s,estimated_z_m`): the distance-vs-time curve.
    /// Frames without a measurement leave the second column empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# schema_version=1\nt_s,estimated_z_m\n");
        for r in &self.records {
            match r.estimated_z_m {
                Some(z) => out.push_str(&format!("{},{}\n", r.t_s, z)),
                None => out.push_str(&format!("{},\n", r.t_s)),
            }
        }
        out
    }

    /// The per-frame estimated range sequence (None where not tracking).
    pub fn estimated_z_sequence(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.estimated_z_m).collect()
    }
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("trace line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

/// Ground-truth identity bookkeeping available only in simulation: which
/// person each camera's identification chose, per frame.
#[derive(Debug, Clone, Default)]
pub struct IdentityTruth {
    /// Index of the true target in the scenario's person list.
    pub target_index: usize,
    /// Per frame: (chosen person index in left camera, in right camera).
    pub chosen: Vec<(Option<usize>, Option<usize>)>,
}

/// Summary statistics of one run.
///
/// Fields that need simulation ground truth (`identity_switches`,
/// `mean_abs_distance_error_m`, `min_true_distance_m`) are null for replayed
/// runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub schema_version: u32,
    pub frames_total: u64,
    pub frames_tracking: u64,
    pub identity_switches: Option<u64>,
    pub occlusion_episodes: u64,
    pub max_reacquire_time_s: f64,
    pub mean_abs_distance_error_m: Option<f64>,
    pub min_true_distance_m: Option<f64>,
}

impl Metrics {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialization cannot fail");
        s.push('\n');
        s
    }
}

/// Reduce a trace (plus optional simulation ground truth) to metrics.
///
/// An occlusion episode is a maximal run of non-TRACKING frames that begins
/// after tracking had been established; its reacquire time is measured from
/// the last TRACKING frame before the gap to the first one after it. An
/// identity switch is a transition of a camera's chosen person from the
/// target (or nobody) to some other person.
pub fn compute_metrics(trace: &Trace, truth: Option<&IdentityTruth>, z_setpoint_m: f64) -> Metrics {
    let frames_total = trace.records.len() as u64;
    let frames_tracking = trace
        .records
        .iter()
        .filter(|r| r.track_mode == TrackMode::Tracking)
        .count() as u64;

    let mut occlusion_episodes = 0u64;
    let mut max_reacquire_time_s = 0.0_f64;
    let mut last_tracking_t: Option<f64> = None;
    let mut in_gap = false;
    for r in &trace.records {
        if r.track_mode == TrackMode::Tracking {
            if in_gap {
                if let Some(t0) = last_tracking_t {
                    max_reacquire_time_s = max_reacquire_time_s.max(r.t_s - t0);
                }
                in_gap = false;
            }
            last_tracking_t = Some(r.t_s);
        } else if last_tracking_t.is_some() && !in_gap {
            occlusion_episodes += 1;
            in_gap = true;
        }
    }

    let identity_switches = truth.map(|truth| {
        let mut switches = 0u64;
        for side in 0..2 {
            let mut prev_wrong = false;
            for frame in &truth.chosen {
                let chosen = if side == 0 { frame.0 } else { frame.1 };
                let wrong = matches!(chosen, Some(p) if p != truth.target_index);
                if wrong && !prev_wrong {
                    switches += 1;
                }
                prev_wrong = wrong;
            }
        }
        switches
    });

    let engaged_errors: Vec<f64> = trace
        .records
        .iter()
        .filter(|r| r.engaged)
        .filter_map(|r| r.true_distance_m.map(|d| (d - z_setpoint_m).abs()))
        .collect();
    let mean_abs_distance_error_m = if engaged_errors.is_empty() {
        None
    } else {
        Some(engaged_errors.iter().sum::<f64>() / engaged_errors.len() as f64)
    };

    let min_true_distance_m = trace
        .records
        .iter()
        .filter_map(|r| r.true_distance_m)
        .min_by(f64::total_cmp);

    Metrics {
        schema_version: SCHEMA_VERSION,
        frames_total,
        frames_tracking,
        identity_switches,
        occlusion_episodes,
        max_reacquire_time_s,
        mean_abs_distance_error_m,
        min_true_distance_m,
    }
}
