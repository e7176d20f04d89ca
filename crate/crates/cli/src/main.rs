//! Command-line front end for the two-camera person follower.
//!
//! `run` executes a scenario file and writes `trace.jsonl`, `trace.csv` and
//! `metrics.json` into the output directory; the CSV is the distance-vs-time
//! curve with blank cells where no measurement existed. `replay` feeds a pair
//! of recorded keypoint logs through the same identify/fuse/track/control
//! loop. `make-template` builds the clothing-color template. `validate`
//! lints a scenario file.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use stereo_follow::appearance::{build_histogram, Template};
use stereo_follow::control::{ControllerConfig, FollowGains};
use stereo_follow::detection::{
    detection_histogram, parse_canonical_log, parse_keypoint_frames, torso_region,
};
use stereo_follow::replay::{replay, ReplayConfig};
use stereo_follow::sim::{run_scenario, RigConfig, RunOptions, Scenario};
use stereo_follow::stereo::CameraSide;
use stereo_follow::trace::{Metrics, Trace};
use stereo_follow::tracker::TrackerConfig;
use stereo_follow::HsvPixel;

#[derive(Parser)]
#[command(
    name = "stereo-follow",
    version,
    about = "Two-camera late-fusion person following"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file in the simulator and write trace + metrics.
    Run(RunArgs),
    /// Replay a pair of recorded keypoint logs through the tracker.
    Replay(ReplayArgs),
    /// Build an appearance template from a detection log or raw pixels.
    MakeTemplate(MakeTemplateArgs),
    /// Validate a scenario file and report every problem.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML file.
    scenario: PathBuf,
    /// Output directory for trace.jsonl, trace.csv and metrics.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Shorthand for --set seed=N.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a scenario field by dotted path, e.g. controller.v_max=0.5.
    /// May be given multiple times.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Also write the rendered detections as canonical keypoint logs
    /// (detections_left.jsonl / detections_right.jsonl) plus template.json,
    /// ready for `replay`.
    #[arg(long)]
    export_detections: bool,
}

#[derive(Args)]
struct ReplayArgs {
    /// Left-camera keypoint log (canonical or pose-estimator-native).
    #[arg(long)]
    left: PathBuf,
    /// Right-camera keypoint log.
    #[arg(long)]
    right: PathBuf,
    /// Appearance template JSON; required unless --assume-single-person.
    #[arg(long)]
    template: Option<PathBuf>,
    /// TOML file providing [rig] (and optionally [tracker], [controller],
    /// [gains]); a scenario file works.
    #[arg(long)]
    config: PathBuf,
    /// Treat the sole person in a frame as the target without the
    /// similarity gate (geometry-only logs).
    #[arg(long)]
    assume_single_person: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a config field by dotted path, e.g. tracker.threshold=0.5.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Frame rate assumed for native logs, which carry no timestamps.
    #[arg(long, default_value_t = 10.0)]
    fps: f64,
}

#[derive(Args)]
struct MakeTemplateArgs {
    /// Canonical detection log, or a JSON array of [h, s, v] pixels.
    input: PathBuf,
    /// Label stored in the template.
    #[arg(long)]
    label: String,
    /// Output template JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Saturation floor below which pixels are ignored.
    #[arg(long, default_value_t = 0.1)]
    min_saturation: f64,
}

#[derive(Args)]
struct ValidateArgs {
    scenario: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Replay(args) => cmd_replay(args),
        Command::MakeTemplate(args) => cmd_make_template(args),
        Command::Validate(args) => cmd_validate(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn parse_overrides(set: &[String]) -> Result<Vec<(String, String)>> {
    set.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .with_context(|| format!("--set expects KEY=VALUE, got '{s}'"))
        })
        .collect()
}

fn write_outputs(out: &Path, trace: &Trace, metrics: &Metrics) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("create {}", out.display()))?;
    std::fs::write(out.join("trace.jsonl"), trace.to_jsonl()).context("write trace.jsonl")?;
    std::fs::write(out.join("trace.csv"), trace.to_csv()).context("write trace.csv")?;
    std::fs::write(out.join("metrics.json"), metrics.to_json()).context("write metrics.json")?;
    Ok(())
}

fn summarize(metrics: &Metrics) -> String {
    format!(
        "frames {} (tracking {}), occlusion episodes {}, max reacquire {:.2} s",
        metrics.frames_total,
        metrics.frames_tracking,
        metrics.occlusion_episodes,
        metrics.max_reacquire_time_s,
    )
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.scenario)
        .with_context(|| format!("file not found or unreadable: {}", args.scenario.display()))?;
    let mut overrides = parse_overrides(&args.set)?;
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let scenario = Scenario::from_toml_with_overrides(&text, &overrides)?;
    let opts = RunOptions {
        record_detections: args.export_detections,
    };
    let run = run_scenario(&scenario, &opts)?;
    write_outputs(&args.out, &run.trace, &run.metrics)?;
    if let Some((left, right)) = &run.detection_logs {
        std::fs::write(args.out.join("detections_left.jsonl"), left)?;
        std::fs::write(args.out.join("detections_right.jsonl"), right)?;
        if let Some(tpl) = &run.template {
            std::fs::write(args.out.join("template.json"), tpl.to_json())?;
        }
    }
    println!("{}: {}", scenario.name, summarize(&run.metrics));
    println!("wrote {}", args.out.display());
    Ok(())
}

/// The pieces replay takes from a config file. Any scenario file qualifies;
/// a bare file with just a [rig] table does too.
fn replay_config_from(
    text: &str,
    overrides: &[(String, String)],
) -> Result<(RigConfig, TrackerConfig, ControllerConfig, FollowGains)> {
    let mut value: toml::Value = toml::from_str(text).context("config TOML")?;
    for (path, literal) in overrides {
        // Reuse the scenario override machinery by round-tripping through it.
        apply_toml_override(&mut value, path, literal)?;
    }
    let table = value.as_table().context("config root must be a table")?;
    let section = |name: &str| -> Result<toml::Value> {
        Ok(table
            .get(name)
            .cloned()
            .unwrap_or(toml::Value::Table(toml::map::Map::new())))
    };
    let rig: RigConfig = section("rig")?.try_into().context("[rig]")?;
    let tracker: TrackerConfig = section("tracker")?.try_into().context("[tracker]")?;
    let controller: ControllerConfig = section("controller")?.try_into().context("[controller]")?;
    let gains: stereo_follow::sim::GainsConfig = section("gains")?.try_into().context("[gains]")?;
    tracker.validate().map_err(anyhow::Error::msg)?;
    controller.validate().map_err(anyhow::Error::msg)?;
    Ok((rig, tracker, controller, gains.build()))
}

fn apply_toml_override(root: &mut toml::Value, path: &str, literal: &str) -> Result<()> {
    let parsed: toml::Value = match toml::from_str::<toml::Value>(&format!("v = {literal}")) {
        Ok(toml::Value::Table(mut t)) => t.remove("v").expect("key v exists"),
        _ => toml::Value::String(literal.to_string()),
    };
    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let table = cursor
            .as_table_mut()
            .with_context(|| format!("--set {path}: '{seg}' addresses a non-table"))?;
        if i + 1 == segments.len() {
            table.insert(seg.to_string(), parsed);
            return Ok(());
        }
        cursor = table
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<()> {
    let overrides = parse_overrides(&args.set)?;
    let config_text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("file not found or unreadable: {}", args.config.display()))?;
    let (rig_cfg, tracker, controller, gains) = replay_config_from(&config_text, &overrides)?;
    let rig = rig_cfg.build().map_err(anyhow::Error::msg)?;

    if !(args.fps > 0.0 && args.fps.is_finite()) {
        bail!("--fps must be a positive number, got {}", args.fps);
    }
    let period = 1.0 / args.fps;
    let read = |path: &Path, camera: CameraSide| -> Result<_> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("file not found or unreadable: {}", path.display()))?;
        parse_keypoint_frames(&text, camera, period)
            .with_context(|| format!("parse {}", path.display()))
    };
    let left = read(&args.left, CameraSide::Left)?;
    let right = read(&args.right, CameraSide::Right)?;

    let template = match &args.template {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("file not found or unreadable: {}", path.display()))?;
            Some(Template::from_json(&text).context("template JSON")?)
        }
        None => None,
    };

    let cfg = ReplayConfig {
        rig,
        tracker,
        controller,
        gains,
        assume_single_person: args.assume_single_person,
        default_dt_s: period,
    };
    let (trace, metrics) = replay(&left, &right, template.as_ref(), &cfg)?;
    write_outputs(&args.out, &trace, &metrics)?;
    println!("replay: {}", summarize(&metrics));
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_make_template(args: MakeTemplateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("file not found or unreadable: {}", args.input.display()))?;
    let pixels = collect_pixels(&text, args.min_saturation)?;
    let histogram = build_histogram(&pixels, args.min_saturation);
    if histogram.is_empty() {
        bail!("no appearance data: no pixel survived the saturation floor");
    }
    let template = Template::new(args.label.clone(), histogram, args.min_saturation);
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&args.out, template.to_json())
        .with_context(|| format!("write {}", args.out.display()))?;
    println!(
        "template '{}': {} pixels, dominant hue bin {} ({}°-{}°)",
        args.label,
        template.histogram.sample_count,
        template.histogram.argmax(),
        template.histogram.argmax() * 10,
        template.histogram.argmax() * 10 + 10,
    );
    Ok(())
}

/// Template input is either a JSON array of [h, s, v] triplets or a canonical
/// detection log; for a log, pixels come from every detection with a valid
/// torso and usable appearance data.
fn collect_pixels(text: &str, min_saturation: f64) -> Result<Vec<HsvPixel>> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.trim_start().starts_with('[') {
        let raw: Vec<[f64; 3]> = serde_json::from_str(text).context("pixel array JSON")?;
        return Ok(raw
            .iter()
            .map(|t| HsvPixel::new(t[0], t[1], t[2]))
            .collect());
    }
    let detections = parse_canonical_log(text)?;
    let mut pixels = Vec::new();
    for d in &detections {
        if torso_region(&d).is_ok() && detection_histogram(&d, min_saturation).is_ok() {
            pixels.extend(d.torso_pixels.iter().copied());
        }
    }
    if pixels.is_empty() {
        bail!("no valid torso with appearance data in the log");
    }
    Ok(pixels)
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.scenario)
        .with_context(|| format!("file not found or unreadable: {}", args.scenario.display()))?;
    let scenario = Scenario::from_toml_str(&text)?;
    println!(
        "ok: scenario '{}' ({} persons, {:.0} s at {} Hz)",
        scenario.name,
        scenario.persons.len(),
        scenario.duration_s,
        (1.0 / scenario.dt_s).round()
    );
    Ok(())
}
