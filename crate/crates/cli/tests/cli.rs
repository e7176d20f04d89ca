//! End-to-end tests of the binary: every subcommand, its outputs and exit
//! codes, run against the shipped scenario corpus.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stereo-follow"))
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Second CSV column (estimated z) of a trace file, one entry per frame.
fn csv_z_column(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split_once(',').unwrap().1.to_string())
        .collect()
}

#[test]
fn run_crossing_writes_outputs_with_an_occlusion_gap() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run"])
        .arg(scenarios_dir().join("crossing.toml"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_ok(&out);

    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("metrics.json")).unwrap())
            .unwrap();
    assert_eq!(metrics["schema_version"], 1);
    assert!(metrics["occlusion_episodes"].as_u64().unwrap() >= 1);
    assert_eq!(metrics["identity_switches"], 0);

    // Recovery: measurements exist after the gap.
    let zs = csv_z_column(&tmp.path().join("trace.csv"));
    let first_gap = zs.iter().position(|z| z.is_empty()).expect("a gap exists");
    assert!(
        zs[first_gap..].iter().any(|z| !z.is_empty()),
        "tracking resumed"
    );

    let jsonl = std::fs::read_to_string(tmp.path().join("trace.jsonl")).unwrap();
    assert!(jsonl.lines().all(|l| l.contains("\"schema_version\":1")));
}

#[test]
fn run_with_fixed_seed_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = bin()
            .args(["run"])
            .arg(scenarios_dir().join("dark_lighting.toml"))
            .args(["--set", "seed=7", "--set", "duration_s=10.0"])
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert_ok(&out);
    }
    for name in ["trace.jsonl", "trace.csv", "metrics.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
}

#[test]
fn run_missing_file_fails_with_diagnostic() {
    let out = bin()
        .args(["run", "/no/such/scenario.toml"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("file not found"), "stderr: {stderr}");
}

#[test]
fn run_invalid_scenario_lists_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(
        &bad,
        "name = \"bad\"\nduration_s = -3.0\n[tracker]\nthreshold = 2.0\n",
    )
    .unwrap();
    let out = bin().args(["run"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("duration_s") && stderr.contains("threshold"),
        "stderr: {stderr}"
    );
}

#[test]
fn export_then_replay_reproduces_the_distance_curve() {
    let sim_dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run"])
        .arg(scenarios_dir().join("crossing.toml"))
        .args(["--set", "duration_s=12.0", "--export-detections"])
        .arg("--out")
        .arg(sim_dir.path())
        .output()
        .unwrap();
    assert_ok(&out);

    let replay_dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["replay"])
        .arg("--left")
        .arg(sim_dir.path().join("detections_left.jsonl"))
        .arg("--right")
        .arg(sim_dir.path().join("detections_right.jsonl"))
        .arg("--template")
        .arg(sim_dir.path().join("template.json"))
        .arg("--config")
        .arg(scenarios_dir().join("crossing.toml"))
        .arg("--out")
        .arg(replay_dir.path())
        .output()
        .unwrap();
    assert_ok(&out);

    let sim_z = csv_z_column(&sim_dir.path().join("trace.csv"));
    let replay_z = csv_z_column(&replay_dir.path().join("trace.csv"));
    assert_eq!(
        sim_z, replay_z,
        "replayed distance curve differs from the simulated one"
    );
    assert!(sim_z.iter().any(|z| !z.is_empty()));
}

#[test]
fn replay_without_overlap_reports_misalignment() {
    let tmp = tempfile::tempdir().unwrap();
    let kp: Vec<String> = (0..18).map(|_| "[100.0,100.0,0.9]".to_string()).collect();
    let person = format!("{{\"kp\":[{}]}}", kp.join(","));
    let left = tmp.path().join("left.jsonl");
    let right = tmp.path().join("right.jsonl");
    std::fs::write(
        &left,
        format!("{{\"frame\":0,\"t\":0.0,\"camera\":\"left\",\"people\":[{person}]}}\n"),
    )
    .unwrap();
    std::fs::write(
        &right,
        format!("{{\"frame\":5,\"t\":0.5,\"camera\":\"right\",\"people\":[{person}]}}\n"),
    )
    .unwrap();
    let out = bin()
        .args(["replay", "--assume-single-person"])
        .arg("--left")
        .arg(&left)
        .arg("--right")
        .arg(&right)
        .arg("--config")
        .arg(scenarios_dir().join("crossing.toml"))
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("misaligned"), "stderr: {stderr}");
}

#[test]
fn replay_native_geometry_only_log_with_single_person_fallback() {
    let tmp = tempfile::tempdir().unwrap();
    // BODY-25 flat arrays: only the four torso keypoints carry confidence.
    let native_line = |u: f64| {
        let mut flat = vec![0.0_f64; 75];
        // (BODY-25 index, u, v): RShoulder 2, LShoulder 5, RHip 9, LHip 12.
        for (idx, du, v) in [
            (2, -25.0, 180.0),
            (5, 25.0, 180.0),
            (9, -18.0, 280.0),
            (12, 18.0, 280.0),
        ] {
            flat[idx * 3] = u + du;
            flat[idx * 3 + 1] = v;
            flat[idx * 3 + 2] = 0.9;
        }
        format!(
            "{{\"version\":1.3,\"people\":[{{\"pose_keypoints_2d\":{}}}]}}",
            serde_json::to_string(&flat).unwrap()
        )
    };
    let left = tmp.path().join("left.jsonl");
    let right = tmp.path().join("right.jsonl");
    // Constant disparity of 30 px: z = 0.094 * focal / 30.
    std::fs::write(
        &left,
        format!(
            "{}\n{}\n{}\n",
            native_line(350.0),
            native_line(351.0),
            native_line(352.0)
        ),
    )
    .unwrap();
    std::fs::write(
        &right,
        format!(
            "{}\n{}\n{}\n",
            native_line(320.0),
            native_line(321.0),
            native_line(322.0)
        ),
    )
    .unwrap();

    let rig_only = tmp.path().join("rig.toml");
    std::fs::write(
        &rig_only,
        "[rig]\nbaseline_m = 0.094\nresolution = [640, 480]\nhfov_deg = 54.0\n",
    )
    .unwrap();

    let out_dir = tmp.path().join("out");
    let out = bin()
        .args(["replay", "--assume-single-person"])
        .arg("--left")
        .arg(&left)
        .arg("--right")
        .arg(&right)
        .arg("--config")
        .arg(&rig_only)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_ok(&out);
    let zs = csv_z_column(&out_dir.join("trace.csv"));
    assert_eq!(zs.len(), 3);
    let expected = 0.094 * 628.035 / 30.0;
    for z in &zs {
        let z: f64 = z.parse().expect("depth present on every frame");
        assert!((z - expected).abs() < 0.01, "z = {z}, expected ~{expected}");
    }
}

#[test]
fn make_template_from_pixels_puts_blue_in_bin_24() {
    let tmp = tempfile::tempdir().unwrap();
    let pixels: Vec<[f64; 3]> = (0..500).map(|_| [245.0, 0.9, 0.6]).collect();
    let input = tmp.path().join("pixels.json");
    std::fs::write(&input, serde_json::to_string(&pixels).unwrap()).unwrap();
    let out_path = tmp.path().join("template.json");
    let out = bin()
        .args(["make-template"])
        .arg(&input)
        .args(["--label", "blue-shirt"])
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_ok(&out);
    let tpl: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(tpl["label"], "blue-shirt");
    assert_eq!(tpl["sample_count"], 500);
    let bins = tpl["bins"].as_array().unwrap();
    assert_eq!(bins.len(), 36);
    assert_eq!(bins[24].as_f64().unwrap(), 1.0);
}

#[test]
fn make_template_from_gray_pixels_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let pixels: Vec<[f64; 3]> = (0..100).map(|_| [0.0, 0.0, 0.5]).collect();
    let input = tmp.path().join("gray.json");
    std::fs::write(&input, serde_json::to_string(&pixels).unwrap()).unwrap();
    let out = bin()
        .args(["make-template"])
        .arg(&input)
        .args(["--label", "x"])
        .arg("--out")
        .arg(tmp.path().join("t.json"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no appearance data"));
}

#[test]
fn make_template_from_exported_log_then_replay_scores_near_one() {
    let sim_dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run"])
        .arg(scenarios_dir().join("straight_walk.toml"))
        .args(["--set", "duration_s=3.0", "--export-detections"])
        .arg("--out")
        .arg(sim_dir.path())
        .output()
        .unwrap();
    assert_ok(&out);

    let tpl_path = sim_dir.path().join("from_log.json");
    let out = bin()
        .args(["make-template"])
        .arg(sim_dir.path().join("detections_left.jsonl"))
        .args(["--label", "walker"])
        .arg("--out")
        .arg(&tpl_path)
        .output()
        .unwrap();
    assert_ok(&out);

    let replay_dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["replay"])
        .arg("--left")
        .arg(sim_dir.path().join("detections_left.jsonl"))
        .arg("--right")
        .arg(sim_dir.path().join("detections_right.jsonl"))
        .arg("--template")
        .arg(&tpl_path)
        .arg("--config")
        .arg(scenarios_dir().join("straight_walk.toml"))
        .arg("--out")
        .arg(replay_dir.path())
        .output()
        .unwrap();
    assert_ok(&out);

    let jsonl = std::fs::read_to_string(replay_dir.path().join("trace.jsonl")).unwrap();
    let mut scores = Vec::new();
    for line in jsonl.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        if let Some(s) = v["similarity_left"].as_f64() {
            scores.push(s);
        }
    }
    assert!(!scores.is_empty());
    assert!(
        scores.iter().all(|s| *s > 0.9),
        "log-built template should score near 1.0 on its source frames: {scores:?}"
    );
}

#[test]
fn validate_accepts_the_corpus_and_rejects_garbage() {
    for name in [
        "straight_walk.toml",
        "bright_lighting.toml",
        "dark_lighting.toml",
        "crossing.toml",
        "same_color_crossing.toml",
    ] {
        let out = bin()
            .args(["validate"])
            .arg(scenarios_dir().join(name))
            .output()
            .unwrap();
        assert_ok(&out);
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok:"));
    }
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "this is not toml at all [").unwrap();
    let out = bin().args(["validate"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
}
