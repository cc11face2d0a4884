use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use warefollow::sensor::{base_feature, write_detlog_file, DetectionLog};
use warefollow::sim::{builtin, ScenarioConfig};
use warefollow::world::Rect;
use warefollow::Detection;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_warefollow"));
    cmd.env_remove("WAREFOLLOW_OUT_DIR");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn save_config(dir: &Path, name: &str, cfg: &ScenarioConfig) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, cfg.to_json()).unwrap();
    path
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn sha256_of(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(fs::read(path).unwrap())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[test]
fn version_names_tool_and_schema() {
    let out = run(&["--version"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains(env!("CARGO_PKG_VERSION")), "{text}");
    assert!(text.contains("warefollow/scenario-v1"), "{text}");
}

#[test]
fn s2_run_writes_artifacts_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&["run", "--scenario", "S2", "--seed", "7", "--out", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("completed=true"));

    let m = manifest(&out_dir);
    let artifacts: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|a| a.as_str().unwrap()).collect();
    assert_eq!(artifacts, ["config.json", "ticks.csv", "metrics.txt"]);
    for a in &artifacts {
        assert!(out_dir.join(a).is_file());
    }
    assert_eq!(m["resolved_seed"], 7);
    assert_eq!(m["schema"], "warefollow/scenario-v1");
    assert_eq!(m["config_sha256"], sha256_of(&out_dir.join("config.json")));

    // The recorded config reproduces the run.
    let used = ScenarioConfig::load(out_dir.join("config.json")).unwrap();
    assert_eq!(used.rng_seed, 7);
    let again = tmp.path().join("again");
    let out = run(&["run", "--scenario", p(&out_dir.join("config.json")), "--out", p(&again)]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(out_dir.join("ticks.csv")).unwrap(), fs::read(again.join("ticks.csv")).unwrap());
}

#[test]
fn plot_flag_adds_svg() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["run", "--scenario", "S2", "--plot", "--out", p(tmp.path())]);
    assert_eq!(code(&out), 0);
    let svg = fs::read_to_string(tmp.path().join("trajectory.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("stroke-dasharray"));
    assert_eq!(svg.matches(r##"fill="#b0b0b0""##).count(), 2, "one rect per shelf");
    assert_eq!(manifest(tmp.path())["artifacts"].as_array().unwrap().len(), 4);
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert_eq!(code(&run(&["run", "--scenario", "S1", "--seed", "3", "--out", p(dir)])), 0);
    }
    assert_eq!(fs::read(a.join("ticks.csv")).unwrap(), fs::read(b.join("ticks.csv")).unwrap());
    assert_eq!(fs::read(a.join("manifest.json")).unwrap().len(), fs::read(b.join("manifest.json")).unwrap().len());
}

#[test]
fn batch_mode_matches_single_runs() {
    let tmp = TempDir::new().unwrap();
    let batch = tmp.path().join("batch");
    let out = run(&[
        "run", "--scenario", "S1", "--scenario", "S2", "--scenario", "S3", "--jobs", "3", "--out", p(&batch),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["S1", "S2", "S3"] {
        let single = tmp.path().join(name);
        assert_eq!(code(&run(&["run", "--scenario", name, "--out", p(&single)])), 0);
        assert_eq!(
            fs::read(batch.join(name).join("ticks.csv")).unwrap(),
            fs::read(single.join("ticks.csv")).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn missing_scenario_file_exits_2() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["run", "--scenario", "missing.json", "--out", p(tmp.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("missing.json"));
}

#[test]
fn malformed_config_reports_line_and_field() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\n  \"schema\": \"warefollow/scenario-v1\",\n  \"name\": \"x\",\n  \"dt\": \"fast\"\n}\n").unwrap();
    let out = run(&["run", "--scenario", p(&bad), "--out", p(tmp.path())]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("line 4"), "{err}");

    let mut cfg = builtin("S2").unwrap();
    cfg.dt = -0.1;
    let neg = save_config(tmp.path(), "neg.json", &cfg);
    let out = run(&["run", "--scenario", p(&neg), "--out", p(tmp.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("`dt`"), "{}", stderr(&out));
}

#[test]
fn failed_criteria_exit_1() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = builtin("S2").unwrap();
    cfg.max_steps = 20;
    let short = save_config(tmp.path(), "short.json", &cfg);
    let out = run(&["run", "--scenario", p(&short), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("completed=false"));
    // Artifacts are still written for a failed run.
    assert!(tmp.path().join("o/manifest.json").is_file());
}

#[test]
fn collisions_never_exit_0() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = builtin("S2").unwrap();
    // A shelf grazing the robot's footprint from the start, clear of the view.
    cfg.shelves.push(Rect::new(-1.0, 0.2, 0.0, 1.0));
    cfg.success.require_arrival = false;
    cfg.success.max_final_distance = 100.0;
    let crash = save_config(tmp.path(), "crash.json", &cfg);
    let out = run(&["run", "--scenario", p(&crash), "--out", p(&tmp.path().join("o"))]);
    let text = stdout(&out);
    assert!(!text.contains("collisions=0\n"), "{text}");
    assert_eq!(code(&out), 1, "{text}");
}

#[test]
fn unwritable_output_exits_3() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = run(&["run", "--scenario", "S1", "--out", p(&blocker.join("sub"))]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn output_dir_defaults_from_environment() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("from-env");
    let out = bin()
        .args(["run", "--scenario", "S1"])
        .env("WAREFOLLOW_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(dir.join("manifest.json").is_file());
}

#[test]
fn dt_override_keeps_durations_in_seconds() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["run", "--scenario", "S2", "--dt-override", "0.05", "--out", p(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let used = ScenarioConfig::load(tmp.path().join("config.json")).unwrap();
    assert_eq!(used.dt, 0.05);
    assert_eq!(used.max_steps, 2 * builtin("S2").unwrap().max_steps);
    assert_eq!(code(&run(&["run", "--scenario", "S2", "--dt-override", "0", "--out", p(tmp.path())])), 2);
}

fn walker(u: f64, label: &str) -> Detection {
    Detection {
        u_center: u,
        v_center: 240.0,
        width_px: 50.0,
        height_px: 160.0,
        depth: 5.0,
        confidence: 1.0,
        feature: base_feature(label, 16),
        source: Some(label.into()),
    }
}

/// One pedestrian drifting right at 2 px per frame, invisible during `gap`.
fn gap_log(dir: &Path, frames: usize, gap: std::ops::Range<usize>) -> PathBuf {
    let log = DetectionLog {
        feature_dim: 16,
        frames: (0..frames)
            .map(|k| {
                if gap.contains(&k) {
                    vec![]
                } else {
                    vec![walker(200.0 + 2.0 * k as f64, "p1")]
                }
            })
            .collect(),
    };
    let path = dir.join("log.csv");
    write_detlog_file(&log, &path).unwrap();
    path
}

fn summary(out: &Output) -> std::collections::BTreeMap<String, String> {
    stdout(out)
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[test]
fn track_single_pedestrian() {
    let tmp = TempDir::new().unwrap();
    let log = gap_log(tmp.path(), 100, 0..0);
    let out = run(&["track", "--detections", p(&log), "--out", p(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let s = summary(&out);
    assert_eq!(s["confirmed_tracks"], "1");
    assert_eq!(s["id_switches"], "0");
    let csv = fs::read_to_string(tmp.path().join("tracks.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "frame,track_id,u,v,w,h,stage");
    assert_eq!(csv.lines().count(), 101);
}

#[test]
fn track_short_gap_keeps_id() {
    let tmp = TempDir::new().unwrap();
    let log = gap_log(tmp.path(), 100, 40..50);
    let s = summary(&run(&["track", "--detections", p(&log), "--out", p(tmp.path())]));
    assert_eq!(s["tracks_created"], "1");
    assert_eq!(s["id_switches"], "0");
}

#[test]
fn track_long_gap_switches_once() {
    let tmp = TempDir::new().unwrap();
    let log = gap_log(tmp.path(), 120, 40..80);
    let s = summary(&run(&["track", "--detections", p(&log), "--out", p(tmp.path())]));
    assert_eq!(s["tracks_created"], "2");
    assert_eq!(s["confirmed_tracks"], "2");
    assert_eq!(s["id_switches"], "1");
}

#[test]
fn track_params_file_changes_lifecycle() {
    let tmp = TempDir::new().unwrap();
    let log = gap_log(tmp.path(), 120, 40..80);
    let params = tmp.path().join("params.json");
    fs::write(&params, r#"{"max_age": 60}"#).unwrap();
    let out = run(&["track", "--detections", p(&log), "--params", p(&params), "--out", p(tmp.path())]);
    let s = summary(&out);
    assert_eq!(s["id_switches"], "0", "{}", stdout(&out));
}

#[test]
fn malformed_log_names_line() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.csv");
    let mut text = String::from("frame,u,v,w,h,depth,conf,f0\n");
    for i in 0..5 {
        text.push_str(&format!("{i},1,1,1,1,1,1,1\n"));
    }
    text.push_str("5,abc,1,1,1,1,1,1\n");
    fs::write(&path, text).unwrap();
    let out = run(&["track", "--detections", p(&path), "--out", p(tmp.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 7"), "{}", stderr(&out));
}

fn open_world(shelves: Vec<Rect<f64>>) -> ScenarioConfig {
    let mut cfg = builtin("S2").unwrap();
    cfg.name = "open".into();
    cfg.bounds = Rect::new(-5.0, -5.0, 5.0, 5.0);
    cfg.shelves = shelves;
    cfg.pedestrians.clear();
    cfg
}

fn field_rows(dir: &Path) -> Vec<[f64; 5]> {
    fs::read_to_string(dir.join("field.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2], v[3], v[4]]
        })
        .collect()
}

#[test]
fn field_over_empty_world_is_pure_attraction() {
    let tmp = TempDir::new().unwrap();
    let cfg = open_world(vec![]);
    let k_att = cfg.apf.k_att;
    let path = save_config(tmp.path(), "open.json", &cfg);
    let out = run(&["field", "--scenario", p(&path), "--grid", "10", "--goal", "1,-2", "--out", p(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = field_rows(tmp.path());
    assert_eq!(rows.len(), 100);
    for [x, y, fx, fy, _] in rows {
        assert!((fx - k_att * (1.0 - x)).abs() <= 1e-6);
        assert!((fy - k_att * (-2.0 - y)).abs() <= 1e-6);
    }
}

#[test]
fn field_of_mirrored_shelves_is_mirrored() {
    let tmp = TempDir::new().unwrap();
    let cfg = open_world(vec![Rect::new(-1.0, 1.0, 1.0, 2.0), Rect::new(-1.0, -2.0, 1.0, -1.0)]);
    let path = save_config(tmp.path(), "mirror.json", &cfg);
    let out = run(&[
        "field", "--scenario", p(&path), "--grid", "20", "--goal", "4,0", "--plot", "--out", p(tmp.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(tmp.path().join("field.svg").is_file());
    let rows = field_rows(tmp.path());
    let n = 20;
    for j in 0..n {
        for i in 0..n {
            let a = rows[j * n + i];
            let b = rows[(n - 1 - j) * n + i];
            assert!((a[0] - b[0]).abs() <= 1e-9);
            assert!((a[1] + b[1]).abs() <= 1e-9);
            assert!((a[2] - b[2]).abs() <= 1e-9, "fx at {:?}", (a[0], a[1]));
            assert!((a[3] + b[3]).abs() <= 1e-9, "fy at {:?}", (a[0], a[1]));
            assert!((a[4] - b[4]).abs() <= 1e-9);
        }
    }
}

#[test]
fn field_rejects_zero_grid() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run(&["field", "--scenario", "S2", "--grid", "0", "--out", p(tmp.path())])), 2);
}
