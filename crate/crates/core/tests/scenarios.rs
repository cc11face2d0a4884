use warefollow::sim::{
    builtin, builtin_scenarios, run, run_batch, write_metrics, write_ticks_csv, RunOutput, ScenarioConfig, SCHEMA,
    TICKS_HEADER,
};
use warefollow::Error;

fn ticks_csv(out: &RunOutput) -> Vec<u8> {
    let mut buf = Vec::new();
    write_ticks_csv(&out.ticks, &mut buf).unwrap();
    buf
}

fn seeded(name: &str, seed: u64) -> ScenarioConfig {
    let mut cfg = builtin(name).unwrap();
    cfg.rng_seed = seed;
    cfg
}

/// Longest run of frames in which `id` had no visible box, between two
/// frames where it had one.
fn longest_hidden_run(out: &RunOutput, id: &str) -> usize {
    let seen: Vec<bool> = out
        .attribution
        .iter()
        .map(|f| f.truth.iter().any(|(n, _)| n == id))
        .collect();
    let first = seen.iter().position(|&s| s).unwrap();
    let last = seen.iter().rposition(|&s| s).unwrap();
    let mut best = 0;
    let mut run = 0;
    for &s in &seen[first..=last] {
        run = if s { 0 } else { run + 1 };
        best = best.max(run);
    }
    best
}

#[test]
fn builtins_validate_and_have_the_declared_cast() {
    for cfg in builtin_scenarios() {
        cfg.validate().unwrap();
    }
    assert_eq!(builtin("S1").unwrap().pedestrians.len(), 3);

    let s2 = builtin("S2").unwrap();
    let (a, b) = (s2.shelves[0], s2.shelves[1]);
    assert_eq!(b.min_x - a.max_x, 2.0);

    let s3 = builtin("S3").unwrap();
    assert_eq!(s3.pedestrians.len(), 2);
    assert_eq!(s3.pedestrians.iter().filter(|p| p.target).count(), 1);
    assert!(builtin("S4").is_none());
}

#[test]
fn empty_world_never_moves() {
    let mut cfg = builtin("S2").unwrap();
    cfg.pedestrians.clear();
    cfg.max_steps = 50;
    let out = run(&cfg).unwrap();
    assert_eq!(out.ticks.len(), 50);
    assert!(out.ticks.iter().all(|t| t.robot == out.ticks[0].robot));
    assert_eq!(out.ticks[0].robot.x, cfg.robot.pose.x);
    assert!(!out.metrics.completed);
    assert_eq!(out.metrics.collisions, 0);
    assert_eq!(out.metrics.path_length, 0.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    for name in ["S1", "S2", "S3"] {
        let cfg = seeded(name, 11);
        assert_eq!(ticks_csv(&run(&cfg).unwrap()), ticks_csv(&run(&cfg).unwrap()), "{name}");
    }
}

#[test]
fn batch_preserves_order_and_bytes() {
    let configs: Vec<_> = (0..6).map(|i| seeded(["S1", "S2", "S3"][i % 3], i as u64)).collect();
    let parallel = run_batch(&configs, 4);
    for (cfg, result) in configs.iter().zip(parallel) {
        assert_eq!(ticks_csv(&result.unwrap()), ticks_csv(&run(cfg).unwrap()));
    }
}

#[test]
fn seeds_change_the_noise() {
    let a = ticks_csv(&run(&seeded("S2", 1)).unwrap());
    let b = ticks_csv(&run(&seeded("S2", 2)).unwrap());
    assert_ne!(a, b);
}

#[test]
fn s1_has_a_full_occlusion_and_keeps_ids() {
    let out = run(&seeded("S1", 0)).unwrap();
    let hidden = longest_hidden_run(&out, "far");
    assert!((10..=20).contains(&hidden), "occlusion lasted {hidden} frames");
    assert_eq!(out.metrics.tracker_id_switches_ground_truth, 0);
    assert_eq!(out.metrics.id_switches_on_lock, 0);
    assert!(out.diagnostics.final_lock_on_target);
}

#[test]
fn width_module_absorbs_a_forced_tracker_switch() {
    // Tracks die during the occlusion, so the tracker must hand out new ids.
    let mut cfg = seeded("S1", 0);
    cfg.tracker.max_age = 5;
    let out = run(&cfg).unwrap();
    assert!(out.metrics.tracker_id_switches_ground_truth >= 1);
    assert!(out.metrics.id_switches_on_lock <= 1);
}

#[test]
fn noise_free_single_walker_keeps_one_lock() {
    let mut cfg = builtin("S2").unwrap();
    cfg.noise = warefollow::sensor::NoiseSpec::noiseless(0);
    let out = run(&cfg).unwrap();
    let ids: Vec<_> = out.ticks.iter().filter_map(|t| t.lock_id).collect();
    assert!(!ids.is_empty());
    assert!(ids.iter().all(|&id| id == ids[0]));
}

#[test]
fn completed_runs_keep_clear_of_everything() {
    for name in ["S1", "S2", "S3"] {
        let out = run(&seeded(name, 3)).unwrap();
        let m = &out.metrics;
        assert!(m.completed, "{name}");
        assert_eq!(m.collisions, 0);
        assert!(out.ticks.iter().all(|t| t.min_clearance >= 0.0));
        let d = &out.diagnostics;
        assert!(
            m.id_switches_on_lock
                <= m.tracker_id_switches_ground_truth + d.reacquisitions + d.reacquisitions_after_loss
        );
    }
}

#[test]
fn halving_dt_barely_moves_the_s2_endpoint() {
    let cfg = builtin("S2").unwrap();
    let coarse = run(&cfg).unwrap();
    let fine = run(&cfg.clone().with_dt(cfg.dt / 2.0)).unwrap();
    assert!(coarse.metrics.completed && fine.metrics.completed);
    let (a, b) = (coarse.ticks.last().unwrap().robot, fine.ticks.last().unwrap().robot);
    assert!((a.x - b.x).hypot(a.y - b.y) < 0.1);
}

#[test]
fn config_json_round_trips() {
    for cfg in builtin_scenarios() {
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }
}

#[test]
fn optional_sections_take_defaults() {
    let text = format!(
        r#"{{
  "schema": "{SCHEMA}",
  "name": "bare",
  "dt": 0.1,
  "max_steps": 5,
  "rng_seed": 3,
  "bounds": {{"min_x": 0, "min_y": 0, "max_x": 10, "max_y": 10}},
  "robot": {{"pose": {{"x": 1, "y": 1, "theta": 0}}, "radius": 0.3, "max_speed": 1, "max_turn_rate": 1}}
}}"#
    );
    let cfg = ScenarioConfig::from_json(&text).unwrap();
    assert_eq!(cfg.tracker, Default::default());
    assert!(cfg.pedestrians.is_empty());
    assert_eq!(run(&cfg).unwrap().ticks.len(), 5);
}

#[test]
fn parse_errors_carry_line_and_field() {
    let text = format!("{{\n  \"schema\": \"{SCHEMA}\",\n  \"name\": \"x\",\n  \"dt\": \"fast\"\n}}");
    match ScenarioConfig::from_json(&text) {
        Err(Error::Parse { line, message }) => {
            assert_eq!(line, 4);
            assert!(message.contains("invalid type"), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
    let missing = format!("{{\"schema\": \"{SCHEMA}\", \"name\": \"x\"}}");
    match ScenarioConfig::from_json(&missing) {
        Err(Error::Parse { message, .. }) => assert!(message.contains("dt"), "{message}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn validation_names_the_field() {
    let mut cfg = builtin("S3").unwrap();
    cfg.dt = 0.0;
    assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "dt"));

    let mut cfg = builtin("S3").unwrap();
    cfg.pedestrians[1].target = true;
    assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "pedestrians"));

    let mut cfg = builtin("S1").unwrap();
    cfg.schema = "other/1".into();
    assert!(matches!(run(&cfg), Err(Error::Config { field, .. }) if field == "schema"));
}

#[test]
fn writers_follow_the_formats() {
    let out = run(&seeded("S2", 0)).unwrap();
    let csv = String::from_utf8(ticks_csv(&out)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(TICKS_HEADER));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 12);
    assert_eq!(first[0], "0.100000");
    assert_eq!(csv.lines().count(), out.ticks.len() + 1);

    let mut text = Vec::new();
    write_metrics(&out.metrics, &mut text).unwrap();
    let text = String::from_utf8(text).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.contains("completed=true\n"));
}
