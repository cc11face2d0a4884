use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use warefollow::apf::{field_grid, write_field_csv};
use warefollow::sensor::read_detlog_file;
use warefollow::sim::{
    self, builtin, ground_truth_id_switches, write_metrics, write_ticks_csv, AttributionFrame, RunOutput,
    ScenarioConfig, BUILTIN_NAMES, SCHEMA,
};
use warefollow::tracker::{write_track_header, write_track_rows};
use warefollow::{Error, Point, Tracker, TrackerParams};

use crate::manifest::{sha256_hex, write_manifest, RunManifest};
use crate::plot::{field_svg, trajectory_svg};
use crate::{FieldArgs, RunArgs, TrackArgs};

pub const EXIT_CRITERIA: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_IO: u8 = 3;

const CONFIG_FILE: &str = "config.json";
const TICKS_FILE: &str = "ticks.csv";
const METRICS_FILE: &str = "metrics.txt";
const TRAJECTORY_FILE: &str = "trajectory.svg";
const FIELD_FILE: &str = "field.csv";
const HEATMAP_FILE: &str = "field.svg";
const TRACKS_FILE: &str = "tracks.csv";
const TRACK_METRICS_FILE: &str = "track_metrics.txt";

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

/// A scenario ready to run, with where it came from.
struct Resolved {
    config: ScenarioConfig,
    source: String,
}

fn resolve_scenario(spec: &str) -> Result<Resolved, CliError> {
    if let Some(name) = BUILTIN_NAMES.iter().find(|n| n.eq_ignore_ascii_case(spec)) {
        let config = builtin(name).expect("builtin names resolve");
        return Ok(Resolved {
            config,
            source: format!("builtin:{name}"),
        });
    }
    let text = fs::read_to_string(spec).map_err(|e| CliError::input(format!("cannot read scenario {spec}: {e}")))?;
    let config = ScenarioConfig::from_json(&text).map_err(|e| CliError::input(format!("{spec}: {e}")))?;
    Ok(Resolved {
        config,
        source: spec.to_string(),
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

/// Renders with one of the library writers into memory.
fn render(f: impl FnOnce(&mut Vec<u8>) -> warefollow::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    buf
}

/// One output directory per scenario; a single scenario writes straight
/// into `out`.
fn output_dirs(out: &Path, configs: &[ScenarioConfig]) -> Vec<PathBuf> {
    if configs.len() == 1 {
        return vec![out.to_path_buf()];
    }
    let mut seen = BTreeSet::new();
    configs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let name = if seen.insert(c.name.clone()) {
                c.name.clone()
            } else {
                format!("{}-{k}", c.name)
            };
            out.join(name)
        })
        .collect()
}

fn passed(output: &RunOutput) -> bool {
    let m = &output.metrics;
    m.completed && m.collisions == 0 && m.target_loss_events == 0
}

pub fn run(args: &RunArgs) -> Result<ExitCode, CliError> {
    if args.jobs == 0 {
        return Err(CliError::input("--jobs must be at least 1"));
    }
    let mut resolved = Vec::with_capacity(args.scenario.len());
    for spec in &args.scenario {
        let mut r = resolve_scenario(spec)?;
        if let Some(seed) = args.seed {
            r.config.rng_seed = seed;
        }
        if let Some(dt) = args.dt_override {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(CliError::input("--dt-override must be a positive number of seconds"));
            }
            r.config = r.config.with_dt(dt);
        }
        r.config.validate().map_err(|e| CliError::input(format!("{spec}: {e}")))?;
        resolved.push(r);
    }

    let configs: Vec<ScenarioConfig> = resolved.iter().map(|r| r.config.clone()).collect();
    let dirs = output_dirs(&args.out, &configs);
    for dir in &dirs {
        create_dir(dir)?;
    }

    let results = sim::run_batch(&configs, args.jobs);
    let mut all_passed = true;
    for ((r, dir), result) in resolved.iter().zip(&dirs).zip(results) {
        let output = result.map_err(|e| CliError {
            code: EXIT_CRITERIA,
            message: format!("{}: run failed: {e}", r.config.name),
        })?;
        write_run(r, dir, &output, args.plot)?;
        if resolved.len() > 1 {
            println!("[{}]", r.config.name);
        }
        print!("{}", String::from_utf8_lossy(&render(|b| write_metrics(&output.metrics, b))));
        all_passed &= passed(&output);
    }
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CRITERIA)
    })
}

fn write_run(r: &Resolved, dir: &Path, output: &RunOutput, plot: bool) -> Result<(), CliError> {
    let config_text = r.config.to_json() + "\n";
    write_file(&dir.join(CONFIG_FILE), config_text.as_bytes())?;
    write_file(&dir.join(TICKS_FILE), &render(|b| write_ticks_csv(&output.ticks, b)))?;
    write_file(&dir.join(METRICS_FILE), &render(|b| write_metrics(&output.metrics, b)))?;
    let mut artifacts = vec![CONFIG_FILE.to_string(), TICKS_FILE.to_string(), METRICS_FILE.to_string()];
    if plot {
        write_file(&dir.join(TRAJECTORY_FILE), trajectory_svg(&r.config, &output.ticks).as_bytes())?;
        artifacts.push(TRAJECTORY_FILE.to_string());
    }
    write_manifest(
        dir,
        &RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            schema: SCHEMA.to_string(),
            scenario: r.config.name.clone(),
            config_source: r.source.clone(),
            config_path: dir.join(CONFIG_FILE).display().to_string(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            resolved_seed: r.config.rng_seed,
            output_dir: dir.display().to_string(),
            artifacts,
        },
    )
}

pub fn track(args: &TrackArgs) -> Result<ExitCode, CliError> {
    let log = read_detlog_file::<f64>(&args.detections).map_err(|e| match e {
        Error::Io(io) => CliError::input(format!("cannot read {}: {io}", args.detections.display())),
        other => CliError::input(format!("{}: {other}", args.detections.display())),
    })?;
    let params: TrackerParams = match &args.params {
        None => TrackerParams::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::input(format!("{}: line {}: {e}", path.display(), e.line())))?
        }
    };
    params.validate().map_err(|e| CliError::input(e.to_string()))?;

    let mut tracker = Tracker::new(params);
    let mut rows = Vec::new();
    write_track_header(&mut rows).expect("in-memory write");
    let mut attribution = Vec::with_capacity(log.frames.len());
    let mut confirmed_ids = BTreeSet::new();
    let mut created = 0;
    let labelled = log.frames.iter().flatten().any(|d| d.source.is_some());

    for (frame, detections) in log.frames.iter().enumerate() {
        let result = tracker.step(detections).map_err(|e| CliError {
            code: EXIT_CRITERIA,
            message: format!("frame {frame}: {e}"),
        })?;
        created += result.new_track_ids.len();
        confirmed_ids.extend(result.confirmed.iter().map(|s| s.id));
        write_track_rows(&mut rows, frame, tracker.tracks()).expect("in-memory write");
        attribution.push(AttributionFrame {
            truth: detections
                .iter()
                .filter_map(|d| d.source.clone().map(|s| (s, d.bbox())))
                .collect(),
            tracks: result.matched_confirmed().map(|(s, _)| (s.id, s.bbox)).collect(),
        });
    }

    let mut summary = format!(
        "frames={}\ndetections={}\ntracks_created={created}\nconfirmed_tracks={}\n",
        log.frames.len(),
        log.frames.iter().map(Vec::len).sum::<usize>(),
        confirmed_ids.len()
    );
    if labelled {
        summary.push_str(&format!("id_switches={}\n", ground_truth_id_switches(&attribution)));
    }

    create_dir(&args.out)?;
    write_file(&args.out.join(TRACKS_FILE), &rows)?;
    write_file(&args.out.join(TRACK_METRICS_FILE), summary.as_bytes())?;
    print!("{summary}");
    Ok(ExitCode::SUCCESS)
}

pub fn field(args: &FieldArgs) -> Result<ExitCode, CliError> {
    if args.grid == 0 {
        return Err(CliError::input("--grid must be at least 1"));
    }
    let r = resolve_scenario(&args.scenario)?;
    let target = r.config.target();
    let goal = args
        .goal
        .or_else(|| target.and_then(|t| t.waypoints.last()).map(|w| (w.x, w.y)));
    let goal_point = goal.map(|(x, y)| Point::new(x, y));
    let world = r.config.initial_world();
    let samples = field_grid(
        &world,
        goal_point.as_ref(),
        target.map(|t| t.id.as_str()),
        &r.config.apf,
        args.grid,
    );

    let dir = &args.out;
    create_dir(dir)?;
    let config_text = r.config.to_json() + "\n";
    write_file(&dir.join(CONFIG_FILE), config_text.as_bytes())?;
    write_file(&dir.join(FIELD_FILE), &render(|b| write_field_csv(&samples, b)))?;
    let mut artifacts = vec![CONFIG_FILE.to_string(), FIELD_FILE.to_string()];
    if args.plot {
        write_file(&dir.join(HEATMAP_FILE), field_svg(&r.config, &samples, args.grid, goal).as_bytes())?;
        artifacts.push(HEATMAP_FILE.to_string());
    }
    write_manifest(
        dir,
        &RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            schema: SCHEMA.to_string(),
            scenario: r.config.name.clone(),
            config_source: r.source.clone(),
            config_path: dir.join(CONFIG_FILE).display().to_string(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            resolved_seed: r.config.rng_seed,
            output_dir: dir.display().to_string(),
            artifacts,
        },
    )?;
    println!("samples={}", samples.len());
    Ok(ExitCode::SUCCESS)
}
