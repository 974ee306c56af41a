//! Command-line front end for the survey simulator: world generation, single
//! missions, the four evaluation experiments, and detector calibration.
//!
//! Flags can also come from a TOML config file (`--config`); explicit flags
//! win. Every output file embeds the fully resolved configuration so results
//! stay reproducible. Exit codes: 0 success, 1 failure during simulation or
//! while writing outputs, 2 configuration error caught before any work runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use fieldscout::coverage::{plan_coverage, FieldPolygon};
use fieldscout::detect::DetectorProfile;
use fieldscout::eval::{
    self, best_cell, crossover_density, evaluate_mission, relative_length, summarize_sweep,
    DensityConfig, DensityRecord, LocalizationConfig, MissionRecord, SeparabilityRow, SweepConfig,
    BASELINE_ALTITUDE, BEST_CELL_MAX_F1_DROP,
};
use fieldscout::geo::CameraModel;
use fieldscout::inspect::PlannerParams;
use fieldscout::io;
use fieldscout::sim::{
    default_field, generate_world, run_baseline, run_mission, LocalizationErrorLevel,
    MissionResult, WorldDistribution, WorldObject,
};

mod svg;

#[derive(Parser)]
#[command(
    name = "fieldscout",
    version,
    about = "Adaptive survey simulator: coverage flights, certainty-triggered \
             inspection, and the evaluation experiments around them"
)]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic object layout and write it as GeoJSON.
    GenWorld(GenWorldArgs),
    /// Fly one mission and write the image log, map, paths and metrics.
    Run(RunArgs),
    /// Reproduce one of the evaluation experiments.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Fit the per-altitude detection rates to target single-image F1 scores.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct GenWorldArgs {
    /// Spatial layout: uniform or clustered.
    #[arg(long)]
    dist: Option<String>,
    /// Object count; 0 writes an empty collection.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Field polygon GeoJSON; defaults to the built-in 100x75 m rectangle.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Output file; defaults to world-<dist>-n<n>-s<seed>.geojson in --out-dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// adaptive (coverage plus inspection) or coverage (fixed altitude only).
    #[arg(long)]
    planner: Option<String>,
    /// Field polygon GeoJSON; defaults to the built-in 100x75 m rectangle.
    #[arg(long)]
    field: Option<PathBuf>,
    /// World GeoJSON to fly over; mutually exclusive with --dist/--n.
    #[arg(long)]
    world: Option<PathBuf>,
    /// Generate the world instead of reading one: uniform or clustered.
    #[arg(long)]
    dist: Option<String>,
    /// Object count when generating the world.
    #[arg(long)]
    n: Option<usize>,
    /// Coverage altitude, meters.
    #[arg(long)]
    h_cov: Option<f64>,
    /// Inspection altitude, meters.
    #[arg(long)]
    h_inspect: Option<f64>,
    /// Certainty above which an object needs no inspection.
    #[arg(long)]
    c_accept: Option<f64>,
    /// Certainty below which an object is pruned.
    #[arg(long)]
    c_reject: Option<f64>,
    /// Certainty above which a mapped object counts as reported.
    #[arg(long)]
    c_eval: Option<f64>,
    /// Map merge distance, meters.
    #[arg(long)]
    d_dist: Option<f64>,
    /// Footprint overlap fraction between adjacent coverage rows.
    #[arg(long)]
    overlap: Option<f64>,
    /// Localization error level: perfect, good, decent, poor or very_poor.
    #[arg(long)]
    level: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Detector profile TOML; defaults to the shipped calibrated profile.
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// How well each certainty measure separates true from false detections.
    Certainty(CertaintyArgs),
    /// Mission quality over the altitude/threshold grid, both layouts.
    Sweep(SweepArgs),
    /// Planner robustness as localization degrades.
    Localization(LocalizationArgs),
    /// Path-length crossover as object density grows.
    Density(DensityArgs),
}

#[derive(Args)]
struct CertaintyArgs {
    /// Images simulated per altitude.
    #[arg(long)]
    images: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Field polygon GeoJSON (experiments default to the built-in field).
    #[arg(long)]
    field: Option<PathBuf>,
    /// Skip the SVG chart.
    #[arg(long)]
    no_svg: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Worlds per layout; runs use seeds 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    /// Objects per world.
    #[arg(long)]
    object_count: Option<usize>,
    /// Localization error level applied to every run.
    #[arg(long)]
    level: Option<String>,
    /// Field polygon GeoJSON (experiments default to the built-in field).
    #[arg(long)]
    field: Option<PathBuf>,
    /// Skip the SVG chart.
    #[arg(long)]
    no_svg: bool,
}

#[derive(Args)]
struct LocalizationArgs {
    /// Worlds per layout; runs use seeds 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    /// Objects per world.
    #[arg(long)]
    object_count: Option<usize>,
    /// Field polygon GeoJSON (experiments default to the built-in field).
    #[arg(long)]
    field: Option<PathBuf>,
    /// Skip the SVG chart.
    #[arg(long)]
    no_svg: bool,
}

#[derive(Args)]
struct DensityArgs {
    /// Highest object count.
    #[arg(long)]
    max: Option<usize>,
    /// Object count step.
    #[arg(long)]
    step: Option<usize>,
    /// Worlds per (layout, count); runs use seeds 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    /// Field polygon GeoJSON (experiments default to the built-in field).
    #[arg(long)]
    field: Option<PathBuf>,
    /// Skip the SVG chart.
    #[arg(long)]
    no_svg: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Trials per candidate rate during the fit.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Target operating points as altitude=f1, repeatable.
    #[arg(long = "target")]
    targets: Vec<String>,
    /// Starting profile TOML; the fit only adjusts detection rates.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Output file; defaults to profile.toml in --out-dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Config file.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    world: Option<WorldSection>,
    planner: Option<PlannerSection>,
    run: Option<RunSection>,
    experiment: Option<ExperimentSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldSection {
    dist: Option<String>,
    n: Option<usize>,
    seed: Option<u64>,
    field: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlannerSection {
    h_cov: Option<f64>,
    h_inspect: Option<f64>,
    c_accept: Option<f64>,
    c_reject: Option<f64>,
    c_eval: Option<f64>,
    d_dist: Option<f64>,
    overlap: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    planner: Option<String>,
    level: Option<String>,
    seed: Option<u64>,
    world: Option<PathBuf>,
    profile: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    seeds: Option<u64>,
    object_count: Option<usize>,
    level: Option<String>,
    images: Option<usize>,
    max: Option<usize>,
    step: Option<usize>,
    svg: Option<bool>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    fn world(&self) -> WorldSection {
        self.world.as_ref().map_or_else(WorldSection::default, |w| WorldSection {
            dist: w.dist.clone(),
            n: w.n,
            seed: w.seed,
            field: w.field.clone(),
        })
    }
}

// ---------------------------------------------------------------------------
// Errors and small helpers.

enum CliError {
    /// Rejected before any simulation started; exits with code 2.
    Config(String),
    /// Failed while simulating or writing outputs; exits with code 1.
    Runtime(String),
}

fn cfg_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn parse_dist(s: &str) -> Result<WorldDistribution, CliError> {
    match s {
        "uniform" => Ok(WorldDistribution::Uniform),
        "clustered" => Ok(WorldDistribution::Clustered),
        _ => Err(CliError::Config(format!(
            "unknown distribution '{s}' (expected uniform or clustered)"
        ))),
    }
}

/// Field from an explicit path, or the built-in rectangle. The returned
/// string names the source inside embedded configs.
fn load_field(path: Option<&PathBuf>) -> Result<(FieldPolygon, String), CliError> {
    match path {
        Some(p) => {
            let field = io::read_field(p)
                .map_err(|e| CliError::Config(format!("field {}: {e}", p.display())))?;
            Ok((field, p.display().to_string()))
        }
        None => Ok((default_field(), "builtin".into())),
    }
}

fn load_profile(path: Option<&PathBuf>) -> Result<(DetectorProfile, String), CliError> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("profile {}: {e}", p.display())))?;
            let profile = DetectorProfile::from_toml_str(&text)
                .map_err(|e| CliError::Config(format!("profile {}: {e}", p.display())))?;
            Ok((profile, p.display().to_string()))
        }
        None => Ok((DetectorProfile::default_calibrated(), "builtin".into())),
    }
}

fn load_level(name: Option<&str>) -> Result<LocalizationErrorLevel, CliError> {
    LocalizationErrorLevel::by_name(name.unwrap_or("perfect")).map_err(cfg_err)
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    io::write_json(path, value).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// CSV cell for an optional score; empty when there was nothing to score.
fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_header(config: &Value, columns: &str) -> String {
    format!("# config: {config}\n{columns}\n")
}

// ---------------------------------------------------------------------------
// Entry point.

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(cfg_err)?;
    }
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::GenWorld(args) => gen_world(args, &file, &cli.out_dir),
        Command::Run(args) => run(args, &file, &cli.out_dir),
        Command::Experiment(cmd) => experiment(cmd, &file, &cli.out_dir, cli.jobs),
        Command::Calibrate(args) => calibrate(args, &file, &cli.out_dir),
    }
}

// ---------------------------------------------------------------------------
// gen-world

fn gen_world(args: GenWorldArgs, file: &FileConfig, out_dir: &Path) -> Result<(), CliError> {
    let w = file.world();
    let dist_name = args
        .dist
        .or(w.dist)
        .ok_or_else(|| CliError::Config("--dist is required (uniform or clustered)".into()))?;
    let dist = parse_dist(&dist_name)?;
    let n = args
        .n
        .or(w.n)
        .ok_or_else(|| CliError::Config("--n is required".into()))?;
    let seed = args.seed.or(w.seed).unwrap_or(0);
    let (field, field_src) = load_field(args.field.as_ref().or(w.field.as_ref()))?;

    let config = json!({
        "command": "gen-world",
        "dist": dist.as_str(),
        "n": n,
        "seed": seed,
        "field": field_src,
    });

    let world = generate_world(dist, &field, n, seed).map_err(run_err)?;

    let out = match args.out {
        Some(p) => p,
        None => {
            ensure_out_dir(out_dir)?;
            out_dir.join(format!("world-{}-n{n}-s{seed}.geojson", dist.as_str()))
        }
    };
    write_json(&out, &io::world_to_geojson(&world, Some(&config)))?;
    println!("{} objects, layout {}", world.len(), dist.as_str());
    Ok(())
}

// ---------------------------------------------------------------------------
// run

struct ResolvedRun {
    adaptive: bool,
    field: FieldPolygon,
    world: Vec<WorldObject>,
    params: PlannerParams,
    level: LocalizationErrorLevel,
    seed: u64,
    profile: DetectorProfile,
    config: Value,
}

fn resolve_run(args: RunArgs, file: &FileConfig) -> Result<ResolvedRun, CliError> {
    let rsec = file.run.as_ref();
    let wsec = file.world();
    let psec = file.planner.as_ref();

    let planner = args
        .planner
        .or_else(|| rsec.and_then(|r| r.planner.clone()))
        .unwrap_or_else(|| "adaptive".into());
    let adaptive = match planner.as_str() {
        "adaptive" => true,
        "coverage" => false,
        other => {
            return Err(CliError::Config(format!(
                "unknown planner '{other}' (expected adaptive or coverage)"
            )))
        }
    };

    let (field, field_src) = load_field(args.field.as_ref().or(wsec.field.as_ref()))?;
    let seed = args.seed.or_else(|| rsec.and_then(|r| r.seed)).unwrap_or(0);

    let defaults = PlannerParams::default();
    let get = |flag: Option<f64>, sec: fn(&PlannerSection) -> Option<f64>, def: f64| {
        flag.or_else(|| psec.and_then(sec)).unwrap_or(def)
    };
    let params = PlannerParams {
        h_cov: get(args.h_cov, |p| p.h_cov, defaults.h_cov),
        h_inspect: get(args.h_inspect, |p| p.h_inspect, defaults.h_inspect),
        c_accept: get(args.c_accept, |p| p.c_accept, defaults.c_accept),
        c_reject: get(args.c_reject, |p| p.c_reject, defaults.c_reject),
        c_eval: get(args.c_eval, |p| p.c_eval, defaults.c_eval),
        d_dist: get(args.d_dist, |p| p.d_dist, defaults.d_dist),
        overlap_fraction: get(args.overlap, |p| p.overlap, defaults.overlap_fraction),
    };
    params.validate().map_err(cfg_err)?;

    let level_name = args.level.or_else(|| rsec.and_then(|r| r.level.clone()));
    let level = load_level(level_name.as_deref())?;

    let (profile, profile_src) =
        load_profile(args.profile.as_ref().or_else(|| rsec.and_then(|r| r.profile.as_ref())))?;

    let world_path = args.world.or_else(|| rsec.and_then(|r| r.world.clone()));
    let dist_name = args.dist.or(wsec.dist);
    if world_path.is_some() && dist_name.is_some() {
        return Err(CliError::Config(
            "--world and --dist are mutually exclusive".into(),
        ));
    }
    let (world, world_src) = match (world_path, dist_name) {
        (Some(p), None) => {
            let world = io::read_world(&p)
                .map_err(|e| CliError::Config(format!("world {}: {e}", p.display())))?;
            (world, json!({ "path": p.display().to_string() }))
        }
        (None, Some(d)) => {
            let dist = parse_dist(&d)?;
            let n = args.n.or(wsec.n).ok_or_else(|| {
                CliError::Config("--n is required when generating a world".into())
            })?;
            let world = generate_world(dist, &field, n, seed).map_err(run_err)?;
            (world, json!({ "dist": dist.as_str(), "n": n }))
        }
        (None, None) => {
            return Err(CliError::Config(
                "no world given: pass --world FILE or --dist/--n".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!(),
    };

    let config = json!({
        "command": "run",
        "planner": planner,
        "field": field_src,
        "world": world_src,
        "params": serde_json::to_value(params).map_err(run_err)?,
        "level": serde_json::to_value(&level).map_err(run_err)?,
        "seed": seed,
        "profile": profile_src,
    });

    Ok(ResolvedRun {
        adaptive,
        field,
        world,
        params,
        level,
        seed,
        profile,
        config,
    })
}

fn run(args: RunArgs, file: &FileConfig, out_dir: &Path) -> Result<(), CliError> {
    let r = resolve_run(args, file)?;
    let camera = CameraModel::default();

    let result = if r.adaptive {
        run_mission(&r.field, &r.world, &r.params, &camera, &r.profile, &r.level, r.seed)
    } else {
        run_baseline(&r.field, &r.world, &r.params, &camera, &r.profile, &r.level, r.seed)
    }
    .map_err(run_err)?;

    // Reference length: the fixed inspection-altitude coverage flight that a
    // non-adaptive survey of the same field would fly.
    let baseline_length =
        plan_coverage(&r.field, &camera, BASELINE_ALTITUDE, r.params.overlap_fraction)
            .map_err(run_err)?
            .length();
    let r_diff = relative_length(result.total_length, baseline_length).map_err(run_err)?;
    let (m, score) = evaluate_mission(&result, &r.world, r.params.c_eval);

    ensure_out_dir(out_dir)?;
    write_text(
        &out_dir.join("images.csv"),
        &io::image_log_csv(&result.images, Some(&r.config)),
    )?;
    write_json(
        &out_dir.join("map.geojson"),
        &io::map_to_geojson(&result.final_map, Some(&r.config)),
    )?;
    write_json(&out_dir.join("paths.geojson"), &paths_geojson(&result, &r.config))?;

    let mut metrics = csv_header(
        &r.config,
        "planner,level,seed,h_cov,h_inspect,c_accept,c_reject,c_eval,true_positives,\
         false_positives,false_negatives,f1,length_m,baseline_length_m,r_diff,extrapolated",
    );
    let _ = writeln!(
        metrics,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        if r.adaptive { "adaptive" } else { "coverage" },
        r.level.name,
        r.seed,
        r.params.h_cov,
        r.params.h_inspect,
        r.params.c_accept,
        r.params.c_reject,
        r.params.c_eval,
        m.true_positives,
        m.false_positives,
        m.false_negatives,
        opt_cell(score),
        result.total_length,
        baseline_length,
        r_diff,
        result.any_extrapolated(),
    );
    write_text(&out_dir.join("metrics.csv"), &metrics)?;

    println!(
        "{} mission, seed {}: {} images, {} inspection waypoints, {} mapped objects",
        if r.adaptive { "adaptive" } else { "coverage" },
        r.seed,
        result.images.len(),
        result.inspection_path.waypoints.len(),
        result.final_map.len(),
    );
    println!(
        "TP {}  FP {}  FN {}  F1 {}",
        m.true_positives,
        m.false_positives,
        m.false_negatives,
        score.map_or_else(|| "n/a".into(), |f| format!("{f:.3}")),
    );
    println!(
        "flew {:.1} m vs {:.1} m reference ({:.2}x)",
        result.total_length, baseline_length, r_diff
    );
    Ok(())
}

/// Both legs in one FeatureCollection; inspection waypoints carry the index
/// of the map object they were flown to confirm.
fn paths_geojson(result: &MissionResult, config: &Value) -> Value {
    let mut fc = io::path_to_geojson(&result.coverage_path, None, Some(config));
    if !result.inspection_path.waypoints.is_empty() {
        let ins =
            io::path_to_geojson(&result.inspection_path, Some(&result.inspection_targets), None);
        if let (Some(Value::Array(all)), Some(Value::Array(extra))) =
            (fc.get_mut("features"), ins.get("features"))
        {
            all.extend(extra.iter().cloned());
        }
    }
    fc
}

// ---------------------------------------------------------------------------
// experiments

fn experiment(
    cmd: ExperimentCmd,
    file: &FileConfig,
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let e = file.experiment.as_ref();
    let svg_default = e.and_then(|e| e.svg).unwrap_or(true);
    match cmd {
        ExperimentCmd::Certainty(args) => certainty(args, e, out_dir, svg_default, jobs),
        ExperimentCmd::Sweep(args) => sweep(args, e, out_dir, svg_default, jobs),
        ExperimentCmd::Localization(args) => localization(args, e, out_dir, svg_default, jobs),
        ExperimentCmd::Density(args) => density(args, e, out_dir, svg_default, jobs),
    }
}

fn seeds_list(flag: Option<u64>, e: Option<&ExperimentSection>, default: u64) -> Vec<u64> {
    let n = flag.or_else(|| e.and_then(|e| e.seeds)).unwrap_or(default);
    (0..n).collect()
}

/// Runs chunks sequentially (each is internally parallel), collecting rows
/// from the ones that succeed and a manifest entry for each one that fails.
fn run_chunks<K, R>(
    keys: Vec<K>,
    describe: impl Fn(&K) -> Value,
    run: impl Fn(&K) -> fieldscout::Result<Vec<R>>,
) -> (Vec<R>, Vec<Value>) {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for key in &keys {
        match run(key) {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => {
                let mut entry = describe(key);
                entry["error"] = json!(e.to_string());
                failures.push(entry);
            }
        }
    }
    (rows, failures)
}

/// Partial results still get written, plus a manifest naming every failed
/// chunk; the command then exits nonzero.
fn finish_experiment(
    out_dir: &Path,
    command: &str,
    config: &Value,
    failures: Vec<Value>,
) -> Result<(), CliError> {
    if failures.is_empty() {
        return Ok(());
    }
    let manifest = json!({
        "command": command,
        "config": config,
        "failures": failures,
    });
    write_json(&out_dir.join("failures.json"), &manifest)?;
    Err(CliError::Runtime(format!(
        "{} of the {command} chunks failed; partial results written",
        manifest["failures"].as_array().map_or(0, Vec::len),
    )))
}

fn certainty(
    args: CertaintyArgs,
    e: Option<&ExperimentSection>,
    out_dir: &Path,
    svg_default: bool,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let images = args.images.or_else(|| e.and_then(|e| e.images)).unwrap_or(300);
    let seed = args.seed.unwrap_or(0);
    let (_, field_src) = load_field(args.field.as_ref())?;
    let profile = DetectorProfile::default_calibrated();
    let camera = CameraModel::default();
    let altitudes: Vec<f64> = profile.anchors.iter().map(|a| a.altitude).collect();

    let config = json!({
        "command": "experiment certainty",
        "altitudes": altitudes,
        "images": images,
        "seed": seed,
        "field": field_src,
        "profile": "builtin",
        "jobs": jobs,
    });

    let rows: Vec<SeparabilityRow> =
        eval::experiment_certainty_separability(&profile, &camera, &altitudes, images, seed);

    let mut csv = csv_header(&config, "altitude,measure,welch_t,n_tp,n_fp");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.altitude, r.measure, opt_cell(r.t), r.n_tp, r.n_fp);
    }
    ensure_out_dir(out_dir)?;
    write_text(&out_dir.join("certainty.csv"), &csv)?;
    if !args.no_svg && svg_default {
        write_text(&out_dir.join("certainty.svg"), &svg::certainty_chart(&rows))?;
    }

    for r in rows.iter().filter(|r| r.altitude == altitudes[0]) {
        println!(
            "{:18} t = {:>8}  ({} TP / {} FP at {} m)",
            r.measure,
            r.t.map_or_else(|| "n/a".into(), |t| format!("{t:.2}")),
            r.n_tp,
            r.n_fp,
            r.altitude,
        );
    }
    Ok(())
}

fn mission_record_csv(config: &Value, records: &[MissionRecord]) -> String {
    let mut csv = csv_header(
        config,
        "distribution,h_cov,c_accept,c_reject,level,seed,true_positives,false_positives,\
         false_negatives,f1,length_m,baseline_length_m,baseline_f1,r_diff",
    );
    for r in records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.distribution.as_str(),
            r.h_cov,
            r.c_accept,
            r.c_reject,
            r.level,
            r.seed,
            r.true_positives,
            r.false_positives,
            r.false_negatives,
            opt_cell(r.f1),
            r.length,
            r.baseline_length,
            opt_cell(r.baseline_f1),
            r.r_diff,
        );
    }
    csv
}

fn sweep(
    args: SweepArgs,
    e: Option<&ExperimentSection>,
    out_dir: &Path,
    svg_default: bool,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let seeds = seeds_list(args.seeds, e, 10);
    let object_count = args
        .object_count
        .or_else(|| e.and_then(|e| e.object_count))
        .unwrap_or(60);
    let level_name = args.level.or_else(|| e.and_then(|e| e.level.clone()));
    let level = load_level(level_name.as_deref())?;
    let (field, field_src) = load_field(args.field.as_ref())?;
    let profile = DetectorProfile::default_calibrated();
    let camera = CameraModel::default();

    let cfg = SweepConfig {
        object_count,
        seeds: seeds.clone(),
        level,
        ..SweepConfig::default()
    };
    let config = json!({
        "command": "experiment sweep",
        "grid": serde_json::to_value(&cfg.grid).map_err(run_err)?,
        "object_count": object_count,
        "seeds": seeds,
        "level": serde_json::to_value(&cfg.level).map_err(run_err)?,
        "params_base": serde_json::to_value(cfg.params_base).map_err(run_err)?,
        "field": field_src,
        "profile": "builtin",
        "jobs": jobs,
    });

    // Whole grid in one go; only on failure rerun per world to salvage the
    // healthy chunks and name the broken ones.
    let (mut records, failures) = match eval::experiment_sweep(&cfg, &field, &camera, &profile) {
        Ok(records) => (records, Vec::new()),
        Err(_) => {
            let keys: Vec<(WorldDistribution, u64)> = cfg
                .distributions
                .iter()
                .flat_map(|d| seeds.iter().map(move |s| (*d, *s)))
                .collect();
            run_chunks(
                keys,
                |(d, s)| json!({ "distribution": d.as_str(), "seed": s }),
                |(d, s)| {
                    let chunk = SweepConfig {
                        distributions: vec![*d],
                        seeds: vec![*s],
                        ..cfg.clone()
                    };
                    eval::experiment_sweep(&chunk, &field, &camera, &profile)
                },
            )
        }
    };
    records.sort_by(|a, b| {
        (a.distribution.index(), a.seed)
            .cmp(&(b.distribution.index(), b.seed))
            .then(a.h_cov.total_cmp(&b.h_cov))
            .then(a.c_accept.total_cmp(&b.c_accept))
            .then(a.c_reject.total_cmp(&b.c_reject))
    });

    ensure_out_dir(out_dir)?;
    write_text(&out_dir.join("sweep.csv"), &mission_record_csv(&config, &records))?;

    if failures.is_empty() {
        let summaries = summarize_sweep(&records);
        let mut csv = csv_header(
            &config,
            "distribution,h_cov,c_accept,c_reject,runs,mean_f1,std_f1,mean_baseline_f1,\
             mean_r_diff,std_r_diff,best",
        );
        let best: Vec<_> = [WorldDistribution::Uniform, WorldDistribution::Clustered]
            .iter()
            .filter_map(|d| best_cell(&summaries, *d, BEST_CELL_MAX_F1_DROP))
            .collect();
        for s in &summaries {
            let is_best = best.iter().any(|b| {
                b.distribution == s.distribution
                    && b.h_cov == s.h_cov
                    && b.c_accept == s.c_accept
                    && b.c_reject == s.c_reject
            });
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{}",
                s.distribution.as_str(),
                s.h_cov,
                s.c_accept,
                s.c_reject,
                s.runs,
                opt_cell(s.mean_f1),
                opt_cell(s.std_f1),
                opt_cell(s.mean_baseline_f1),
                s.mean_r_diff,
                s.std_r_diff,
                is_best,
            );
        }
        write_text(&out_dir.join("sweep_summary.csv"), &csv)?;
        if !args.no_svg && svg_default {
            write_text(&out_dir.join("sweep.svg"), &svg::sweep_chart(&summaries))?;
        }
        for b in &best {
            println!(
                "best {} cell: h_cov={} c_accept={} c_reject={}  (relative length {:.3}, \
                 F1 {} vs reference {})",
                b.distribution.as_str(),
                b.h_cov,
                b.c_accept,
                b.c_reject,
                b.mean_r_diff,
                b.mean_f1.map_or_else(|| "n/a".into(), |f| format!("{f:.3}")),
                b.mean_baseline_f1.map_or_else(|| "n/a".into(), |f| format!("{f:.3}")),
            );
        }
    }
    finish_experiment(out_dir, "sweep", &config, failures)
}

fn localization(
    args: LocalizationArgs,
    e: Option<&ExperimentSection>,
    out_dir: &Path,
    svg_default: bool,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let seeds = seeds_list(args.seeds, e, 10);
    let object_count = args
        .object_count
        .or_else(|| e.and_then(|e| e.object_count))
        .unwrap_or(60);
    let (field, field_src) = load_field(args.field.as_ref())?;
    let profile = DetectorProfile::default_calibrated();
    let camera = CameraModel::default();

    let cfg = LocalizationConfig {
        object_count,
        seeds: seeds.clone(),
        ..LocalizationConfig::default()
    };
    let level_names: Vec<String> = cfg.levels.iter().map(|l| l.name.clone()).collect();
    let config = json!({
        "command": "experiment localization",
        "levels": level_names,
        "altitudes": cfg.altitudes,
        "object_count": object_count,
        "seeds": seeds,
        "params_base": serde_json::to_value(cfg.params_base).map_err(run_err)?,
        "field": field_src,
        "profile": "builtin",
        "jobs": jobs,
    });

    let (mut records, failures) =
        match eval::experiment_localization(&cfg, &field, &camera, &profile) {
            Ok(records) => (records, Vec::new()),
            Err(_) => {
                let keys: Vec<(WorldDistribution, u64)> = cfg
                    .distributions
                    .iter()
                    .flat_map(|d| seeds.iter().map(move |s| (*d, *s)))
                    .collect();
                run_chunks(
                    keys,
                    |(d, s)| json!({ "distribution": d.as_str(), "seed": s }),
                    |(d, s)| {
                        let chunk = LocalizationConfig {
                            distributions: vec![*d],
                            seeds: vec![*s],
                            ..cfg.clone()
                        };
                        eval::experiment_localization(&chunk, &field, &camera, &profile)
                    },
                )
            }
        };
    records.sort_by(|a, b| {
        (a.distribution.index(), a.level_rank, a.planner.as_str(), a.seed)
            .cmp(&(b.distribution.index(), b.level_rank, b.planner.as_str(), b.seed))
            .then(a.h_cov.total_cmp(&b.h_cov))
    });

    let mut csv = csv_header(
        &config,
        "planner,distribution,level_rank,level,h_cov,seed,true_positives,false_positives,\
         false_negatives,f1,length_m",
    );
    for r in &records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.planner.as_str(),
            r.distribution.as_str(),
            r.level_rank,
            r.level,
            r.h_cov,
            r.seed,
            r.true_positives,
            r.false_positives,
            r.false_negatives,
            opt_cell(r.f1),
            r.length,
        );
    }
    ensure_out_dir(out_dir)?;
    write_text(&out_dir.join("localization.csv"), &csv)?;
    if failures.is_empty() && !args.no_svg && svg_default {
        write_text(
            &out_dir.join("localization.svg"),
            &svg::localization_chart(&records, &level_names),
        )?;
    }
    finish_experiment(out_dir, "localization", &config, failures)
}

fn density(
    args: DensityArgs,
    e: Option<&ExperimentSection>,
    out_dir: &Path,
    svg_default: bool,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let max = args.max.or_else(|| e.and_then(|e| e.max)).unwrap_or(200);
    let step = args.step.or_else(|| e.and_then(|e| e.step)).unwrap_or(20);
    if step == 0 {
        return Err(CliError::Config("--step must be at least 1".into()));
    }
    let seeds = seeds_list(args.seeds, e, 10);
    let (field, field_src) = load_field(args.field.as_ref())?;
    let profile = DetectorProfile::default_calibrated();
    let camera = CameraModel::default();

    let counts: Vec<usize> = (0..=max).step_by(step).collect();
    let cfg = DensityConfig {
        counts: counts.clone(),
        seeds: seeds.clone(),
        ..DensityConfig::default()
    };
    let config = json!({
        "command": "experiment density",
        "counts": counts,
        "seeds": seeds,
        "level": serde_json::to_value(&cfg.level).map_err(run_err)?,
        "params_uniform": serde_json::to_value(cfg.params_uniform).map_err(run_err)?,
        "params_clustered": serde_json::to_value(cfg.params_clustered).map_err(run_err)?,
        "field": field_src,
        "profile": "builtin",
        "jobs": jobs,
    });

    let (mut records, failures) = match eval::experiment_density(&cfg, &field, &camera, &profile) {
        Ok(records) => (records, Vec::new()),
        Err(_) => {
            let mut keys: Vec<(WorldDistribution, usize, u64)> = Vec::new();
            for d in [WorldDistribution::Clustered, WorldDistribution::Uniform] {
                for &c in &counts {
                    for &s in &seeds {
                        keys.push((d, c, s));
                    }
                }
            }
            run_chunks(
                keys,
                |(d, c, s)| json!({ "distribution": d.as_str(), "count": c, "seed": s }),
                |(d, c, s)| {
                    let chunk = DensityConfig {
                        counts: vec![*c],
                        seeds: vec![*s],
                        ..cfg.clone()
                    };
                    let rows = eval::experiment_density(&chunk, &field, &camera, &profile)?;
                    Ok(rows.into_iter().filter(|r| r.distribution == *d).collect())
                },
            )
        }
    };
    records.sort_by(|a, b| {
        (a.distribution.index(), a.count, a.seed).cmp(&(b.distribution.index(), b.count, b.seed))
    });

    let mut csv = csv_header(
        &config,
        "distribution,count,density_per_ha,seed,f1,length_m,baseline_length_m,r_diff",
    );
    for r in &records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.distribution.as_str(),
            r.count,
            r.density_per_ha,
            r.seed,
            opt_cell(r.f1),
            r.length,
            r.baseline_length,
            r.r_diff,
        );
    }
    ensure_out_dir(out_dir)?;
    write_text(&out_dir.join("density.csv"), &csv)?;

    if failures.is_empty() {
        if !args.no_svg && svg_default {
            write_text(&out_dir.join("density.svg"), &svg::density_chart(&records))?;
        }
        for dist in [WorldDistribution::Uniform, WorldDistribution::Clustered] {
            let pts = mean_r_by_density(&records, dist);
            match crossover_density(&pts) {
                Some(d) => println!(
                    "{}: adaptive loses its length advantage near {d:.1} objects/ha",
                    dist.as_str()
                ),
                None => println!(
                    "{}: adaptive stays shorter than the reference everywhere tested",
                    dist.as_str()
                ),
            }
        }
    }
    finish_experiment(out_dir, "density", &config, failures)
}

fn mean_r_by_density(records: &[DensityRecord], dist: WorldDistribution) -> Vec<(f64, f64)> {
    let mut densities: Vec<f64> = records
        .iter()
        .filter(|r| r.distribution == dist)
        .map(|r| r.density_per_ha)
        .collect();
    densities.sort_by(f64::total_cmp);
    densities.dedup();
    densities
        .into_iter()
        .map(|d| {
            let rs: Vec<f64> = records
                .iter()
                .filter(|r| r.distribution == dist && r.density_per_ha == d)
                .map(|r| r.r_diff)
                .collect();
            (d, rs.iter().sum::<f64>() / rs.len() as f64)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// calibrate

fn parse_targets(specs: &[String]) -> Result<Vec<(f64, f64)>, CliError> {
    if specs.is_empty() {
        // The reference detector's single-image operating points.
        return Ok(vec![(12.0, 0.83), (24.0, 0.70), (32.0, 0.44)]);
    }
    specs
        .iter()
        .map(|s| {
            let (alt, f1) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("target '{s}' is not altitude=f1")))?;
            let alt: f64 = alt.trim().parse().map_err(|_| {
                CliError::Config(format!("target '{s}': bad altitude '{alt}'"))
            })?;
            let f1: f64 = f1.trim().parse().map_err(|_| {
                CliError::Config(format!("target '{s}': bad f1 '{f1}'"))
            })?;
            Ok((alt, f1))
        })
        .collect()
}

fn calibrate(args: CalibrateArgs, _file: &FileConfig, out_dir: &Path) -> Result<(), CliError> {
    let trials = args.trials.unwrap_or(10_000);
    let seed = args.seed.unwrap_or(7);
    let targets = parse_targets(&args.targets)?;
    let (mut profile, profile_src) = load_profile(args.profile.as_ref())?;
    let camera = CameraModel::default();

    let config = json!({
        "command": "calibrate",
        "targets": targets.iter().map(|(a, f)| json!({ "altitude": a, "f1": f })).collect::<Vec<_>>(),
        "trials": trials,
        "seed": seed,
        "profile": profile_src,
    });

    let fitted =
        eval::calibrate_p_tp(&mut profile, &camera, &targets, trials, seed).map_err(cfg_err)?;
    for a in &fitted {
        println!(
            "{:>4} m: detection rate {:.4} -> single-image F1 {:.4}",
            a.altitude, a.p_tp, a.achieved_f1
        );
    }

    let out = match args.out {
        Some(p) => p,
        None => {
            ensure_out_dir(out_dir)?;
            out_dir.join("profile.toml")
        }
    };
    let text = format!("# fitted by `fieldscout calibrate`\n# config: {config}\n{}", profile.to_toml_string());
    write_text(&out, &text)
}
