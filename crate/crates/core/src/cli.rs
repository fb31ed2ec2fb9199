//! The `ground-slam` command line: `vocab-build`, `slam-run`, `synth` and
//! `eval`.
//!
//! Exit codes: 0 on success, 2 for unusable input (missing or malformed
//! files, invalid settings), 3 when evaluation is impossible because the
//! sequence has no ground truth.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{export_sequence, Sequence, Source};
use crate::error::Error;
use crate::eval::{evaluate, loop_closure_audit, scatter_svg, trajectory_svg, Alignment, EvalReport};
use crate::features::{detect_and_describe, DetectorConfig};
use crate::geometry::{CameraModel, Pose2};
use crate::place_recognition::{Vocabulary, VocabularyConfig};
use crate::simulation::{simulate, SimulationSpec, TrajectoryShape};
use crate::slam::{GroundSlam, RunReport, SlamConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NO_GROUND_TRUTH: i32 = 3;

pub const REPORT_FILE: &str = "run_report.json";
pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const TRAJECTORY_SVG: &str = "trajectory.svg";
pub const METRICS_FILE: &str = "metrics.json";
pub const SCATTER_SVG: &str = "loop_closures.svg";

#[derive(Debug)]
pub enum CliError {
    Input(String),
    NoGroundTruth(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => EXIT_INPUT,
            Self::NoGroundTruth(_) => EXIT_NO_GROUND_TRUTH,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Input(m) => write!(f, "error: {m}"),
            Self::NoGroundTruth(m) => write!(f, "cannot evaluate: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Input(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ground-slam", version, about = "Ground-texture SLAM for a downward-facing camera")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a vocabulary tree from sample images or feature files.
    VocabBuild(VocabBuildArgs),
    /// Run SLAM over a sequence directory.
    SlamRun(SlamRunArgs),
    /// Render a synthetic sequence with ground truth.
    Synth(SynthArgs),
    /// Compare a run report with the sequence's ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct VocabBuildArgs {
    /// Sample directories. Every image (.pgm, .png) or feature file (.txt)
    /// found directly inside, or under `images/` and `features/`, is one
    /// training document.
    #[arg(required = true)]
    pub samples: Vec<PathBuf>,
    /// Output vocabulary file.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Children per node.
    #[arg(long, default_value_t = 10)]
    pub branching: usize,
    /// Tree depth.
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// k-medians iterations per node.
    #[arg(long, default_value_t = 25)]
    pub max_iterations: usize,
    /// k-medians restarts per node.
    #[arg(long, default_value_t = 3)]
    pub attempts: usize,
    /// FAST threshold used on sample images.
    #[arg(long, default_value_t = 20)]
    pub fast_threshold: u8,
}

/// `slam-run` settings file. Command-line flags take precedence over every
/// value given here.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub vocabulary: Option<PathBuf>,
    /// Camera file replacing the sequence's own `camera.cfg`.
    pub camera: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub source: Source,
    pub slam: SlamConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Args)]
pub struct SlamRunArgs {
    /// Sequence directory.
    pub sequence: PathBuf,
    /// TOML settings file (flags win over its values).
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(short, long)]
    pub vocabulary: Option<PathBuf>,
    /// Camera file replacing the sequence's `camera.cfg`.
    #[arg(long)]
    pub camera: Option<PathBuf>,
    /// Output directory (default: `<sequence>/run`).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Observation source: auto, images or features.
    #[arg(long)]
    pub source: Option<String>,
    /// Odometry only: no loop-closure search or graph optimization.
    #[arg(long)]
    pub no_loop_closure: bool,
    /// Leave the wall-clock time and stage timings out of the report.
    #[arg(long)]
    pub no_timestamp: bool,
    #[arg(long)]
    pub min_bow_score: Option<f64>,
    #[arg(long)]
    pub min_matches: Option<usize>,
    #[arg(long)]
    pub max_covariance_score: Option<f64>,
    /// Descriptor ratio-test threshold.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Loop-closure insertion delay, in observations.
    #[arg(long)]
    pub delay: Option<usize>,
    /// Huber breakpoint, meters.
    #[arg(long)]
    pub huber_delta: Option<f64>,
    #[arg(long)]
    pub fast_threshold: Option<u8>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output sequence directory.
    #[arg(short, long)]
    pub out: PathBuf,
    /// TOML simulation spec. Without it, the flags below describe the run.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Trajectory shape: line, square or figure-eight.
    #[arg(long, default_value = "square")]
    pub shape: String,
    /// Line length, square side or figure-eight lobe size, meters.
    #[arg(long, default_value_t = 1.0)]
    pub size: f64,
    /// Distance between poses, meters.
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub pixel_sigma: Option<f64>,
    #[arg(long)]
    pub outlier_rate: Option<f64>,
    #[arg(long)]
    pub flip_prob: Option<f64>,
    #[arg(long)]
    pub dropout_rate: Option<f64>,
    /// Also write dot-pattern images.
    #[arg(long)]
    pub images: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run report written by `slam-run`.
    #[arg(short, long)]
    pub report: PathBuf,
    /// Sequence directory holding the ground truth.
    pub sequence: PathBuf,
    /// Output directory (default: the report's directory).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// first-pose or none.
    #[arg(long, default_value = "first-pose")]
    pub alignment: String,
    /// Closure radius, meters (default: half the footprint diagonal).
    #[arg(long)]
    pub radius: Option<f64>,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> CliResult<()> {
    match command {
        Command::VocabBuild(a) => vocab_build(a),
        Command::SlamRun(a) => slam_run(a),
        Command::Synth(a) => synth(a),
        Command::Eval(a) => eval(a),
    }
}

fn sample_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(CliError::Input(format!("{}: not a directory", dir.display())));
    }
    let mut files = Vec::new();
    for d in [dir.to_path_buf(), dir.join("images"), dir.join("features")] {
        if !d.is_dir() {
            continue;
        }
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
            if path.is_file() && matches!(ext.as_str(), "pgm" | "png" | "txt") {
                files.push(path);
            }
        }
    }
    files.sort();
    Ok(files)
}

fn vocab_build(a: &VocabBuildArgs) -> CliResult<()> {
    let detector = DetectorConfig {
        threshold: a.fast_threshold,
        ..Default::default()
    };
    let mut documents = Vec::new();
    for dir in &a.samples {
        for path in sample_files(dir)? {
            let descriptors = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("txt")) {
                let text = fs::read_to_string(&path)?;
                crate::dataset::parse_features(&text)
                    .map_err(|m| CliError::Input(format!("{}: {m}", path.display())))?
                    .1
            } else {
                let img = image::open(&path)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
                    .into_luma8();
                detect_and_describe(&img, &detector)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
                    .1
            };
            documents.push(descriptors);
        }
    }
    if documents.iter().all(|d| d.is_empty()) {
        return Err(CliError::Input("no descriptors found in the sample directories".into()));
    }
    let cfg = VocabularyConfig {
        branching: a.branching,
        depth: a.depth,
        seed: a.seed,
        max_iterations: a.max_iterations,
        attempts: a.attempts,
    };
    let vocab = Vocabulary::build(&documents, &cfg)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    vocab.save(&a.out)?;
    println!(
        "vocabulary: {} words from {} documents -> {}",
        vocab.word_count(),
        documents.len(),
        a.out.display()
    );
    Ok(())
}

fn parse_source(s: &str) -> CliResult<Source> {
    match s {
        "auto" => Ok(Source::Auto),
        "images" => Ok(Source::Images),
        "features" => Ok(Source::Features),
        other => Err(CliError::Input(format!("unknown source `{other}`"))),
    }
}

/// Merges the settings file with the flags; flags win.
pub fn resolve_run_config(a: &SlamRunArgs) -> CliResult<RunConfig> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &a.vocabulary {
        cfg.vocabulary = Some(v.clone());
    }
    if let Some(c) = &a.camera {
        cfg.camera = Some(c.clone());
    }
    if let Some(o) = &a.out {
        cfg.output = Some(o.clone());
    }
    if let Some(s) = &a.source {
        cfg.source = parse_source(s)?;
    }
    let s = &mut cfg.slam;
    if a.no_loop_closure {
        s.loop_closure = false;
    }
    if let Some(v) = a.min_bow_score {
        s.thresholds.min_bow_score = v;
    }
    if let Some(v) = a.min_matches {
        s.thresholds.min_matches = v;
    }
    if let Some(v) = a.max_covariance_score {
        s.thresholds.max_covariance_score = v;
    }
    if let Some(v) = a.ratio {
        s.ratio = v;
    }
    if let Some(v) = a.delay {
        s.delay = v;
    }
    if let Some(v) = a.huber_delta {
        s.estimator.huber_delta = v;
    }
    if let Some(v) = a.fast_threshold {
        s.detector.threshold = v;
    }
    s.validate()?;
    Ok(cfg)
}

fn trajectory_csv(poses: &[Pose2]) -> String {
    let mut out = String::from("index,x,y,theta\n");
    for (i, p) in poses.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{},{}", p.x(), p.y(), p.theta());
    }
    out
}

fn slam_run(a: &SlamRunArgs) -> CliResult<()> {
    let cfg = resolve_run_config(a)?;
    let vocab_path = cfg
        .vocabulary
        .clone()
        .ok_or_else(|| CliError::Input("no vocabulary given (--vocabulary or config)".into()))?;
    let vocabulary = Vocabulary::load(&vocab_path)
        .map_err(|e| CliError::Input(format!("{}: {e}", vocab_path.display())))?;
    let sequence = Sequence::load(&a.sequence)?;
    let camera = match &cfg.camera {
        Some(path) => CameraModel::load(path)?,
        None => sequence.camera.clone(),
    };
    let use_images = sequence.uses_images(cfg.source)?;
    let out = cfg.output.clone().unwrap_or_else(|| a.sequence.join("run"));

    let mut slam = GroundSlam::new(camera, vocabulary, cfg.slam.clone())?;
    for i in 0..sequence.len() {
        if use_images {
            slam.process_image(&sequence.image(i)?)?;
        } else {
            slam.process_features(sequence.stored_features(i)?)?;
        }
    }

    let report = RunReport::from_slam(&slam, &sequence.name, !a.no_timestamp);
    fs::create_dir_all(&out)?;
    fs::write(out.join(REPORT_FILE), report.to_json())?;
    fs::write(out.join(TRAJECTORY_CSV), trajectory_csv(&report.poses))?;
    let links: Vec<(usize, usize)> = report.loop_factors().filter_map(|f| f.from.map(|i| (i, f.to))).collect();
    let svg = match &sequence.ground_truth {
        Some(gt) => trajectory_svg(
            &[("estimate", &report.poses, "#1f77b4"), ("ground truth", gt, "#000000")],
            &links,
        ),
        None => trajectory_svg(&[("estimate", &report.poses, "#1f77b4")], &links),
    };
    fs::write(out.join(TRAJECTORY_SVG), svg)?;
    println!(
        "{} observations, {} loop closures, {} degenerate odometry steps -> {}",
        report.poses.len(),
        report.loop_closures,
        report.degenerate_odometry,
        out.display()
    );
    Ok(())
}

fn synth(a: &SynthArgs) -> CliResult<()> {
    let mut spec = match &a.spec {
        Some(path) => SimulationSpec::load(path)?,
        None => {
            let shape = match a.shape.as_str() {
                "line" => TrajectoryShape::Line { length: a.size },
                "square" => TrajectoryShape::Square { side: a.size },
                "figure-eight" => TrajectoryShape::FigureEight { size: a.size },
                other => return Err(CliError::Input(format!("unknown shape `{other}`"))),
            };
            SimulationSpec::new(shape, a.step, 0)
        }
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(v) = a.pixel_sigma {
        spec.noise.pixel_sigma = v;
    }
    if let Some(v) = a.outlier_rate {
        spec.noise.outlier_rate = v;
    }
    if let Some(v) = a.flip_prob {
        spec.noise.descriptor_flip_prob = v;
    }
    if let Some(v) = a.dropout_rate {
        spec.noise.dropout_rate = v;
    }
    spec.images |= a.images;
    let seq = simulate(&spec)?;
    export_sequence(&seq, &a.out)?;
    fs::write(a.out.join("spec.toml"), spec.to_toml())?;
    println!("{} observations -> {}", seq.truth.len(), a.out.display());
    Ok(())
}

fn eval(a: &EvalArgs) -> CliResult<()> {
    let alignment: Alignment = a.alignment.parse()?;
    let text = fs::read_to_string(&a.report)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.report.display())))?;
    let report = RunReport::from_json(&text)?;
    let sequence = Sequence::load(&a.sequence)?;
    let Some(truth) = &sequence.ground_truth else {
        return Err(CliError::NoGroundTruth(format!(
            "{} has no {}",
            a.sequence.display(),
            crate::dataset::GROUND_TRUTH_FILE
        )));
    };
    let trajectory = evaluate(&report.poses, truth, alignment)?;
    let radius = match a.radius {
        Some(r) => r,
        None => sequence.camera.footprint_diagonal()? / 2.0,
    };
    let closures: Vec<(usize, usize, Pose2)> = report
        .loop_factors()
        .filter_map(|f| f.from.map(|i| (i, f.to, f.measurement)))
        .collect();
    let audit = loop_closure_audit(&closures, truth, radius, report.config.delay)?;
    let timing_ms = report
        .steps
        .iter()
        .map(|s| {
            s.timing
                .map(|t| t.extraction_ms + t.odometry_ms + t.loop_closure_ms + t.optimization_ms)
        })
        .collect::<Option<Vec<f64>>>();
    let metrics = EvalReport {
        sequence: sequence.name.clone(),
        alignment,
        trajectory,
        loop_closures: audit,
        timing_ms,
    };
    let out = a
        .out
        .clone()
        .or_else(|| a.report.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    fs::write(
        out.join(METRICS_FILE),
        serde_json::to_string_pretty(&metrics).map_err(Error::from)?,
    )?;
    fs::write(out.join(SCATTER_SVG), scatter_svg(&metrics.loop_closures.records))?;
    println!(
        "translational MAE {:.4} cm/m, rotational MAE {:.4} deg over {:.2} m -> {}",
        metrics.trajectory.translational_mae_normalized,
        metrics.trajectory.rotational_mae,
        metrics.trajectory.path_length,
        out.display()
    );
    Ok(())
}
